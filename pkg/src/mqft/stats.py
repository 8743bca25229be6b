"""Run-length statistics, majority voting and confidence bounds on the
per-qubit error probability."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np
from scipy import stats as sps
from scipy.optimize import bisect

Convention = Literal["cumulative", "pmf"]
CONVENTIONS = ("cumulative", "pmf")


@dataclass
class TrialStats:
    """Run lengths of a set of trials of ``n_qubits`` each.

    A run length is the 1-based step of the first error; censored trials had
    no error and carry ``n_qubits``.
    """

    run_lengths: np.ndarray
    censored: np.ndarray
    n_qubits: int

    def __post_init__(self):
        self.run_lengths = np.asarray(self.run_lengths, dtype=np.int64)
        self.censored = np.asarray(self.censored, dtype=bool)
        if self.run_lengths.shape != self.censored.shape or self.run_lengths.ndim != 1:
            raise ValueError("run_lengths and censored must be 1-D and aligned")
        if self.run_lengths.size and (
            self.run_lengths.min() < 1 or self.run_lengths.max() > self.n_qubits
        ):
            raise ValueError(f"run lengths must lie in 1..{self.n_qubits}")
        if np.any(self.run_lengths[self.censored] != self.n_qubits):
            raise ValueError("censored trials must have run length n_qubits")

    @classmethod
    def from_records(cls, records: Iterable, n_qubits: int | None = None) -> "TrialStats":
        records = [r for r in records if not r.aborted]
        if n_qubits is None:
            if not records:
                raise ValueError("no records and no n_qubits")
            n_qubits = records[0].n
        return cls(
            np.array([r.run_length for r in records], dtype=np.int64),
            np.array([r.censored for r in records], dtype=bool),
            n_qubits,
        )

    @property
    def n_trials(self) -> int:
        return int(self.run_lengths.size)

    @property
    def correct_bits(self) -> np.ndarray:
        return np.where(self.censored, self.n_qubits, self.run_lengths - 1)


@dataclass(frozen=True)
class ErrorRateEstimate:
    p_mean: float
    """``1 / mean(run length)``."""
    p_censored: float
    """Uncensored trials per qubit processed (geometric MLE with censoring)."""
    all_censored: bool


def geometric_pmf(n: int, p: float) -> float:
    if n < 1:
        raise ValueError("n starts at 1")
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    return (1.0 - p) ** (n - 1) * p


def geometric_mean(p: float) -> float:
    return 1.0 / p


def estimate_error_rate(trials: TrialStats) -> ErrorRateEstimate:
    if trials.n_trials == 0:
        raise ValueError("need at least one trial")
    total = int(trials.run_lengths.sum())
    failures = int((~trials.censored).sum())
    return ErrorRateEstimate(
        p_mean=trials.n_trials / total,
        p_censored=failures / total,
        all_censored=failures == 0,
    )


def majority_vote_error(M: int, p: float) -> float:
    """Error probability of an M-fold majority vote; ties count as errors."""
    if M < 1:
        raise ValueError("M must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return math.fsum(math.comb(M, j) * p ** (M - j) * (1.0 - p) ** j for j in range(M // 2 + 1))


def _root(f, lo: float, hi: float, rtol: float) -> float:
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise ValueError(f"no sign change on [{lo:g}, {hi:g}] (f={flo:g}, {fhi:g})")
    return bisect(f, lo, hi, xtol=1e-300, rtol=max(rtol, 4 * np.finfo(float).eps), maxiter=2000)


def success_tail(p: float, k: int, n_success: int, n_trials: int) -> float:
    """P[at least ``n_success`` of ``n_trials`` get ``k`` qubits right]."""
    return float(sps.binom.sf(n_success - 1, n_trials, (1.0 - p) ** k))


def failure_tail(p: float, k: int, n_fail: int, n_trials: int, convention: Convention = "cumulative") -> float:
    """P[at least ``n_fail`` of ``n_trials`` fail by qubit ``k``]."""
    if convention == "cumulative":
        q = -math.expm1(k * math.log1p(-p)) if p < 1.0 else 1.0
    elif convention == "pmf":
        q = geometric_pmf(k, p)
    else:
        raise ValueError(f"unknown convention {convention!r}; use one of {CONVENTIONS}")
    return float(sps.binom.sf(n_fail - 1, n_trials, q))


def p_max_bound(k_max: int, n_max: int, n_trials: int, alpha: float = 0.05, rtol: float = 1e-6) -> float:
    """Smallest p for which ``n_max`` or more full successes through ``k_max``
    qubits would have probability below ``alpha``."""
    _check_counts(n_max, n_trials, alpha)
    f = lambda p: success_tail(p, k_max, n_max, n_trials) - alpha  # noqa: E731
    return _root(f, 1e-300, 1.0 - 1e-15, rtol)


def p_min_bound(
    k_min: int, n_min: int, n_trials: int, alpha: float = 0.05,
    convention: Convention = "cumulative", rtol: float = 1e-6,
) -> float:
    """Largest p for which ``n_min`` or more failures by qubit ``k_min`` would
    have probability below ``alpha``."""
    _check_counts(n_min, n_trials, alpha)
    f = lambda p: failure_tail(p, k_min, n_min, n_trials, convention) - alpha  # noqa: E731
    # the pmf convention is only monotone up to its mode at p = 1/k
    hi = 1.0 - 1e-15 if convention == "cumulative" else 1.0 / k_min
    return _root(f, 1e-300, hi, rtol)


def _check_counts(count: int, n_trials: int, alpha: float) -> None:
    if not 0 <= count <= n_trials:
        raise ValueError(f"count {count} outside 0..{n_trials}")
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 0.5)")


def confidence_bounds(
    k_max: int, n_max: int, k_min: int, n_min: int, n_trials: int,
    alpha: float = 0.05, convention: Convention = "cumulative", rtol: float = 1e-6,
) -> tuple[float, float]:
    """``(p_min, p_max)`` from the best and worst trials of an experiment."""
    p_max = p_max_bound(k_max, n_max, n_trials, alpha, rtol)
    p_min = p_min_bound(k_min, n_min, n_trials, alpha, convention, rtol)
    return p_min, p_max


@dataclass(frozen=True)
class BoundInputs:
    k_max: int
    n_max: int
    k_min: int | None
    n_min: int
    n_trials: int


def bound_inputs(trials: TrialStats) -> BoundInputs:
    """Best/worst-trial summary of a data set.

    ``k_max`` is the largest number of consecutively correct qubits and
    ``n_max`` how many trials reached it; ``k_min`` is the earliest first-error
    step and ``n_min`` how many trials failed there.
    """
    correct = trials.correct_bits
    k_max = int(correct.max())
    n_max = int((correct >= k_max).sum())
    failed = trials.run_lengths[~trials.censored]
    if failed.size:
        k_min = int(failed.min())
        n_min = int((failed <= k_min).sum())
    else:
        k_min, n_min = None, 0
    return BoundInputs(k_max, n_max, k_min, n_min, trials.n_trials)


def bounds_from_trials(
    trials: TrialStats, alpha: float = 0.05, convention: Convention = "cumulative"
) -> tuple[float, float]:
    """Confidence interval from data; degenerate sides clamp to 0 or 1."""
    b = bound_inputs(trials)
    p_max = p_max_bound(b.k_max, b.n_max, b.n_trials, alpha) if b.k_max > 0 else 1.0
    p_min = 0.0 if b.k_min is None else p_min_bound(b.k_min, b.n_min, b.n_trials, alpha, convention)
    return p_min, p_max


def run_length_expected(p: float, n_qubits: int) -> np.ndarray:
    """Probabilities of run lengths ``1..n`` followed by the censored mass."""
    k = np.arange(1, n_qubits + 1)
    pmf = (1.0 - p) ** (k - 1) * p
    return np.append(pmf, (1.0 - p) ** n_qubits)


def geometric_gof(trials: TrialStats, p: float | None = None, min_expected: float = 5.0):
    """Chi-square goodness of fit of run lengths to the geometric law.

    Cells ``1..n`` plus a censored cell are merged left to right until each
    expected count reaches ``min_expected``.  When ``p`` is estimated from the
    data one degree of freedom is removed.  Returns ``(statistic, p_value, dof)``.
    """
    ddof = 0
    if p is None:
        p = estimate_error_rate(trials).p_censored
        ddof = 1
    n = trials.n_qubits
    observed = np.zeros(n + 1)
    uncensored = trials.run_lengths[~trials.censored]
    np.add.at(observed, uncensored - 1, 1)
    observed[n] = trials.censored.sum()
    expected = run_length_expected(p, n) * trials.n_trials
    obs_cells, exp_cells = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(observed, expected):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            obs_cells.append(o_acc)
            exp_cells.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        if obs_cells:
            obs_cells[-1] += o_acc
            exp_cells[-1] += e_acc
        else:
            obs_cells.append(o_acc)
            exp_cells.append(e_acc)
    obs = np.array(obs_cells)
    exp = np.array(exp_cells)
    exp *= obs.sum() / exp.sum()
    res = sps.chisquare(obs, exp, ddof=ddof)
    return float(res.statistic), float(res.pvalue), len(obs) - 1 - ddof
