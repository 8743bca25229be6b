"""Device noise: imperfect interferometer, phase-drive quantisation, photon
detection, and the fringe scan used to calibrate the phase modulator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import curve_fit

from .core import ControlQubitState, PhaseWord, FeedbackAngle


class FitError(RuntimeError):
    """Fringe fit failed; ``diagnostics`` holds what was tried."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class RetryCapExceeded(RuntimeError):
    def __init__(self, pulses: int):
        super().__init__(f"no click after {pulses} pulses")
        self.pulses = pulses


@dataclass(frozen=True)
class NoiseParams:
    """Measurement and pulse model parameters.

    ``mu=None`` switches the photon model off (every pulse yields a signal
    click).  ``p_override`` replaces visibility, truncation and DAC phase
    errors by a direct per-measurement flip probability; photon loss and dark
    counts still apply.  ``repeats`` is the number of rotate-and-measure
    repetitions per qubit used for majority voting.
    """

    v: float = 1.0
    m: int | None = None
    dac_digits: int | None = None
    v_pi: float = 5.80
    mu: float | None = None
    loss_db: float = 0.0
    eta_det: float = 1.0
    dark_rate: float = 0.0
    retry_cap: int = 1000
    p_override: float | None = None
    repeats: int = 1

    def __post_init__(self):
        for name in ("v", "eta_det", "dark_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.p_override is not None and not 0.0 <= self.p_override <= 1.0:
            raise ValueError(f"p_override must lie in [0, 1], got {self.p_override}")
        if self.v_pi <= 0:
            raise ValueError("v_pi must be positive")
        if self.mu is not None and self.mu < 0:
            raise ValueError("mu must be non-negative")
        if self.loss_db < 0:
            raise ValueError("loss_db must be non-negative")
        if self.retry_cap < 1:
            raise ValueError("retry_cap must be >= 1")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.m is not None and self.m < 1:
            raise ValueError("m must be >= 1")
        if self.dac_digits is not None and self.dac_digits < 1:
            raise ValueError("dac_digits must be >= 1")

    @classmethod
    def ideal(cls) -> "NoiseParams":
        return cls()

    @classmethod
    def device_profile(cls, **overrides) -> "NoiseParams":
        """Device values of the fiber-loop experiment (visibility 98 %)."""
        base = dict(
            v=0.98, m=5, dac_digits=3, v_pi=5.80, mu=0.7, loss_db=8.4,
            eta_det=0.13, dark_rate=6.5e-7,
        )
        base.update(overrides)
        return cls(**base)

    @property
    def is_ideal(self) -> bool:
        return (
            self.v == 1.0 and self.m is None and self.dac_digits is None
            and self.mu is None and self.dark_rate == 0.0 and not self.p_override
        )

    @property
    def transmission(self) -> float:
        return 10.0 ** (-self.loss_db / 10.0)

    @property
    def p_signal(self) -> float:
        """Probability that a pulse produces a signal click."""
        if self.mu is None:
            return 1.0
        return -math.expm1(-self.mu * self.transmission * self.eta_det)

    @property
    def p_click(self) -> float:
        ps = self.p_signal
        return ps + (1.0 - ps) * self.dark_rate

    def with_(self, **changes) -> "NoiseParams":
        return replace(self, **changes)


class PulseKind(str, Enum):
    SIGNAL = "signal_click"
    DARK = "dark_click"
    NONE = "no_click"


@dataclass(frozen=True)
class PulseOutcome:
    kind: PulseKind
    bit: int | None = None

    def __post_init__(self):
        if (self.bit is None) != (self.kind is PulseKind.NONE):
            raise ValueError("bit must be present exactly when a click occurred")


def povm_outcome_probability(state: ControlQubitState, v: float) -> float:
    """Probability of outcome 0 under the visibility-``v`` POVM."""
    p0 = abs(state.amp0) ** 2
    p1 = abs(state.amp1) ** 2
    return 0.5 * (1.0 + v) * p0 + 0.5 * (1.0 - v) * p1


def analytic_error_probability(v: float, cos_delta: float) -> float:
    return 0.5 * (1.0 - v * cos_delta)


def round_significant(x: float, digits: int) -> float:
    if x == 0.0:
        return 0.0
    return float(f"{x:.{digits - 1}e}")


def quantize_phase_dac(phi_k: float, v_pi: float, dac_digits: int | None) -> tuple[float, float]:
    """Drive voltage for a rotation of ``phi_k`` turns and its phase error.

    A full pi shift (half a turn) needs ``v_pi`` volts.  The voltage is rounded
    to ``dac_digits`` significant digits; the returned error is
    ``pi * (V - V_ideal) / v_pi`` (positive means the modulator overshoots).
    """
    if not 0.0 <= phi_k < 0.5 + 1e-15:
        raise ValueError(f"rotation angle {phi_k} outside [0, 1/2)")
    ideal = 2.0 * v_pi * phi_k
    if dac_digits is None:
        return ideal, 0.0
    voltage = round_significant(ideal, dac_digits)
    return voltage, math.pi * (voltage - ideal) / v_pi


def sample_pulse(params: NoiseParams, p_one: float, rng: np.random.Generator) -> PulseOutcome:
    """One pulse through loss, detector and dark counts.

    ``p_one`` is the probability that a signal photon reads out as 1.
    """
    u = rng.random()
    ps = params.p_signal
    if u < ps:
        return PulseOutcome(PulseKind.SIGNAL, int(rng.random() < p_one))
    if rng.random() < params.dark_rate:
        return PulseOutcome(PulseKind.DARK, int(rng.integers(0, 2)))
    return PulseOutcome(PulseKind.NONE)


def outcome_one_probability(state: ControlQubitState, params: NoiseParams) -> float:
    """Probability that a detected signal photon reads 1."""
    if params.p_override is not None:
        p1 = abs(state.amp1) ** 2
        q = params.p_override
        return (1.0 - q) * p1 + q * (1.0 - p1)
    return 1.0 - povm_outcome_probability(state, params.v)


def measure_repeated(
    state: ControlQubitState, params: NoiseParams, rng: np.random.Generator, repeats: int = 1
) -> tuple[int, int]:
    """Measure ``repeats`` fresh copies of ``state``; return ``(ones, pulses)``.

    Each repetition re-sends pulses until a click.  Sampling the attempt count
    geometrically and the click mixture binomially is distributionally equal to
    looping :func:`sample_pulse`.  Raises :class:`RetryCapExceeded` when one
    repetition needs more than ``retry_cap`` pulses.
    """
    p1 = min(1.0, max(0.0, outcome_one_probability(state, params)))
    if params.mu is None and params.dark_rate == 0.0:
        return int(rng.binomial(repeats, p1)), repeats
    p_click = params.p_click
    if p_click <= 0.0:
        raise RetryCapExceeded(params.retry_cap)
    attempts = rng.geometric(p_click, size=repeats)
    worst = int(attempts.max())
    if worst > params.retry_cap:
        raise RetryCapExceeded(params.retry_cap)
    n_dark = int(rng.binomial(repeats, 1.0 - params.p_signal / p_click))
    ones = int(rng.binomial(repeats - n_dark, p1)) + int(rng.binomial(n_dark, 0.5))
    return ones, int(attempts.sum())


@dataclass
class CensusResult:
    cos_delta: np.ndarray
    edges: np.ndarray
    counts: np.ndarray
    mean_abs_cos: float
    min_abs_cos: float

    @property
    def n_rotations(self) -> int:
        return int(self.cos_delta.size)


def residual_phase_error(cmd, v_pi: float = 5.80, dac_digits: int | None = None) -> float:
    """Total phase error of a rotation: truncation minus DAC overshoot."""
    _, delta_dac = quantize_phase_dac(cmd.turns, v_pi, dac_digits)
    return cmd.delta - delta_dac


def phase_error_census(
    words: Iterable[PhaseWord],
    m: int | None,
    v_pi: float = 5.80,
    dac_digits: int | None = None,
    bins: int | Sequence[float] = 40,
) -> CensusResult:
    """cos(delta) for every rotation executed on ``words`` with correct feedback."""
    values = []
    for word in words:
        angle = FeedbackAngle(m)
        bits = word.bits
        for k in range(1, word.n + 1):
            values.append(math.cos(residual_phase_error(angle.command(), v_pi, dac_digits)))
            angle.push(bits[word.n - k])
    if not values:
        raise ValueError("census needs at least one word")
    cos_delta = np.asarray(values)
    if isinstance(bins, int):
        lo = min(0.98, float(cos_delta.min()))
        counts, edges = np.histogram(cos_delta, bins=bins, range=(lo, 1.0))
    else:
        counts, edges = np.histogram(cos_delta, bins=np.asarray(bins))
    mags = np.abs(cos_delta)
    return CensusResult(cos_delta, edges, counts, float(mags.mean()), float(mags.min()))


def fringe_fraction(voltages, v: float, v_pi: float, phase_offset: float = 0.0) -> np.ndarray:
    voltages = np.asarray(voltages, dtype=float)
    return 0.5 * (1.0 + v * np.cos(np.pi * voltages / v_pi + phase_offset))


def fringe_scan(
    v: float,
    v_pi: float,
    phase_offset: float,
    voltages: Sequence[float],
    pulses_per_point: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Binomial photon counts at each drive voltage."""
    if pulses_per_point < 1:
        raise ValueError("pulses_per_point must be >= 1")
    return rng.binomial(pulses_per_point, fringe_fraction(voltages, v, v_pi, phase_offset))


def _cosine(x, a, b, v_pi, offset):
    return a + b * np.cos(np.pi * x / v_pi + offset)


@dataclass
class FringeFit:
    visibility: float
    v_pi: float
    offset: float
    baseline: float
    amplitude: float
    residual: float
    params_cov: np.ndarray = field(repr=False, default=None)


def _linear_cosine_fit(x, y, v_pi):
    w = np.pi / v_pi
    design = np.column_stack([np.ones_like(x), np.cos(w * x), np.sin(w * x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return coef, float(resid @ resid)


def fit_fringe(voltages: Sequence[float], counts: Sequence[float], grid: int = 2000) -> FringeFit:
    """Least-squares fit of ``A + B cos(pi V / v_pi + offset)``.

    For a fixed ``v_pi`` the model is linear, so a grid search over ``v_pi``
    seeds the nonlinear refinement.  Visibility is ``B / A``.
    """
    x = np.asarray(voltages, dtype=float)
    y = np.asarray(counts, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("voltages and counts must be 1-D and the same length")
    if x.size < 8:
        raise ValueError("fringe fit needs at least 8 scan points")
    order = np.argsort(x)
    x, y = x[order], y[order]
    span = x[-1] - x[0]
    step = float(np.min(np.diff(x))) if x.size > 1 else 0.0
    if span <= 0 or step <= 0:
        raise ValueError("scan voltages must be distinct")
    # half-period v_pi between the sampling step and the full span
    candidates = np.geomspace(step, span, grid)
    sse = np.array([_linear_cosine_fit(x, y, c)[1] for c in candidates])
    best = candidates[int(np.argmin(sse))]
    (a, c, s), _ = _linear_cosine_fit(x, y, best)
    b0 = math.hypot(c, s)
    off0 = math.atan2(-s, c)
    diagnostics = {"v_pi_seed": best, "sse_seed": float(sse.min()), "points": int(x.size)}
    try:
        popt, pcov = curve_fit(_cosine, x, y, p0=[a, b0, best, off0], maxfev=10000)
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"fringe fit did not converge: {exc}", diagnostics) from exc
    a, b, v_pi, offset = (float(p) for p in popt)
    if not np.all(np.isfinite(popt)) or a <= 0:
        raise FitError("fringe fit returned non-physical parameters", {**diagnostics, "popt": popt})
    if b < 0:
        b, offset = -b, offset + math.pi
    if v_pi < 0:
        v_pi, offset = -v_pi, -offset
    offset = math.remainder(offset, 2.0 * math.pi)
    resid = y - _cosine(x, a, b, v_pi, offset)
    return FringeFit(b / a, v_pi, offset, a, b, float(np.sqrt(np.mean(resid**2))), pcov)
