"""Target register held in a superposition of eigenstates.

The register is a density matrix over the ``r`` eigenstates ``|u_s>``.  Each
step entangles a fresh control qubit with phase ``0.b^s_{n-k+1}..b^s_n`` per
eigenstate; after the feedback rotation and Hadamard the control amplitudes are
``a0_s = (1 + e^{i theta_s})/2`` and ``a1_s = (1 - e^{i theta_s})/2``, so the
measurement acts on the target through the diagonal operators
``A_b = diag(a_b)``.  Tracing out the control after the visibility-``v`` POVM
gives

    rho_0 = [(1+v)/2 A0 rho A0^+ + (1-v)/2 A1 rho A1^+] / P0

and the mirror expression for outcome 1.  When every surviving eigenstate is
consistent with the bits already accepted this reduces to the two-branch
picture ``{u0, u1}`` with ``P0 = [1 + (2 w0 - 1) v cos(delta)] / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .core import PhaseWord, apply_hadamard, apply_rotation, plus_state, rotation_angle, step_phase

TOL = 1e-12

Delta = float | Callable[[np.random.Generator], float]


@dataclass(frozen=True, eq=False)
class TargetRegister:
    eigenphases: tuple[PhaseWord, ...]
    coeffs: np.ndarray
    rho: np.ndarray
    accepted: tuple[int, ...] = ()

    @property
    def r(self) -> int:
        return len(self.eigenphases)

    @property
    def n(self) -> int:
        return self.eigenphases[0].n

    @property
    def step(self) -> int:
        """Index of the next step (1-based)."""
        return len(self.accepted) + 1

    def purity(self) -> float:
        return float(np.real(np.trace(self.rho @ self.rho)))

    def accept(self, bit: int) -> "TargetRegister":
        """Record ``bit`` as the value decided for the current step."""
        if bit not in (0, 1):
            raise ValueError("bit must be 0 or 1")
        if self.step > self.n:
            raise ValueError("all steps already accepted")
        return replace(self, accepted=self.accepted + (bit,))


@dataclass(frozen=True)
class BranchSplit:
    w0: float
    w1: float
    members0: tuple[int, ...]
    members1: tuple[int, ...]
    consistent_mass: float


def init_register(eigenphases: Sequence[PhaseWord], coeffs: Sequence[complex]) -> TargetRegister:
    phases = tuple(eigenphases)
    c = np.asarray(coeffs, dtype=complex)
    if not phases or c.ndim != 1 or len(phases) != c.size:
        raise ValueError("need one coefficient per eigenphase")
    if len({p.n for p in phases}) != 1:
        raise ValueError("all eigenphases must have the same number of bits")
    norm = float(np.vdot(c, c).real)
    if abs(norm - 1.0) > TOL:
        raise ValueError(f"coefficients must be normalised, got norm {norm}")
    return TargetRegister(phases, c, np.outer(c, c.conj()))


def _check_step(register: TargetRegister, k: int, accepted: Sequence[int]) -> None:
    if len(accepted) != k - 1:
        raise ValueError(f"step {k} needs {k - 1} accepted bits, got {len(accepted)}")
    if not 1 <= k <= register.n:
        raise ValueError(f"step {k} outside 1..{register.n}")


def _consistent(word: PhaseWord, accepted: Sequence[int]) -> bool:
    # accepted[i] is the bit measured at step i+1, i.e. b_{n-i}
    n = word.n
    return all(word.bits[n - 1 - i] == b for i, b in enumerate(accepted))


def branch_split(
    register: TargetRegister, k: int | None = None, accepted_bits: Sequence[int] | None = None
) -> BranchSplit:
    """Partition eigenstates consistent with the accepted history by bit
    ``b_{n-k+1}``; weights are their share of the diagonal mass."""
    accepted = register.accepted if accepted_bits is None else tuple(accepted_bits)
    k = len(accepted) + 1 if k is None else k
    _check_step(register, k, accepted)
    n = register.n
    diag = np.real(np.diag(register.rho))
    members: tuple[list[int], list[int]] = ([], [])
    for s, word in enumerate(register.eigenphases):
        if _consistent(word, accepted):
            members[word.bits[n - k]].append(s)
    m0 = float(diag[members[0]].sum()) if members[0] else 0.0
    m1 = float(diag[members[1]].sum()) if members[1] else 0.0
    total = m0 + m1
    if total <= 1e-15:
        raise ValueError(f"no eigenstate consistent with accepted bits {accepted}")
    return BranchSplit(m0 / total, m1 / total, tuple(members[0]), tuple(members[1]), total)


def control_amplitudes(register: TargetRegister, k: int, delta: float, m: int | None = None) -> np.ndarray:
    """``(2, r)`` array of post-Hadamard control amplitudes per eigenstate."""
    _check_step(register, k, register.accepted)
    cmd = rotation_angle(register.accepted[::-1], k, m)
    out = np.empty((2, register.r), dtype=complex)
    for s, word in enumerate(register.eigenphases):
        state = apply_hadamard(apply_rotation(plus_state(float(step_phase(word, k))), cmd, delta))
        out[:, s] = state
    return out


def _branches(register: TargetRegister, k: int, v: float, delta: float, m: int | None):
    amps = control_amplitudes(register, k, delta, m)
    rho = register.rho
    # A rho A^+ for diagonal A is an elementwise product with the outer product of a
    t0 = rho * np.outer(amps[0], amps[0].conj())
    t1 = rho * np.outer(amps[1], amps[1].conj())
    hi, lo = 0.5 * (1.0 + v), 0.5 * (1.0 - v)
    return hi * t0 + lo * t1, lo * t0 + hi * t1


def _resolve(delta: Delta, rng: np.random.Generator | None) -> float:
    if callable(delta):
        if rng is None:
            raise ValueError("a sampled phase error needs a random generator")
        return float(delta(rng))
    return float(delta)


def collapse_on_outcome(
    register: TargetRegister, k: int, v: float, delta: float, outcome: int, m: int | None = None
) -> tuple[float, TargetRegister]:
    """Probability of ``outcome`` and the conditional post-measurement register."""
    unnorm = _branches(register, k, v, delta, m)[outcome]
    p = float(np.real(np.trace(unnorm)))
    if p <= 0.0:
        return 0.0, register
    return p, replace(register, rho=unnorm / p)


def outcome_probability(register: TargetRegister, k: int, v: float, delta: float, m: int | None = None) -> float:
    """Probability of outcome 0 for the next measurement."""
    return float(np.real(np.trace(_branches(register, k, v, delta, m)[0])))


def measure_control_collapse(
    register: TargetRegister,
    k: int,
    v: float,
    delta: Delta,
    rng: np.random.Generator,
    m: int | None = None,
) -> tuple[int, float, TargetRegister]:
    """Sample one measurement; returns ``(bit, P0, updated register)``.

    ``delta`` may be a callable drawing a fresh phase error per repetition.
    The accepted history is left untouched so the same step can be repeated.
    """
    d = _resolve(delta, rng)
    rho0, rho1 = _branches(register, k, v, d, m)
    p0 = float(np.real(np.trace(rho0)))
    bit = int(rng.random() >= p0)
    unnorm = rho1 if bit else rho0
    return bit, p0, replace(register, rho=unnorm / np.real(np.trace(unnorm)))


def nonselective_collapse(
    register: TargetRegister, k: int, v: float, delta: float, m: int | None = None
) -> TargetRegister:
    """Measurement whose result was lost: sum of both outcome branches."""
    rho0, rho1 = _branches(register, k, v, float(delta), m)
    return replace(register, rho=rho0 + rho1)


def repeat_error_probability(
    register: TargetRegister, k: int, v: float, delta: float, m: int | None = None
) -> float:
    """Probability that a further measurement at step ``k`` disagrees with the
    eigenstate's own bit, averaged over the register.

    Only eigenstates consistent with the accepted history contribute.
    """
    amps = control_amplitudes(register, k, delta, m)
    hi, lo = 0.5 * (1.0 + v), 0.5 * (1.0 - v)
    p_read0 = hi * np.abs(amps[0]) ** 2 + lo * np.abs(amps[1]) ** 2
    diag = np.real(np.diag(register.rho))
    n = register.n
    total = err = 0.0
    for s, word in enumerate(register.eigenphases):
        if not _consistent(word, register.accepted):
            continue
        wrong = p_read0[s] if word.bits[n - k] else 1.0 - p_read0[s]
        total += diag[s]
        err += diag[s] * wrong
    return err / total


def check_density_matrix(rho: np.ndarray, tol: float = TOL) -> None:
    if not np.allclose(rho, rho.conj().T, atol=tol):
        raise AssertionError("density matrix is not Hermitian")
    tr = float(np.real(np.trace(rho)))
    if abs(tr - 1.0) > tol:
        raise AssertionError(f"trace {tr} != 1")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise AssertionError("density matrix is not positive semidefinite")


def trajectory_distribution(
    register: TargetRegister, v: float = 1.0, delta: float = 0.0, m: int | None = None
) -> dict[str, float]:
    """Exact distribution over recovered words when every step accepts the
    single measured bit (both outcomes enumerated)."""
    leaves = [(register, 1.0)]
    for k in range(register.step, register.n + 1):
        grown = []
        for reg, prob in leaves:
            for bit in (0, 1):
                p, nxt = collapse_on_outcome(reg, k, v, delta, bit, m)
                if p > 0.0:
                    grown.append((nxt.accept(bit), prob * p))
        leaves = grown
    dist: dict[str, float] = {}
    for reg, prob in leaves:
        key = "".join(map(str, reg.accepted[::-1]))
        dist[key] = dist.get(key, 0.0) + prob
    return dist
