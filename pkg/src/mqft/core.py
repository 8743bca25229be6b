"""Ideal serial measured-QFT primitives.

Phase words are binary fractions ``0.b1 b2 ... bn``.  The serial circuit
processes one control qubit per step; step ``k`` (1-based) carries the phase
``0.b_{n-k+1} ... b_n`` and therefore measures ``b_{n-k+1}``, so the word is
read least-significant bit first.

Rotation angles are kept as exact dyadic rationals ``numerator / 2**k`` and only
converted to radians when a gate is applied.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, NamedTuple, Sequence

import numpy as np

MAX_QUBITS = 4096
_SQRT_HALF = math.sqrt(0.5)
_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PhaseWord:
    """An n-bit binary fraction, most significant fractional bit first."""

    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if not bits:
            raise ValueError("a phase word needs at least one bit")
        if len(bits) > MAX_QUBITS:
            raise ValueError(f"phase words are limited to {MAX_QUBITS} bits, got {len(bits)}")
        if any(b not in (0, 1) for b in bits):
            raise ValueError("phase word bits must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def value(self) -> Fraction:
        return Fraction(self.as_int(), 1 << self.n)

    def as_int(self) -> int:
        return int(str(self), 2)

    def __len__(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return "".join(map(str, self.bits))

    @classmethod
    def from_string(cls, text: str) -> "PhaseWord":
        text = text.strip()
        if text.startswith("0."):
            text = text[2:]
        if not text or set(text) - {"0", "1"}:
            raise ValueError(f"not a binary phase word: {text!r}")
        return cls(tuple(int(c) for c in text))

    @classmethod
    def from_int(cls, value: int, n: int) -> "PhaseWord":
        if not 0 <= value < (1 << n):
            raise ValueError(f"{value} does not fit in {n} bits")
        return cls(tuple((value >> (n - 1 - i)) & 1 for i in range(n)))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "PhaseWord":
        return cls(tuple(int(b) for b in rng.integers(0, 2, size=n)))


class ControlQubitState(NamedTuple):
    amp0: complex
    amp1: complex

    def norm(self) -> float:
        return abs(self.amp0) ** 2 + abs(self.amp1) ** 2

    def as_array(self) -> np.ndarray:
        return np.array([self.amp0, self.amp1], dtype=complex)


class RotationCommand(NamedTuple):
    """Feedback rotation for step ``k``.

    ``numerator / 2**k`` is the applied angle in turns (after truncation) and
    ``exact_numerator / 2**k`` the untruncated one.  ``delta`` is the residual
    phase error in radians left by truncation.
    """

    k: int
    numerator: int
    exact_numerator: int
    m: int | None
    delta: float

    @property
    def phi(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.k)

    @property
    def exact_phi(self) -> Fraction:
        return Fraction(self.exact_numerator, 1 << self.k)

    @property
    def turns(self) -> float:
        return self.numerator / (1 << self.k)


def plus_state(turns: float) -> ControlQubitState:
    """``(|0> + exp(2 pi i turns)|1>)/sqrt(2)``."""
    return ControlQubitState(_SQRT_HALF, _SQRT_HALF * cmath.exp(1j * _TWO_PI * turns))


def step_phase(word: PhaseWord, k: int) -> Fraction:
    """Phase in turns carried by the control qubit processed at step ``k``."""
    n = word.n
    if not 1 <= k <= n:
        raise ValueError(f"step {k} outside 1..{n}")
    low = word.as_int() & ((1 << k) - 1)
    return Fraction(low, 1 << k)


def encode_input_states(word: PhaseWord) -> list[ControlQubitState]:
    """Control-qubit states in processing order (step 1 first)."""
    return [plus_state(float(step_phase(word, k))) for k in range(1, word.n + 1)]


def encode_phase_states(phi: float | Fraction, n: int) -> list[ControlQubitState]:
    """Same as :func:`encode_input_states` for an arbitrary phase ``phi``.

    Step ``k`` carries ``2**(n-k) * phi mod 1``.
    """
    if isinstance(phi, Fraction):
        return [plus_state(float((phi * (1 << (n - k))) % 1)) for k in range(1, n + 1)]
    return [plus_state(math.fmod(phi * 2.0 ** (n - k), 1.0)) for k in range(1, n + 1)]


def _command(k: int, numerator: int, m: int | None) -> RotationCommand:
    if m is None or k <= m:
        return RotationCommand(k, numerator, numerator, m, 0.0)
    shift = k - m
    kept = (numerator >> shift) << shift
    delta = _TWO_PI * ((numerator - kept) / (1 << k))
    return RotationCommand(k, kept, numerator, m, delta)


def rotation_angle(measured_bits: Sequence[int], k: int, m: int | None = None) -> RotationCommand:
    """Feedback angle for step ``k`` from the ``k-1`` known lower bits.

    ``measured_bits`` is ordered ``b_{n-k+2} ... b_n`` (the order they appear in
    the word), i.e. the reverse of the measurement order.  The angle is the
    binary fraction ``0.0 b_{n-k+2} ... b_n``; with ``m`` given, only its ``m``
    most significant fractional bits are kept.
    """
    if k < 1:
        raise ValueError("step index starts at 1")
    if len(measured_bits) != k - 1:
        raise ValueError(f"step {k} needs {k - 1} measured bits, got {len(measured_bits)}")
    if m is not None and m < 1:
        raise ValueError("truncation depth must be >= 1")
    numerator = 0
    for b in measured_bits:
        if b not in (0, 1):
            raise ValueError("measured bits must be 0 or 1")
        numerator = (numerator << 1) | b
    return _command(k, numerator, m)


def apply_rotation(
    state: ControlQubitState, cmd: RotationCommand, extra_delta: float = 0.0
) -> ControlQubitState:
    phase = -_TWO_PI * cmd.turns + extra_delta
    if phase == 0.0:
        return state
    return ControlQubitState(state.amp0, state.amp1 * cmath.exp(1j * phase))


def apply_hadamard(state: ControlQubitState) -> ControlQubitState:
    a, b = state.amp0, state.amp1
    return ControlQubitState((a + b) * _SQRT_HALF, (a - b) * _SQRT_HALF)


def rotated_control(turns: float, cmd: RotationCommand, extra_delta: float = 0.0) -> ControlQubitState:
    """``apply_hadamard(apply_rotation(plus_state(turns), cmd, extra_delta))``
    in one step: amplitudes ``(1 +- exp(i theta)) / 2``."""
    e = cmath.exp(1j * (_TWO_PI * (turns - cmd.turns) + extra_delta))
    return ControlQubitState(0.5 * (1.0 + e), 0.5 * (1.0 - e))


class FeedbackAngle:
    """Incremental form of :func:`rotation_angle` for long runs.

    Feeding back bit ``b`` measured at step ``k`` updates the numerator by
    ``b * 2**(k-1)``, which avoids rebuilding the angle from the bit history at
    every step.
    """

    def __init__(self, m: int | None = None):
        self.m = m
        self.k = 1
        self.numerator = 0

    def command(self) -> RotationCommand:
        return _command(self.k, self.numerator, self.m)

    def push(self, bit: int) -> None:
        if bit:
            self.numerator += 1 << (self.k - 1)
        self.k += 1


def iter_step_phases(word: PhaseWord) -> Iterator[tuple[int, float]]:
    """Yield ``(k, turns)`` for each step without materialising all states."""
    bits = word.bits
    n = len(bits)
    low = 0
    for k in range(1, n + 1):
        if bits[n - k]:
            low += 1 << (k - 1)
        yield k, low / (1 << k)


def serial_outcome_distribution(phi: float | Fraction | PhaseWord, n: int | None = None) -> dict[str, float]:
    """Exact distribution of recovered words from the ideal serial circuit.

    Every measurement is expanded into both branches, so this is deterministic
    and suitable as ground truth for small ``n``.  Keys are words ``b1...bn``.
    """
    if isinstance(phi, PhaseWord):
        n = phi.n if n is None else n
        phi = phi.value
    if n is None or not 1 <= n <= 24:
        raise ValueError("n must be given and lie in 1..24")
    states = encode_phase_states(phi, n)
    branches: list[tuple[tuple[int, ...], float]] = [((), 1.0)]
    for k in range(1, n + 1):
        grown = []
        for measured, prob in branches:
            cmd = rotation_angle(measured[::-1], k)
            out = apply_hadamard(apply_rotation(states[k - 1], cmd))
            p0 = abs(out.amp0) ** 2
            for bit, p in ((0, p0), (1, 1.0 - p0)):
                grown.append((measured + (bit,), prob * p))
        branches = grown
    return {"".join(map(str, measured[::-1])): p for measured, p in branches}
