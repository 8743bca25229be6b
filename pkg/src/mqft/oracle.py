"""Exact statevector oracle for the three equivalent MQFT circuit forms.

Qubit ``q`` (0-based) of an ``n``-qubit input holds the factor
``(|0> + exp(2 pi i 2**(n-1-q) phi)|1>)/sqrt(2)``, i.e. qubit 0 is the most
significant bit of the computational index.  The inverse QFT therefore reads
``b_{n-q}`` from qubit ``q``; :func:`reading_to_word` reverses a reading into
the word ``b1..bn``.

Measurements are expanded into both branches exactly.  A measured qubit is
projected out of its branch vector, so the total number of stored amplitudes
never exceeds ``2**n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

MAX_ORACLE_QUBITS = 14
_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)


@dataclass(frozen=True)
class Hadamard:
    qubit: int


@dataclass(frozen=True)
class ControlledPhase:
    control: int
    target: int
    turns: Fraction


@dataclass(frozen=True)
class Measure:
    qubit: int


@dataclass(frozen=True)
class ClassicalPhase:
    """Phase ``exp(2 pi i sum(bit_q * turns_q))`` on ``|1>`` of ``target``."""

    target: int
    terms: tuple[tuple[int, Fraction], ...]

    def turns(self, measured: dict[int, int]) -> Fraction:
        return sum((t for q, t in self.terms if measured[q]), Fraction(0))


Gate = Union[Hadamard, ControlledPhase, Measure, ClassicalPhase]


@dataclass(frozen=True)
class CircuitSpec:
    n: int
    gates: tuple[Gate, ...]

    def __post_init__(self):
        _check_n(self.n)
        measured: set[int] = set()
        for g in self.gates:
            for q in _qubits(g):
                if not 0 <= q < self.n:
                    raise ValueError(f"qubit {q} out of range for n={self.n}")
            if isinstance(g, ClassicalPhase):
                missing = {q for q, _ in g.terms} - measured
                if missing:
                    raise ValueError(f"classical phase uses unmeasured qubits {sorted(missing)}")
            if isinstance(g, Measure):
                if g.qubit in measured:
                    raise ValueError(f"qubit {g.qubit} measured twice")
                measured.add(g.qubit)
            elif _acts_on(g) & measured:
                raise ValueError(f"{g} acts on an already measured qubit")

    def count(self, kind: type) -> int:
        return sum(isinstance(g, kind) for g in self.gates)


def _qubits(g: Gate) -> set[int]:
    if isinstance(g, ControlledPhase):
        return {g.control, g.target}
    if isinstance(g, ClassicalPhase):
        return {g.target} | {q for q, _ in g.terms}
    return {g.qubit}


def _acts_on(g: Gate) -> set[int]:
    if isinstance(g, ControlledPhase):
        return {g.control, g.target}
    if isinstance(g, ClassicalPhase):
        return {g.target}
    return {g.qubit}


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_ORACLE_QUBITS:
        raise ValueError(f"oracle supports 1..{MAX_ORACLE_QUBITS} qubits, got {n}")


def build_qft_circuit(n: int) -> CircuitSpec:
    """Inverse QFT with controlled phases, all measurements at the end."""
    _check_n(n)
    gates: list[Gate] = []
    for target in range(n):
        for control in range(target):
            gates.append(ControlledPhase(control, target, -Fraction(1, 2 ** (target - control + 1))))
        gates.append(Hadamard(target))
    gates.extend(Measure(q) for q in range(n))
    return CircuitSpec(n, tuple(gates))


def build_semiclassical_circuit(n: int) -> CircuitSpec:
    """Each controlled phase replaced by measure-then-classical-phase."""
    _check_n(n)
    gates: list[Gate] = []
    for target in range(n):
        if target:
            terms = tuple((c, -Fraction(1, 2 ** (target - c + 1))) for c in range(target))
            gates.append(ClassicalPhase(target, terms))
        gates.append(Hadamard(target))
        gates.append(Measure(target))
    return CircuitSpec(n, tuple(gates))


def product_input_state(phi: float | Fraction, n: int) -> np.ndarray:
    """Control register after the controlled powers of U, as a ``2**n`` vector."""
    _check_n(n)
    state = np.ones(1, dtype=complex)
    for q in range(n):
        if isinstance(phi, Fraction):
            turns = float((phi * 2 ** (n - 1 - q)) % 1)
        else:
            turns = math.fmod(phi * 2.0 ** (n - 1 - q), 1.0)
        factor = np.array([1.0, np.exp(2j * np.pi * turns)]) / math.sqrt(2.0)
        state = np.kron(state, factor)
    return state


class _Branch:
    __slots__ = ("psi", "axes", "measured")

    def __init__(self, psi: np.ndarray, axes: list[int], measured: dict[int, int]):
        self.psi = psi  # unnormalised, one tensor axis per live qubit
        self.axes = axes  # qubit label of each tensor axis
        self.measured = measured


def _phase_on_one(psi: np.ndarray, axis: int, turns: float) -> np.ndarray:
    psi = psi.copy()
    idx = [slice(None)] * psi.ndim
    idx[axis] = 1
    psi[tuple(idx)] *= np.exp(2j * np.pi * turns)
    return psi


def outcome_distribution(circuit: CircuitSpec, input_state: np.ndarray) -> dict[str, float]:
    """Exact probabilities of every measurement record.

    Keys are readings in qubit order ``q0 q1 ...`` over the measured qubits.
    """
    n = circuit.n
    vec = np.asarray(input_state, dtype=complex).reshape(-1)
    if vec.size != 2**n:
        raise ValueError(f"input has {vec.size} amplitudes, circuit needs {2 ** n}")
    if abs(np.vdot(vec, vec).real - 1.0) > 1e-10:
        raise ValueError("input state is not normalised")
    branches = [_Branch(vec.reshape((2,) * n), list(range(n)), {})]
    for gate in circuit.gates:
        if isinstance(gate, Measure):
            grown = []
            for br in branches:
                ax = br.axes.index(gate.qubit)
                rest = br.axes[:ax] + br.axes[ax + 1:]
                for bit in (0, 1):
                    part = np.take(br.psi, bit, axis=ax)
                    grown.append(_Branch(part, rest, {**br.measured, gate.qubit: bit}))
            branches = grown
            continue
        for br in branches:
            if isinstance(gate, Hadamard):
                ax = br.axes.index(gate.qubit)
                br.psi = np.moveaxis(np.tensordot(_H, br.psi, axes=([1], [ax])), 0, ax)
            elif isinstance(gate, ControlledPhase):
                c, t = br.axes.index(gate.control), br.axes.index(gate.target)
                psi = br.psi.copy()
                idx = [slice(None)] * psi.ndim
                idx[c] = 1
                idx[t] = 1
                psi[tuple(idx)] *= np.exp(2j * np.pi * float(gate.turns))
                br.psi = psi
            elif isinstance(gate, ClassicalPhase):
                turns = gate.turns(br.measured)
                if turns:
                    br.psi = _phase_on_one(br.psi, br.axes.index(gate.target), float(turns))
            else:
                raise TypeError(f"unsupported gate {gate!r}")
    measured_qubits = sorted({q for g in circuit.gates if isinstance(g, Measure) for q in [g.qubit]})
    dist: dict[str, float] = {}
    for br in branches:
        key = "".join(str(br.measured[q]) for q in measured_qubits)
        dist[key] = dist.get(key, 0.0) + float(np.vdot(br.psi, br.psi).real)
    return dist


def reading_to_word(reading: str) -> str:
    return reading[::-1]


def as_words(dist: dict[str, float]) -> dict[str, float]:
    return {reading_to_word(k): v for k, v in dist.items()}


def total_variation(d1: dict[str, float], d2: dict[str, float]) -> float:
    keys = set(d1) | set(d2)
    return 0.5 * math.fsum(abs(d1.get(k, 0.0) - d2.get(k, 0.0)) for k in keys)


def state_norm(circuit: CircuitSpec, input_state: np.ndarray) -> float:
    """Total squared norm over all branches after running ``circuit``."""
    return math.fsum(outcome_distribution(circuit, input_state).values())
