"""Serial MQFT trial runner with optional device noise and majority voting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import FeedbackAngle, PhaseWord, iter_step_phases, rotated_control
from .noise import (
    NoiseParams,
    RetryCapExceeded,
    measure_repeated,
    outcome_one_probability,
    quantize_phase_dac,
)


@dataclass
class TrialRecord:
    """Result of one serial run.

    ``run_length`` is the 1-based step at which the first wrong bit was
    produced, or ``n`` with ``censored=True`` when every bit was right.
    ``recovered`` holds the output word ``b1..bn``; when the run stopped early
    the unmeasured positions are ``-1``.
    """

    truth: PhaseWord
    recovered: tuple[int, ...]
    run_length: int
    censored: bool
    errors: int = 0
    pulses: int = 0
    ties: int = 0
    aborted: bool = False
    diagnostic: str = ""
    steps_run: int = 0

    @property
    def n(self) -> int:
        return self.truth.n

    @property
    def correct_bits(self) -> int:
        """Bits transformed correctly before the first error."""
        return self.n if self.censored else self.run_length - 1

    def to_dict(self, include_bits: bool = False) -> dict:
        out = {
            "run_length": self.run_length,
            "censored": self.censored,
            "errors": self.errors,
            "pulses": self.pulses,
            "ties": self.ties,
            "aborted": self.aborted,
        }
        if self.diagnostic:
            out["diagnostic"] = self.diagnostic
        if include_bits:
            out["truth"] = str(self.truth)
            out["recovered"] = "".join("x" if b < 0 else str(b) for b in self.recovered)
        return out


def run_serial_mqft(
    word: PhaseWord,
    noise: NoiseParams | None = None,
    rng: np.random.Generator | int | None = None,
    *,
    stop_at_first_error: bool = False,
    extra_delta: Callable[[int, np.random.Generator], float] | None = None,
) -> TrialRecord:
    """Run the serial circuit on ``word`` and compare the output to it.

    At step ``k`` the control state for ``0.b_{n-k+1}..b_n`` is rotated by the
    angle built from the bits measured so far, passed through a Hadamard and
    measured ``noise.repeats`` times; the majority decides the bit (a tie is
    resolved by a coin flip for feedback and always counted as an error).
    ``extra_delta(k, rng)`` injects an additional phase error in radians.
    """
    noise = NoiseParams.ideal() if noise is None else noise
    rng = np.random.default_rng(rng)
    n = word.n
    bits = word.bits
    repeats = noise.repeats
    # a direct flip probability stands in for visibility and phase errors alike
    bypass = noise.p_override is not None
    angle = FeedbackAngle(None if bypass else noise.m)
    recovered = [-1] * n
    run_length = 0
    errors = ties = pulses = 0
    # without a photon model every pulse clicks, so one uniform per shot suffices
    uniforms = None
    if noise.mu is None and noise.dark_rate == 0.0:
        uniforms = rng.random((n, repeats)).tolist() if repeats > 1 else rng.random(n).tolist()
    k = 0
    for k, turns in iter_step_phases(word):
        cmd = angle.command()
        extra = 0.0
        if noise.dac_digits is not None and not bypass:
            extra -= quantize_phase_dac(cmd.turns, noise.v_pi, noise.dac_digits)[1]
        if extra_delta is not None:
            extra += extra_delta(k, rng)
        state = rotated_control(turns, cmd, extra)
        if uniforms is not None:
            p1 = outcome_one_probability(state, noise)
            ones = sum(u < p1 for u in uniforms[k - 1]) if repeats > 1 else int(uniforms[k - 1] < p1)
            used = repeats
        else:
            try:
                ones, used = measure_repeated(state, noise, rng, repeats)
            except RetryCapExceeded as exc:
                return TrialRecord(
                    word, tuple(recovered), run_length or k, False, errors, pulses + exc.pulses,
                    ties, aborted=True, diagnostic=f"step {k}: {exc}", steps_run=k,
                )
        pulses += used
        truth = bits[n - k]
        if 2 * ones == repeats:
            ties += 1
            bit = int(rng.integers(0, 2))
            wrong = True
        else:
            bit = int(2 * ones > repeats)
            wrong = bit != truth
        recovered[n - k] = bit
        if wrong:
            errors += 1
            if not run_length:
                run_length = k
                if stop_at_first_error:
                    break
        angle.push(bit)
    censored = run_length == 0
    return TrialRecord(
        word, tuple(recovered), n if censored else run_length, censored,
        errors, pulses, ties, steps_run=k,
    )
