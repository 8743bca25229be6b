import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mqft.core import ControlQubitState, PhaseWord, apply_hadamard, plus_state, rotation_angle
from mqft.noise import (
    FitError,
    NoiseParams,
    PulseKind,
    PulseOutcome,
    RetryCapExceeded,
    analytic_error_probability,
    fit_fringe,
    fringe_fraction,
    fringe_scan,
    measure_repeated,
    outcome_one_probability,
    phase_error_census,
    povm_outcome_probability,
    quantize_phase_dac,
    residual_phase_error,
    round_significant,
    sample_pulse,
)

S = 1 / math.sqrt(2)


# -- parameters --------------------------------------------------------------


def test_ideal_params():
    p = NoiseParams.ideal()
    assert p.is_ideal and p.p_signal == 1.0 and p.p_click == 1.0


def test_device_profile_values():
    p = NoiseParams.device_profile()
    assert (p.v, p.m, p.dac_digits, p.v_pi) == (0.98, 5, 3, 5.80)
    # 0.7 photons, 8.4 dB loss, 13% detector: about 1.3% of pulses click
    assert p.transmission == pytest.approx(10 ** -0.84)
    assert p.p_signal == pytest.approx(1 - math.exp(-0.7 * 10 ** -0.84 * 0.13), rel=1e-12)
    assert p.p_signal == pytest.approx(1.31e-2, abs=0.01e-2)
    assert not p.is_ideal


def test_device_profile_overrides():
    assert NoiseParams.device_profile(v=0.99).v == 0.99


@pytest.mark.parametrize(
    "kwargs",
    [
        {"v": 1.5},
        {"v": -0.1},
        {"m": 0},
        {"dac_digits": 0},
        {"v_pi": 0.0},
        {"mu": -1.0},
        {"eta_det": 1.2},
        {"dark_rate": 2.0},
        {"retry_cap": 0},
        {"p_override": 1.5},
        {"repeats": 0},
    ],
)
def test_params_reject_out_of_range(kwargs):
    with pytest.raises(ValueError):
        NoiseParams(**kwargs)


def test_pulse_outcome_invariant():
    PulseOutcome(PulseKind.NONE)
    PulseOutcome(PulseKind.SIGNAL, 1)
    with pytest.raises(ValueError):
        PulseOutcome(PulseKind.NONE, 0)
    with pytest.raises(ValueError):
        PulseOutcome(PulseKind.DARK)


# -- POVM ----------------------------------------------------------------------


def test_povm_limits():
    zero = ControlQubitState(1, 0)
    assert povm_outcome_probability(zero, 1.0) == 1.0
    assert povm_outcome_probability(zero, 0.0) == 0.5
    assert povm_outcome_probability(zero, 0.98) == pytest.approx(0.99)


@given(st.floats(0, 1), st.floats(-math.pi, math.pi))
def test_povm_error_matches_closed_form(v, delta):
    # |+> with residual phase delta, after H, read as 0 ideally
    state = apply_hadamard(ControlQubitState(S, S * complex(math.cos(delta), math.sin(delta))))
    err = 1.0 - povm_outcome_probability(state, v)
    assert err == pytest.approx(analytic_error_probability(v, math.cos(delta)), abs=1e-12)


@pytest.mark.parametrize(
    "v, cos_delta, expected, tol",
    [(0.99, 0.9936, 8.2e-3, 0.05e-3), (0.99, 0.98, 1.5e-2, 0.05e-2), (1.0, 1.0, 0.0, 1e-15)],
)
def test_analytic_error_values(v, cos_delta, expected, tol):
    assert abs(analytic_error_probability(v, cos_delta) - expected) <= tol


def test_outcome_probability_with_override_flips():
    zero = ControlQubitState(1, 0)
    p = NoiseParams(p_override=0.07)
    assert outcome_one_probability(zero, p) == pytest.approx(0.07)
    assert outcome_one_probability(ControlQubitState(0, 1), p) == pytest.approx(0.93)


# -- DAC -------------------------------------------------------------------------


@pytest.mark.parametrize("x, digits, expected", [(3.866666, 3, 3.87), (0.0123456, 2, 0.012), (0.0, 3, 0.0)])
def test_round_significant(x, digits, expected):
    assert round_significant(x, digits) == pytest.approx(expected)


def test_dac_one_third_turn():
    volts, delta = quantize_phase_dac(1 / 3, 5.80, 3)
    assert volts == pytest.approx(3.87)
    assert delta == pytest.approx(math.pi * (3.87 - 2 * 5.80 / 3) / 5.80)


def test_dac_exact_without_digits():
    volts, delta = quantize_phase_dac(0.25, 5.80, None)
    assert volts == pytest.approx(2.90) and delta == 0.0


def test_dac_rejects_out_of_range():
    with pytest.raises(ValueError):
        quantize_phase_dac(0.6, 5.80, 3)


def test_residual_subtracts_overshoot():
    cmd = rotation_angle([1] * 7, 8, m=5)
    _, dac = quantize_phase_dac(cmd.turns, 5.80, 3)
    assert residual_phase_error(cmd, 5.80, 3) == pytest.approx(cmd.delta - dac)


# -- photon model -------------------------------------------------------------


def test_sample_pulse_ideal_always_clicks():
    rng = np.random.default_rng(0)
    out = [sample_pulse(NoiseParams(), 0.0, rng) for _ in range(100)]
    assert all(o.kind is PulseKind.SIGNAL and o.bit == 0 for o in out)


def test_measure_repeated_matches_pulse_loop():
    # binomial/geometric shortcut against a plain per-pulse loop
    params = NoiseParams(mu=0.5, loss_db=3.0, eta_det=0.3, dark_rate=0.05, v=0.9)
    state = ControlQubitState(math.sqrt(0.8), math.sqrt(0.2))
    p_one = outcome_one_probability(state, params)
    rng = np.random.default_rng(1)
    n = 20000
    loop_ones = loop_pulses = 0
    for _ in range(n):
        while True:
            loop_pulses += 1
            o = sample_pulse(params, p_one, rng)
            if o.kind is not PulseKind.NONE:
                loop_ones += o.bit
                break
    fast_ones, fast_pulses = measure_repeated(state, params, np.random.default_rng(2), repeats=n)
    p_click = params.p_click
    mean_pulses = 1 / p_click
    sd_pulses = math.sqrt((1 - p_click) / p_click**2) * math.sqrt(n)
    assert abs(loop_pulses - n * mean_pulses) < 5 * sd_pulses
    assert abs(fast_pulses - n * mean_pulses) < 5 * sd_pulses
    q = (params.p_signal * p_one + (1 - params.p_signal) * params.dark_rate * 0.5) / p_click
    sd = math.sqrt(n * q * (1 - q))
    assert abs(loop_ones - n * q) < 5 * sd
    assert abs(fast_ones - n * q) < 5 * sd


def test_retry_cap():
    params = NoiseParams(mu=1e-6, eta_det=0.01, retry_cap=3)
    with pytest.raises(RetryCapExceeded):
        measure_repeated(plus_state(0), params, np.random.default_rng(0))


def test_monte_carlo_flip_rate_matches_closed_form():
    v, delta = 0.99, 0.3
    state = apply_hadamard(ControlQubitState(S, S * complex(math.cos(delta), math.sin(delta))))
    n = 10**6
    ones, _ = measure_repeated(state, NoiseParams(v=v), np.random.default_rng(7), repeats=n)
    p = analytic_error_probability(v, math.cos(delta))
    assert abs(ones / n - p) < 4 * math.sqrt(p * (1 - p) / n)


# -- census -------------------------------------------------------------------


def test_census_truncation_floor_and_mean():
    rng = np.random.default_rng(3)
    words = [PhaseWord.random(255, rng) for _ in range(40)]
    res = phase_error_census(words, m=5)
    assert res.n_rotations == 40 * 255
    assert res.min_abs_cos >= math.cos(math.pi / 16) - 1e-12
    # uniform truncation error on [0, pi/16): E cos = sin(pi/16)/(pi/16)
    assert res.mean_abs_cos == pytest.approx(math.sin(math.pi / 16) / (math.pi / 16), abs=2e-4)
    assert res.counts.sum() == res.n_rotations


def test_census_with_dac_stays_near_floor():
    rng = np.random.default_rng(4)
    words = [PhaseWord.random(255, rng) for _ in range(20)]
    res = phase_error_census(words, m=5, dac_digits=3)
    assert res.min_abs_cos > 0.975
    assert res.mean_abs_cos > 0.99


def test_census_untruncated_is_exact():
    res = phase_error_census([PhaseWord.from_string("1011011")], m=None)
    assert np.allclose(res.cos_delta, 1.0)


def test_census_needs_words():
    with pytest.raises(ValueError):
        phase_error_census([], m=5)


# -- fringe -------------------------------------------------------------------


VOLTS = np.linspace(0, 12, 49)


def test_fringe_fraction_extremes():
    f = fringe_fraction([0.0, 5.80], 0.98, 5.80)
    assert f == pytest.approx([0.99, 0.01])


def test_fit_noiseless_fringe_exact():
    counts = 1e5 * fringe_fraction(VOLTS, 0.98, 5.80, 0.2)
    fit = fit_fringe(VOLTS, counts)
    assert fit.visibility == pytest.approx(0.98, abs=1e-6)
    assert fit.v_pi == pytest.approx(5.80, abs=1e-6)
    assert fit.offset == pytest.approx(0.2, abs=1e-6)


@pytest.mark.parametrize("pulses, tol", [(10**3, 0.05), (10**5, 0.01)])
def test_fit_noisy_fringe(pulses, tol):
    counts = fringe_scan(0.98, 5.80, 0.0, VOLTS, pulses, np.random.default_rng(9))
    fit = fit_fringe(VOLTS, counts)
    assert abs(fit.visibility / 0.98 - 1) < tol
    assert abs(fit.v_pi / 5.80 - 1) < tol


def test_fit_rejects_short_scan():
    with pytest.raises(ValueError):
        fit_fringe(VOLTS[:5], VOLTS[:5])


def test_fit_reports_nonphysical():
    with pytest.raises(FitError) as info:
        fit_fringe(VOLTS, -1.0 - np.cos(VOLTS))
    assert "v_pi_seed" in info.value.diagnostics
