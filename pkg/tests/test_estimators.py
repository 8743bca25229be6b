import numpy as np
import pytest
from sklearn.base import clone

from mqft.estimators import FringeFitter, RunLengthErrorEstimator, SerialMQFT
from mqft.noise import NoiseParams, fringe_fraction, fringe_scan
from mqft.stats import p_max_bound


@pytest.mark.parametrize(
    "est, params",
    [
        (FringeFitter(grid=500), {"grid": 500}),
        (RunLengthErrorEstimator(n_qubits=10, alpha=0.1), {"n_qubits": 10, "alpha": 0.1, "convention": "cumulative"}),
        (SerialMQFT(random_state=3), {"noise": None, "random_state": 3, "stop_at_first_error": False}),
    ],
)
def test_get_params_and_clone(est, params):
    assert est.get_params() == params
    twin = clone(est)
    assert twin.get_params() == params and twin is not est


def test_fringe_fitter_recovers_parameters():
    volts = np.linspace(0, 12, 49)
    counts = fringe_scan(0.98, 5.80, 0.0, volts, 10**5, np.random.default_rng(0))
    model = FringeFitter().fit(volts, counts)
    assert model.visibility_ == pytest.approx(0.98, rel=0.01)
    assert model.v_pi_ == pytest.approx(5.80, rel=0.01)
    pred = model.predict(volts)
    np.testing.assert_allclose(pred, 1e5 * fringe_fraction(volts, 0.98, 5.80), rtol=0.05, atol=500)
    assert model.score(volts, counts) > 0.999


def test_fringe_fitter_errors():
    with pytest.raises(ValueError):
        FringeFitter().fit(np.arange(10.0), np.arange(9.0))
    with pytest.raises(ValueError):
        FringeFitter(grid=2).fit(np.arange(10.0), np.arange(10.0))
    with pytest.raises(Exception):
        FringeFitter().predict(np.arange(3.0))


def test_run_length_estimator():
    est = RunLengthErrorEstimator(n_qubits=10).fit([2, 4, 10], [False, False, True])
    assert est.p_hat_ == pytest.approx(2 / 16)
    assert est.p_hat_mean_ == pytest.approx(3 / 16)
    assert est.n_trials_ == 3
    assert est.bounds_[1] == pytest.approx(p_max_bound(10, 1, 3))
    assert est.success_probability() == pytest.approx((1 - 2 / 16) ** 10)


def test_run_length_estimator_infers_censoring():
    est = RunLengthErrorEstimator().fit([5, 8, 8])
    assert est.n_qubits_ == 8 and est.p_hat_ == pytest.approx(1 / 21)


@pytest.mark.parametrize("kwargs", [{"alpha": 0.7}, {"convention": "x"}])
def test_run_length_estimator_rejects(kwargs):
    with pytest.raises(ValueError):
        RunLengthErrorEstimator(**kwargs).fit([1, 2])


def test_serial_transformer_ideal():
    X = np.random.default_rng(1).integers(0, 2, size=(20, 30))
    out = SerialMQFT().fit_transform(X)
    np.testing.assert_array_equal(out, X)


def test_serial_transformer_noisy_reproducible():
    X = np.random.default_rng(2).integers(0, 2, size=(10, 40))
    model = SerialMQFT(noise=NoiseParams(p_override=0.1), random_state=4, stop_at_first_error=True)
    a = model.fit_transform(X)
    b = clone(model).fit_transform(X)
    np.testing.assert_array_equal(a, b)
    assert (a == -1).any()
    assert len(model.records_) == 10


def test_serial_transformer_checks():
    with pytest.raises(ValueError):
        SerialMQFT().fit(np.array([[0, 2]]))
    model = SerialMQFT().fit(np.zeros((2, 4), dtype=int))
    with pytest.raises(ValueError):
        model.transform(np.zeros((2, 5), dtype=int))
    with pytest.raises(TypeError):
        SerialMQFT(noise="device").fit(np.zeros((1, 3), dtype=int))
