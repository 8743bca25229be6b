"""scikit-learn compatible wrappers.

* :class:`FringeFitter` -- regressor for the modulator fringe (visibility,
  half-wave voltage, offset).
* :class:`RunLengthErrorEstimator` -- per-qubit error probability and
  confidence bounds from trial run lengths.
* :class:`SerialMQFT` -- stateless transformer mapping phase words to the
  words the serial circuit recovers.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_1d, check_bit_matrix, check_positive_int, check_probability
from .core import PhaseWord
from .noise import NoiseParams, fit_fringe, fringe_fraction
from .pipeline import run_serial_mqft
from .stats import CONVENTIONS, TrialStats, bounds_from_trials, estimate_error_rate


class FringeFitter(RegressorMixin, BaseEstimator):
    """Fit ``A + B cos(pi V / v_pi + offset)`` to counts versus drive voltage.

    Parameters
    ----------
    grid : int
        Number of half-wave voltage candidates scanned before the nonlinear
        refinement.

    Attributes
    ----------
    visibility_, v_pi_, offset_, baseline_, amplitude_, residual_
    """

    def __init__(self, grid=2000):
        self.grid = grid

    def fit(self, X, y):
        check_positive_int(self.grid, "grid", minimum=10)
        voltages = check_1d(X, "X")
        counts = check_1d(y, "y")
        if voltages.size != counts.size:
            raise ValueError("X and y have different lengths")
        fit = fit_fringe(voltages, counts, grid=self.grid)
        self.visibility_ = fit.visibility
        self.v_pi_ = fit.v_pi
        self.offset_ = fit.offset
        self.baseline_ = fit.baseline
        self.amplitude_ = fit.amplitude
        self.residual_ = fit.residual
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "v_pi_")
        voltages = check_1d(X, "X")
        return 2.0 * self.baseline_ * fringe_fraction(voltages, self.visibility_, self.v_pi_, self.offset_)


class RunLengthErrorEstimator(BaseEstimator):
    """Error probability per qubit from first-error steps.

    ``fit(run_lengths, censored)``; when ``censored`` is omitted a trial is
    taken as censored iff its run length equals ``n_qubits``.
    """

    def __init__(self, n_qubits=None, alpha=0.05, convention="cumulative"):
        self.n_qubits = n_qubits
        self.alpha = alpha
        self.convention = convention

    def fit(self, run_lengths, censored=None):
        if self.convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}")
        if not 0.0 < self.alpha < 0.5:
            raise ValueError("alpha must lie in (0, 0.5)")
        lengths = check_1d(run_lengths, "run_lengths", dtype=np.int64)
        n = int(lengths.max()) if self.n_qubits is None else check_positive_int(self.n_qubits, "n_qubits")
        if censored is None:
            flags = lengths == n
        else:
            flags = check_1d(censored, "censored", dtype=bool)
        trials = TrialStats(lengths, flags, n)
        est = estimate_error_rate(trials)
        self.p_hat_ = est.p_censored
        self.p_hat_mean_ = est.p_mean
        self.all_censored_ = est.all_censored
        self.bounds_ = bounds_from_trials(trials, self.alpha, self.convention)
        self.n_trials_ = trials.n_trials
        self.n_qubits_ = n
        return self

    def success_probability(self, n_qubits=None):
        """Chance of a fully correct run under the fitted rate."""
        check_is_fitted(self, "p_hat_")
        n = self.n_qubits_ if n_qubits is None else n_qubits
        return (1.0 - self.p_hat_) ** n


class SerialMQFT(TransformerMixin, BaseEstimator):
    """Run each row of a 0/1 matrix through the serial circuit.

    ``transform`` returns the recovered words (``-1`` marks bits never
    measured when ``stop_at_first_error`` is set); ``records_`` keeps the
    full trial records of the last call.
    """

    def __init__(self, noise=None, random_state=None, stop_at_first_error=False):
        self.noise = noise
        self.random_state = random_state
        self.stop_at_first_error = stop_at_first_error

    def fit(self, X, y=None):
        X = check_bit_matrix(X)
        if self.noise is not None and not isinstance(self.noise, NoiseParams):
            raise TypeError("noise must be a NoiseParams instance or None")
        if self.noise is not None and self.noise.p_override is not None:
            check_probability(self.noise.p_override, "p_override")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_bit_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} bits per word, got {X.shape[1]}")
        rng = np.random.default_rng(self.random_state)
        self.records_ = [
            run_serial_mqft(PhaseWord(tuple(row)), self.noise, rng, stop_at_first_error=self.stop_at_first_error)
            for row in X
        ]
        return np.array([r.recovered for r in self.records_], dtype=np.int64)
