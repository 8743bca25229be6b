"""Simulation of the measured quantum Fourier transform (MQFT).

Serial semiclassical phase estimation with a device noise model, majority
voting, run-length statistics and an exact statevector oracle.
"""

from .core import (
    ControlQubitState,
    PhaseWord,
    RotationCommand,
    apply_hadamard,
    apply_rotation,
    encode_input_states,
    rotated_control,
    rotation_angle,
    serial_outcome_distribution,
)
from .estimators import FringeFitter, RunLengthErrorEstimator, SerialMQFT
from .noise import NoiseParams, analytic_error_probability, povm_outcome_probability
from .pipeline import TrialRecord, run_serial_mqft
from .stats import TrialStats, confidence_bounds, estimate_error_rate, geometric_pmf, majority_vote_error

__version__ = "0.1.0"

__all__ = [
    "ControlQubitState",
    "FringeFitter",
    "NoiseParams",
    "PhaseWord",
    "RotationCommand",
    "RunLengthErrorEstimator",
    "SerialMQFT",
    "TrialRecord",
    "TrialStats",
    "analytic_error_probability",
    "apply_hadamard",
    "apply_rotation",
    "confidence_bounds",
    "encode_input_states",
    "estimate_error_rate",
    "geometric_pmf",
    "majority_vote_error",
    "povm_outcome_probability",
    "rotated_control",
    "rotation_angle",
    "run_serial_mqft",
    "serial_outcome_distribution",
]
