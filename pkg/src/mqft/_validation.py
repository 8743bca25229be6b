import numbers

import numpy as np
from sklearn.utils import check_array


def check_probability(value, name, *, open_low=False):
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    lo_ok = value > 0.0 if open_low else value >= 0.0
    if not (lo_ok and value <= 1.0):
        interval = "(0, 1]" if open_low else "[0, 1]"
        raise ValueError(f"{name} must lie in {interval}, got {value}")
    return float(value)


def check_positive_int(value, name, minimum=1):
    if not isinstance(value, numbers.Integral) or isinstance(value, bool):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_bit_matrix(X):
    """2-D array of 0/1 phase words, one word per row."""
    X = check_array(X, dtype=np.int64, ensure_2d=True)
    if np.any((X != 0) & (X != 1)):
        raise ValueError("phase words may only contain 0 and 1")
    return X


def check_1d(x, name, dtype=np.float64):
    arr = check_array(np.asarray(x).reshape(-1, 1) if np.ndim(x) == 1 else x, dtype=dtype)
    if arr.shape[1] != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr[:, 0]
