"""Input validation helpers shared across the package.

All validators raise ``ValueError`` with a message naming the offending
argument, so CLI and library callers get the same diagnostics.
"""

import numpy as np


def check_array(x, name, ndim=None, dtype=float):
    """Coerce to a numpy array and optionally enforce dimensionality."""
    arr = np.asarray(x, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    return arr


def check_finite(arr, name):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_positive(value, name):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


def check_in_range(value, name, low, high):
    if not (low <= value <= high):
        raise ValueError(f"{name} must be in [{low}, {high}], got {value}")
    return value
