"""Input validation helpers shared by the estimators, the library functions and the CLI."""
import numbers

import numpy as np


class ValidationError(ValueError):
    """Raised when user supplied data or parameters are unusable."""


# A2: both sample sizes must exceed 8 for the normal approximation.
MIN_SAMPLE_SIZE = 10


def check_finite_1d(values, name="values"):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValidationError(f"{name} must not be empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains NaN or infinite values")
    return arr


def check_pair(x, y, min_size=2):
    """Validate two equally long finite 1-d samples and return float64 copies."""
    x = check_finite_1d(x, "x")
    y = check_finite_1d(y, "y")
    if x.shape != y.shape:
        raise ValidationError(f"x and y lengths differ: {x.size} != {y.size}")
    if x.size < min_size:
        raise ValidationError(f"need at least {min_size} observations, got {x.size}")
    return x, y


def check_xy_matrix(X, min_size=2):
    """Accept an ``(n, 2)`` array-like and split it into its two columns."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != 2:
        raise ValidationError(f"expected an array of shape (n_samples, 2), got {X.shape}")
    return check_pair(X[:, 0], X[:, 1], min_size=min_size)


def check_sample_size(n, what="ucorr"):
    if n < MIN_SAMPLE_SIZE:
        raise ValidationError(
            f"{what} needs n >= {MIN_SAMPLE_SIZE} observations (assumption A2: "
            f"n and m must both exceed 8 for the null approximation), got n={n}"
        )


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValidationError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_fraction(value, name):
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name} must lie in [0, 1], got {value}")
    return value
