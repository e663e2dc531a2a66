"""Input validation helpers shared by every module.

All public entry points funnel their array arguments through these
checks so shape and finiteness errors surface early with a clear name.
"""

import numpy as np

from .errors import EmptyCloudError


def check_points(points, name="points", min_points=1):
    """Coerce to a float64 array of shape (N, 3) and validate it.

    Args:
        points: array-like of 3D coordinates, shape (N, 3).
        name: argument name used in error messages.
        min_points: smallest acceptable N.

    Returns:
        A contiguous float64 array of shape (N, 3).
    """
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"{name} must have shape (N, 3), got {arr.shape}")
    if arr.shape[0] == 0:
        raise EmptyCloudError(f"{name} contains no points")
    if arr.shape[0] < min_points:
        raise ValueError(f"{name} needs at least {min_points} points, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinite coordinates")
    return np.ascontiguousarray(arr)


def check_point(point, name="point"):
    """Coerce to a finite float64 array of shape (3,)."""
    arr = np.asarray(point, dtype=np.float64)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have shape (3,), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinite coordinates")
    return arr


def check_queries(queries, name="queries"):
    """Accept one point (3,) or a batch (M, 3); return ((M, 3), was_single)."""
    arr = np.asarray(queries, dtype=np.float64)
    if arr.shape == (3,):
        return arr[None, :].copy(), True
    if arr.ndim == 2 and arr.shape[1] == 3:
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{name} contains NaN or infinite coordinates")
        return arr.astype(np.float64, copy=True), False
    raise ValueError(f"{name} must have shape (3,) or (M, 3), got {arr.shape}")


def check_count(value, name, minimum=1, maximum=None):
    """Validate an integer count within [minimum, maximum]."""
    count = int(value)
    if count != value:
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if count < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {count}")
    if maximum is not None and count > maximum:
        raise ValueError(f"{name} must be <= {maximum}, got {count}")
    return count


def check_rng(rng):
    """Accept an int seed or a numpy Generator; return a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, (int, np.integer)):
        return np.random.default_rng(int(rng))
    raise TypeError(f"expected an int seed or numpy Generator, got {type(rng).__name__}")
