from __future__ import annotations

import numpy as np


def check_timestamps(timestamps, *, min_count: int = 0, name: str = "timestamps") -> np.ndarray:
    """Coerce to a sorted 1-D int64 array of nonnegative picosecond times."""
    arr = np.asarray(timestamps)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{name} contain non-finite values")
        arr = np.rint(arr)
    elif arr.dtype.kind not in "iu":
        raise TypeError(f"{name} must be numeric, got dtype {arr.dtype}")
    arr = arr.astype(np.int64, copy=False)
    if arr.size < min_count:
        raise ValueError(f"need at least {min_count} {name}, got {arr.size}")
    if arr.size and arr[0] < 0:
        raise ValueError(f"{name} must be nonnegative")
    if arr.size > 1 and np.any(np.diff(arr) < 0):
        raise ValueError(f"{name} must be sorted in time")
    return arr


def check_positive(value, name: str):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return value
