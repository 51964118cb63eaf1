"""Input checks shared by the functional API and the estimators."""

from __future__ import annotations

from typing import Sequence

import numpy as np

SEGMENTATION_MODES = ("both-ends", "forward-only")


def check_signal(x, min_length: int = 2) -> np.ndarray:
    """Return ``x`` as a finite 1-D float64 array or raise ``ValueError``."""
    samples = getattr(x, "samples", x)
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D signal, got shape {arr.shape}")
    if arr.size < min_length:
        raise ValueError(f"signal needs at least {min_length} samples, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("signal contains non-finite samples")
    return arr


def check_signals(X) -> list[np.ndarray]:
    """Accept one signal or a batch (2-D array or sequence of 1-D arrays)."""
    if hasattr(X, "samples"):
        return [check_signal(X)]
    if isinstance(X, np.ndarray):
        if X.ndim == 1:
            return [check_signal(X)]
        if X.ndim == 2:
            return [check_signal(row) for row in X]
        raise ValueError(f"expected 1-D or 2-D input, got {X.ndim}-D")
    items = list(X)
    if items and np.isscalar(items[0]):
        return [check_signal(items)]
    return [check_signal(item) for item in items]


def check_scales(scales: Sequence[int], order: int) -> np.ndarray:
    arr = np.asarray(scales)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("scales must be a non-empty 1-D sequence")
    if not np.all(np.equal(np.mod(arr, 1), 0)):
        raise ValueError("scales must be integers")
    arr = arr.astype(np.int64)
    if np.any(np.diff(arr) <= 0):
        raise ValueError("scales must be strictly increasing")
    if arr[0] < order + 2:
        raise ValueError(f"smallest scale {arr[0]} is below detrend order + 2 = {order + 2}")
    return arr


def check_q_grid(q: Sequence[float]) -> np.ndarray:
    arr = np.asarray(q, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("q grid must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(arr)):
        raise ValueError("q grid contains non-finite values")
    if np.any(np.diff(arr) <= 0):
        raise ValueError("q grid must be strictly increasing")
    return arr


def check_order(order) -> int:
    if int(order) != order or order < 0:
        raise ValueError(f"detrend order must be a non-negative integer, got {order!r}")
    return int(order)


def check_segmentation(mode: str) -> str:
    if mode not in SEGMENTATION_MODES:
        raise ValueError(f"segmentation must be one of {SEGMENTATION_MODES}, got {mode!r}")
    return mode
