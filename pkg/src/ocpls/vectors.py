"""Flat parameter vectors and the elementwise algebra the optimizers are built on.

Every trainable quantity in this package (parameters, gradients, curvature
diagonals, moving averages) is a plain 1-D float64 numpy array, so the three
core operations here are all elementwise. Finiteness is checked explicitly at
module boundaries via ``validate_vector``; the algebra itself stays branch-free
so it can sit inside optimizer hot loops.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "as_param_vector",
    "validate_vector",
    "hadamard",
    "elementwise_pow",
    "scale_add",
]


def as_param_vector(values) -> np.ndarray:
    """Coerce ``values`` to a contiguous 1-D float64 array (copies only if needed)."""
    v = np.ascontiguousarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"parameter vector must be 1-D, got shape {v.shape}")
    return v


def validate_vector(v: np.ndarray, name: str = "vector") -> np.ndarray:
    """Reject NaN or infinite entries. Returns the input unchanged."""
    if not np.all(np.isfinite(v)):
        bad = int(np.flatnonzero(~np.isfinite(np.atleast_1d(v)))[0])
        raise ValueError(f"{name} has a non-finite entry at index {bad}")
    return v


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise product of two equal-length vectors."""
    _check_same_shape(a, b)
    return a * b


def elementwise_pow(a: np.ndarray, n: int) -> np.ndarray:
    """Elementwise integer power a**n with n >= 0. n = 0 gives the all-ones vector."""
    if n < 0 or n != int(n):
        raise ValueError(f"exponent must be a nonnegative integer, got {n!r}")
    return a ** int(n)


def scale_add(a: np.ndarray, s: float, b: np.ndarray) -> np.ndarray:
    """a + s * b, the fused update used for parameter steps."""
    _check_same_shape(a, b)
    return a + s * b
