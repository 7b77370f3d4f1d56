"""Input validation helpers used by every public entry point.

All numeric carriers are dense ``float64`` arrays. ``as_matrix`` is the
single funnel through which user-supplied data enters the library; the
other checks express preconditions that individual operations add on top.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeMismatch


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a 2-D float64 array and verify all entries are finite."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-D, got ndim={m.ndim}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeMismatch(f"{name} must be non-empty, got shape {m.shape}")
    check_finite(m, name)
    return m


def as_vector(a, name: str = "vector") -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 1:
        raise ShapeMismatch(f"{name} must be 1-D, got ndim={m.ndim}")
    check_finite(m, name)
    return m


def check_finite(a: np.ndarray, name: str = "array") -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains NaN/Inf entries")


def check_tall(m: np.ndarray, name: str = "matrix") -> None:
    if m.shape[0] < m.shape[1]:
        raise ShapeMismatch(
            f"{name} must have at least as many rows as columns, got {m.shape}"
        )


def check_same_shape(a: np.ndarray, b: np.ndarray, name: str = "operands") -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"{name} shapes differ: {a.shape} vs {b.shape}")


def check_orthonormal(q: np.ndarray, name: str = "factor", tol: float = 1e-8) -> None:
    gram = q.T @ q
    err = np.max(np.abs(gram - np.eye(q.shape[1])))
    if err > tol:
        raise ValueError(f"{name} is not orthonormal (max |QtQ - I| = {err:.3e})")


def seed_sequence(seed) -> np.random.SeedSequence:
    """Normalize an integer or SeedSequence into a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))
