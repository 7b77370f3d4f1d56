"""Subspace distances, similarity scores, conditioning, reconstruction error.

The evaluation vocabulary for everything else in the package. All scores
are computed from orthonormalized bases, so callers may pass raw factor
products; spans, not representatives, are what gets measured.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAverage
from .numkit import qr_thin, svd_truncated
from .validation import as_matrix, check_same_shape

_POWER_CAP = 1000
_POWER_RTOL = 1e-10


@dataclass(frozen=True)
class ConditioningReport:
    """Worst-case task condition number and alignment ratio, both >= 1."""

    kappa: float
    gamma: float


def spectral_norm(m) -> float:
    """Largest singular value via deterministic power iteration.

    Runs on the smaller Gram side with an all-ones start vector, a 1e-10
    relative tolerance and a 1000-iteration cap, so repeated calls agree
    bit-for-bit.
    """
    m = as_matrix(m, "spectral_norm input")
    gram = m.T @ m if m.shape[1] <= m.shape[0] else m @ m.T
    n = gram.shape[0]
    v = np.full(n, 1.0 / np.sqrt(n))
    sigma = 0.0
    for it in range(_POWER_CAP):
        w = gram @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            if it == 0 and np.any(gram != 0.0):
                # start vector fell in the null space; restart with a ramp,
                # still deterministic
                v = np.arange(1.0, n + 1.0)
                v /= np.linalg.norm(v)
                continue
            return 0.0
        v = w / norm
        new_sigma = float(np.sqrt(v @ (gram @ v)))
        if abs(new_sigma - sigma) <= _POWER_RTOL * max(new_sigma, 1e-300):
            return new_sigma
        sigma = new_sigma
    return sigma


def _orthonormal_basis(x, name: str) -> np.ndarray:
    return qr_thin(as_matrix(x, name))[0]


def subspace_dist(x1, x2) -> float:
    """Sine of the largest principal angle between the column spans.

    Equals ``||(I - Q1 Q1^T) Q2||_2`` for orthonormal bases Q1, Q2 of the
    two spans. Evaluated in both argument orders and reduced with ``max``
    so the result is exactly symmetric.
    """
    q1 = _orthonormal_basis(x1, "x1")
    q2 = _orthonormal_basis(x2, "x2")
    if q1.shape != q2.shape:
        raise ValueError(f"inputs must agree in shape, got {q1.shape} vs {q2.shape}")
    d12 = spectral_norm(q2 - q1 @ (q1.T @ q2))
    d21 = spectral_norm(q1 - q2 @ (q2.T @ q1))
    return min(1.0, max(d12, d21))


def subspace_similarity(u1, u2) -> float:
    """Root-mean-square cosine of principal angles: ||Q1^T Q2||_F / sqrt(r)."""
    q1 = _orthonormal_basis(u1, "u1")
    q2 = _orthonormal_basis(u2, "u2")
    if q1.shape != q2.shape:
        raise ValueError(f"inputs must agree in shape, got {q1.shape} vs {q2.shape}")
    r = q1.shape[1]
    return min(1.0, float(np.linalg.norm(q1.T @ q2, "fro")) / np.sqrt(r))


def task_similarity_xi(gt) -> float:
    """Largest xi lower-bounding all pairwise column and row similarities.

    Bases are taken from the rank-r SVD of each stored target matrix, so the
    score reflects the targets themselves rather than any particular
    factorization.
    """
    targets = gt.targets
    k = len(targets)
    if k < 2:
        raise ValueError("task similarity needs at least two tasks")
    r = gt.lambdas[0].shape[0]
    cols, rows = [], []
    for m in targets:
        u, _, v = svd_truncated(m, r)
        cols.append(u)
        rows.append(v)
    xi = 1.0
    for i in range(k):
        for j in range(i + 1, k):
            xi = min(
                xi,
                subspace_similarity(cols[i], cols[j]),
                subspace_similarity(rows[i], rows[j]),
            )
    return xi


def conditioning(targets, r: int) -> ConditioningReport:
    """kappa = max sigma_1 / min sigma_r over tasks; gamma scales by the average."""
    targets = [as_matrix(m, f"target {i}") for i, m in enumerate(targets)]
    top = []
    bottom = []
    for m in targets:
        sigma = svd_truncated(m, r)[1]
        top.append(sigma[0])
        bottom.append(sigma[-1])
    mean = sum(targets) / len(targets)
    sigma_r_mean = svd_truncated(mean, r)[1][-1]
    if sigma_r_mean < 1e-14:
        raise DegenerateAverage(
            f"sigma_r of the task average is {sigma_r_mean:.3e}; gamma undefined"
        )
    return ConditioningReport(
        kappa=max(top) / min(bottom),
        gamma=max(top) / sigma_r_mean,
    )


def reconstruction_error(u, lambda_i, v, m_star) -> float:
    """Spectral norm of ``u @ lambda_i @ v.T - m_star``."""
    u = as_matrix(u, "u")
    lam = as_matrix(lambda_i, "lambda_i")
    v = as_matrix(v, "v")
    m_star = as_matrix(m_star, "m_star")
    approx = u @ lam @ v.T
    check_same_shape(approx, m_star, "reconstruction operands")
    return spectral_norm(approx - m_star)


def similarity_mean(values, weights=None) -> float:
    """Weighted mean of similarity scores, e.g. across a stack of matrices."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("values must be a non-empty 1-D sequence")
    if weights is None:
        return float(values.mean())
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != values.shape or weights.sum() <= 0:
        raise ValueError("weights must match values and have positive total")
    return float((values * weights).sum() / weights.sum())
