"""Deterministic dense linear-algebra kernels.

Every routine here is a pure function of its inputs with pinned sign
conventions, so factorizations are reproducible bit-for-bit across runs.
Matrices are plain row-major ``float64`` ndarrays; seeds are 64-bit ints
(or ``numpy.random.SeedSequence`` objects for forked streams).

Backed by ``numpy.linalg`` (LAPACK); the contracts below, not the backend,
are what the rest of the package relies on.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import RankDeficient, SingularSystem
from .validation import as_matrix, as_vector, check_tall, seed_sequence

log = logging.getLogger(__name__)

_RANK_RTOL = 1e-12          # sigma_min / sigma_max below this is rank deficient
_COND_LIMIT = 1e12          # unregularized solves refuse beyond this condition number


def qr_thin(m) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR factorization with a nonnegative R diagonal.

    Parameters
    ----------
    m : (d, r) array, d >= r, full column rank.

    Returns
    -------
    q : (d, r) array with orthonormal columns.
    r_factor : (r, r) upper-triangular array, diagonal >= 0.

    Raises
    ------
    RankDeficient
        If sigma_min(m) < 1e-12 * sigma_max(m).
    """
    m = as_matrix(m, "qr input")
    check_tall(m, "qr input")
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[-1] < _RANK_RTOL * sv[0] or sv[0] == 0.0:
        raise RankDeficient(
            f"column rank below {m.shape[1]}: sigma_min={sv[-1]:.3e}, sigma_max={sv[0]:.3e}"
        )
    q, r = np.linalg.qr(m, mode="reduced")
    # Sign fix: flip columns so every diagonal entry of R is nonnegative.
    flip = np.sign(np.diag(r))
    flip[flip == 0] = 1.0
    q = q * flip
    r = r * flip[:, None]
    return q, r


def svd_truncated(m, rank: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Best rank-``rank`` factorization ``u @ diag(sigma) @ v.T`` of ``m``.

    Columns of ``u`` and ``v`` are orthonormal; ``sigma`` is nonnegative and
    descending. The sign of each ``u`` column is fixed by making its
    largest-magnitude entry positive (``v`` flipped in tandem), so repeated
    calls and downstream subspace metrics are reproducible.
    """
    m = as_matrix(m, "svd input")
    if not 1 <= rank <= min(m.shape):
        raise ValueError(f"rank must be in [1, {min(m.shape)}], got {rank}")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    u = u[:, :rank].copy()
    s = s[:rank].copy()
    v = vt[:rank].T.copy()
    for j in range(rank):
        lead = u[np.argmax(np.abs(u[:, j])), j]
        if lead < 0:
            u[:, j] = -u[:, j]
            v[:, j] = -v[:, j]
    return u, s, v


def solve_ridge(gram, rhs, ridge: float = 0.0) -> np.ndarray:
    """Solve ``(gram + ridge * I) x = rhs`` for symmetric PSD ``gram``.

    With ``ridge == 0`` the system must be well conditioned; otherwise
    SingularSystem is raised and the caller decides how to regularize
    (see ``solve_ridge_with_fallback``).
    """
    gram = as_matrix(gram, "gram")
    rhs = as_vector(rhs, "rhs")
    n = gram.shape[0]
    if gram.shape[1] != n or rhs.shape[0] != n:
        raise ValueError(f"shape mismatch: gram {gram.shape}, rhs {rhs.shape}")
    scale = max(1.0, float(np.max(np.abs(gram))))
    asym = float(np.max(np.abs(gram - gram.T)))
    if asym > 1e-10 * scale:
        raise ValueError(f"gram is not symmetric (max asymmetry {asym:.3e})")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    if ridge == 0.0:
        ev = np.linalg.eigvalsh(gram)
        lo, hi = max(ev[0], 0.0), ev[-1]
        if hi <= 0.0 or lo < hi / _COND_LIMIT:
            raise SingularSystem(
                f"condition number exceeds {_COND_LIMIT:.0e} at ridge=0 "
                f"(eig range [{ev[0]:.3e}, {hi:.3e}])"
            )
        return np.linalg.solve(gram, rhs)
    return np.linalg.solve(gram + ridge * np.eye(n), rhs)


def solve_ridge_with_fallback(gram, rhs, ridge: float = 0.0) -> np.ndarray:
    """``solve_ridge`` that retries singular systems with a scaled ridge.

    The fallback ridge is ``1e-10 * trace(gram) / m``; the retry is logged,
    never silent.
    """
    try:
        return solve_ridge(gram, rhs, ridge)
    except SingularSystem:
        gram = as_matrix(gram, "gram")
        fallback = 1e-10 * float(np.trace(gram)) / gram.shape[0]
        if fallback <= 0.0:
            fallback = 1e-10
        log.warning(
            "normal equations singular at ridge=%g; retrying with ridge=%g",
            ridge, fallback,
        )
        return solve_ridge(gram, rhs, fallback)


def rand_gaussian(rows: int, cols: int, seed) -> np.ndarray:
    """(rows, cols) matrix of i.i.d. standard normals from the seeded stream."""
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    rng = np.random.default_rng(seed_sequence(seed))
    return rng.standard_normal((rows, cols))


def rand_orthonormal(d: int, r: int, seed) -> np.ndarray:
    """Haar-ish random (d, r) orthonormal basis: thin QR of a Gaussian draw."""
    if d < r:
        raise ValueError(f"need d >= r, got d={d}, r={r}")
    return qr_thin(rand_gaussian(d, r, seed))[0]
