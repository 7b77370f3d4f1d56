"""Synthetic task collections with prescribed similarity and conditioning.

A task collection is built around shared reference factors: each client's
bases are rotated away from the reference by a fixed perturbation radius
``beta`` (the sine of every principal angle), and each client's core gets a
log-spaced spectrum hitting the requested condition number exactly. Labels
are exact inner products with the assembled targets, split into one large
measurement batch and a sequence of small ones per client.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import BadBeta, ShapeMismatch
from .numkit import qr_thin, rand_gaussian, rand_orthonormal
from .validation import seed_sequence

_MAGIC = b"CLRA"
_VERSION = 1
_HEADER = struct.Struct("<4sIIIIIIIQ")  # magic, version, d, r, k, N, n, T, seed


def xi_from_beta(beta: float, r: int) -> float:
    """Similarity level implied by a perturbation radius: beta = sqrt(r(1-xi^2))."""
    return float(np.sqrt(max(0.0, 1.0 - beta * beta / r)))


def beta_from_xi(xi: float, r: int) -> float:
    return float(np.sqrt(r) * np.sqrt(max(0.0, 1.0 - xi * xi)))


@dataclass(frozen=True)
class TaskGenConfig:
    """Generator knobs. Supply exactly one of ``beta`` or ``xi``.

    ``beta`` is the subspace perturbation radius in [0, 1); ``xi`` the
    similarity level in (0, 1], converted via beta = sqrt(r (1 - xi^2)).
    ``kappa_target`` and ``sigma_min`` pin each core's spectrum.
    """

    d: int
    r: int
    k: int
    beta: float | None = None
    xi: float | None = None
    kappa_target: float = 1.0
    sigma_min: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if (self.beta is None) == (self.xi is None):
            raise ValueError("supply exactly one of beta or xi")
        if 2 * self.r > self.d:
            raise ValueError(f"need 2r <= d for the perturbation construction, got d={self.d}, r={self.r}")
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.kappa_target < 1.0:
            raise ValueError("kappa_target must be >= 1")
        if self.r == 1 and self.kappa_target != 1.0:
            raise ValueError("a 1x1 core cannot have condition number != 1")
        if self.sigma_min <= 0.0:
            raise ValueError("sigma_min must be positive")
        beta = self.effective_beta()
        if not 0.0 <= beta < 1.0:
            raise BadBeta(f"perturbation radius must lie in [0, 1), got {beta}")

    def effective_beta(self) -> float:
        if self.beta is not None:
            return float(self.beta)
        if not 0.0 < self.xi <= 1.0:
            raise ValueError(f"xi must lie in (0, 1], got {self.xi}")
        return beta_from_xi(self.xi, self.r)

    def effective_xi(self) -> float:
        if self.xi is not None:
            return float(self.xi)
        return xi_from_beta(self.beta, self.r)


@dataclass
class GroundTruth:
    """Reference factors, per-client bases and cores, assembled targets."""

    u_star: np.ndarray
    v_star: np.ndarray
    u_i: list[np.ndarray]
    v_i: list[np.ndarray]
    lambdas: list[np.ndarray]
    targets: list[np.ndarray]

    @property
    def k(self) -> int:
        return len(self.targets)


@dataclass
class Batch:
    """One measurement batch: stacked sensing matrices and their labels."""

    g: np.ndarray  # (m, d, d)
    y: np.ndarray  # (m,)


@dataclass(frozen=True)
class DatasetMeta:
    d: int
    r: int
    k: int
    N: int
    n: int
    T: int
    seed: int


@dataclass
class Dataset:
    large: list[Batch]              # one per client
    small: list[list[Batch]]        # [client][t]
    meta: DatasetMeta = field(repr=False)


def perturb_basis(u_ref: np.ndarray, beta: float, seed) -> np.ndarray:
    """Rotate every direction of ``u_ref`` by the angle with sine ``beta``.

    Returns ``u_ref * cos(theta) + W * sin(theta)`` where W is a seeded random
    orthonormal basis of an r-dimensional subspace orthogonal to col(u_ref),
    so all principal angles equal theta and the subspace distance to the
    reference is exactly ``beta``.
    """
    if not 0.0 <= beta < 1.0:
        raise BadBeta(f"beta must lie in [0, 1), got {beta}")
    d, r = u_ref.shape
    if 2 * r > d:
        raise ValueError(f"need 2r <= d, got d={d}, r={r}")
    if beta == 0.0:
        return u_ref.copy()
    w = rand_gaussian(d, r, seed)
    w -= u_ref @ (u_ref.T @ w)
    w = qr_thin(w)[0]
    cos_t = np.sqrt(1.0 - beta * beta)
    return u_ref * cos_t + w * beta


def make_ground_truth(cfg: TaskGenConfig) -> GroundTruth:
    """Draw a task collection matching ``cfg`` exactly.

    Reference factors are random orthonormal; every client basis sits at
    subspace distance ``beta`` from its reference (column and row sides
    perturbed independently); every core has the same log-spaced spectrum
    from ``sigma_min * kappa_target`` down to ``sigma_min``, rotated by
    random orthogonal factors.
    """
    beta = cfg.effective_beta()
    root = seed_sequence(cfg.seed)
    s_factors, s_perturb, s_cores = root.spawn(3)
    s_u, s_v = s_factors.spawn(2)
    u_star = rand_orthonormal(cfg.d, cfg.r, s_u)
    v_star = rand_orthonormal(cfg.d, cfg.r, s_v)

    spectrum = np.geomspace(cfg.sigma_min * cfg.kappa_target, cfg.sigma_min, cfg.r)
    perturb_seeds = s_perturb.spawn(2 * cfg.k)
    core_seeds = s_cores.spawn(2 * cfg.k)

    u_i, v_i, lambdas, targets = [], [], [], []
    for i in range(cfg.k):
        ui = perturb_basis(u_star, beta, perturb_seeds[2 * i])
        vi = perturb_basis(v_star, beta, perturb_seeds[2 * i + 1])
        q1 = rand_orthonormal(cfg.r, cfg.r, core_seeds[2 * i])
        q2 = rand_orthonormal(cfg.r, cfg.r, core_seeds[2 * i + 1])
        lam = q1 @ np.diag(spectrum) @ q2.T
        u_i.append(ui)
        v_i.append(vi)
        lambdas.append(lam)
        targets.append(ui @ lam @ vi.T)
    return GroundTruth(u_star, v_star, u_i, v_i, lambdas, targets)


def label_measurements(g: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Exact inner products <G_j, M> for a stack of sensing matrices."""
    return np.einsum("jab,ab->j", g, target)


def sample_dataset(gt: GroundTruth, N: int, n: int, T: int, seed: int) -> Dataset:
    """Draw the per-client measurement ensembles for ``gt``.

    Each client gets one large batch of N samples plus T small batches of n
    samples, all from independent forked streams, labeled noiselessly.
    """
    if min(N, n, T) < 1:
        raise ValueError("N, n and T must all be >= 1")
    d = gt.u_star.shape[0]
    r = gt.u_star.shape[1]
    k = gt.k
    client_seeds = seed_sequence(seed).spawn(k)
    large, small = [], []
    for i in range(k):
        streams = client_seeds[i].spawn(1 + T)
        g = _gaussian_stack(N, d, streams[0])
        large.append(Batch(g=g, y=label_measurements(g, gt.targets[i])))
        batches = []
        for t in range(T):
            g = _gaussian_stack(n, d, streams[1 + t])
            batches.append(Batch(g=g, y=label_measurements(g, gt.targets[i])))
        small.append(batches)
    return Dataset(large=large, small=small, meta=DatasetMeta(d, r, k, N, n, T, int(seed)))


def _gaussian_stack(m: int, d: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed_sequence(seed))
    return rng.standard_normal((m, d, d))


def save_dataset(ds: Dataset, path) -> None:
    """Write ``ds`` to the binary container (little-endian, bit-exact round trip).

    Layout: header (magic "CLRA", version, d, r, k, N, n, T as u32, seed u64)
    followed by row-major f64 payloads in client-major, batch-major order;
    within a batch the sensing matrices come first, then the labels.
    """
    m = ds.meta
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, m.d, m.r, m.k, m.N, m.n, m.T, m.seed))
        for i in range(m.k):
            _write_batch(fh, ds.large[i])
            for batch in ds.small[i]:
                _write_batch(fh, batch)


def _write_batch(fh, batch: Batch) -> None:
    fh.write(np.ascontiguousarray(batch.g, dtype="<f8").tobytes())
    fh.write(np.ascontiguousarray(batch.y, dtype="<f8").tobytes())


def load_dataset(path) -> Dataset:
    """Read a dataset written by ``save_dataset``."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ShapeMismatch("file too short for a dataset header")
        magic, version, d, r, k, N, n, T, seed = _HEADER.unpack(header)
        if magic != _MAGIC:
            raise ShapeMismatch(f"bad magic {magic!r}, expected {_MAGIC!r}")
        if version != _VERSION:
            raise ShapeMismatch(f"unsupported container version {version}")
        large, small = [], []
        for _ in range(k):
            large.append(_read_batch(fh, N, d))
            small.append([_read_batch(fh, n, d) for _ in range(T)])
    return Dataset(large=large, small=small, meta=DatasetMeta(d, r, k, N, n, T, seed))


def _read_batch(fh, m: int, d: int) -> Batch:
    g_bytes = fh.read(m * d * d * 8)
    y_bytes = fh.read(m * 8)
    if len(g_bytes) != m * d * d * 8 or len(y_bytes) != m * 8:
        raise ShapeMismatch("file truncated inside a batch payload")
    g = np.frombuffer(g_bytes, dtype="<f8").reshape(m, d, d).copy()
    y = np.frombuffer(y_bytes, dtype="<f8").copy()
    return Batch(g=g, y=y)
