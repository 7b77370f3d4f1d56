"""Collaborative alternating minimization for shared-factor matrix sensing.

The solver recovers shared column/row factors U, V and per-client cores
from linear Gaussian measurements: spectral initialization from the pooled
large batches, then alternating rounds of per-client core least squares on
small batches and pooled factor least squares on the large batches, with a
thin QR re-orthonormalization after every factor update.

``CoAltMin`` wraps the functional pipeline in a scikit-learn style
estimator so runs compose with the usual get_params/set_params tooling.
"""

from __future__ import annotations

import base64
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .errors import ColoraError
from .metrics import reconstruction_error, subspace_dist
from .numkit import qr_thin, solve_ridge, solve_ridge_with_fallback, svd_truncated
from .taskgen import Batch, Dataset, GroundTruth
from .validation import check_orthonormal

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    """Iteration budget and solve policy for one run.

    ``iterations`` must not exceed the number of small batches per client
    unless ``single_client_fast_path`` is set, in which case core updates
    reuse the large batch (valid for one client only). ``sequential_uv``
    switches the left-factor update to use the freshly computed right
    factor instead of the previous one. ``refit_lambda`` appends one extra
    core solve on the large batches against the final factors.
    """

    iterations: int = 25
    ridge: float = 0.0
    single_client_fast_path: bool = False
    record_history: bool = True
    sequential_uv: bool = False
    refit_lambda: bool = False

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")


@dataclass
class HistoryRecord:
    """Snapshot after ``t`` completed iterations.

    ``loss`` is the pooled large-batch squared loss evaluated with the
    iteration's freshly solved cores against the factors they were solved
    for (the pre-update factors). Distances and the reconstruction maximum
    are filled only when ground truth was supplied for tracing.
    """

    t: int
    dist_u: float | None
    dist_v: float | None
    max_recon: float | None
    loss: float


@dataclass
class SolverState:
    u: np.ndarray
    v: np.ndarray
    lambdas: list[np.ndarray]
    t: int
    history: list[HistoryRecord] = field(default_factory=list)

    def to_json(self) -> str:
        """Serialize dims, iteration count, factor payloads and history."""
        d, r = self.u.shape
        doc = {
            "d": d,
            "r": r,
            "k": len(self.lambdas),
            "t": self.t,
            "u": _encode(self.u),
            "v": _encode(self.v),
            "lambdas": [_encode(l) for l in self.lambdas],
            "history": [
                {
                    "t": h.t,
                    "dist_u": h.dist_u,
                    "dist_v": h.dist_v,
                    "max_recon": h.max_recon,
                    "loss": h.loss,
                }
                for h in self.history
            ],
        }
        return json.dumps(doc)


def _encode(a: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii")


def _decode(text: str, shape: tuple[int, ...]) -> np.ndarray:
    return np.frombuffer(base64.b64decode(text), dtype="<f8").reshape(shape).copy()


def solver_state_from_json(text: str) -> SolverState:
    doc = json.loads(text)
    d, r, k = doc["d"], doc["r"], doc["k"]
    return SolverState(
        u=_decode(doc["u"], (d, r)),
        v=_decode(doc["v"], (d, r)),
        lambdas=[_decode(l, (r, r)) for l in doc["lambdas"]],
        t=doc["t"],
        history=[HistoryRecord(**h) for h in doc["history"]],
    )


def init_spectral(ds: Dataset, r: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rank-r SVD factors of the label-weighted mean of all large batches.

    Accumulation runs in fixed client-major order; the estimate is
    (1/kN) * sum_ij y_ij G_ij, whose expectation is the task average.
    """
    if not ds.large:
        raise ValueError("dataset has no large batches")
    d = ds.large[0].g.shape[1]
    acc = np.zeros((d, d))
    total = 0
    for batch in ds.large:
        acc += np.einsum("j,jab->ab", batch.y, batch.g)
        total += batch.y.shape[0]
    acc /= total
    u, sigma, v = svd_truncated(acc, r)
    return u, np.diag(sigma), v


def _solve(gram, rhs, ridge, on_singular):
    if on_singular == "fallback":
        return solve_ridge_with_fallback(gram, rhs, ridge)
    return solve_ridge(gram, rhs, ridge)


def lambda_step(u, v, batch: Batch, ridge: float = 0.0, on_singular: str = "raise") -> np.ndarray:
    """Least-squares core for fixed factors on one batch.

    Minimizes sum_j (y_j - <G_j, u L v^T>)^2 over the r-by-r core L via the
    normal equations of the design rows vec(u^T G_j v).
    """
    r = u.shape[1]
    design = np.matmul(u.T, np.matmul(batch.g, v)).reshape(batch.g.shape[0], r * r)
    gram = design.T @ design
    rhs = design.T @ batch.y
    return _solve(gram, rhs, ridge, on_singular).reshape(r, r)


def factor_step(
    side: str,
    fixed_factor: np.ndarray,
    lambdas: list[np.ndarray],
    large_batches: list[Batch],
    ridge: float = 0.0,
    on_singular: str = "raise",
) -> np.ndarray:
    """Pooled least-squares update of one shared factor, re-orthonormalized.

    ``side="row"`` solves for the right factor given the left one fixed:
    design rows vec(G_j^T F L_i) against the unknown vec(V). ``side="column"``
    solves for the left factor given the right one fixed, using the
    transposed identity <G, U L V^T> = <G^T, V L^T U^T>: design rows
    vec(G_j F L_i^T). Per-client Gram/right-hand-side contributions are
    reduced in ascending client order so reruns are bitwise identical.
    """
    if side not in ("row", "column"):
        raise ValueError(f"side must be 'row' or 'column', got {side!r}")
    if len(lambdas) != len(large_batches):
        raise ValueError("one core per client batch is required")
    check_orthonormal(fixed_factor, "fixed factor")
    d, r = fixed_factor.shape
    gram = np.zeros((d * r, d * r))
    rhs = np.zeros(d * r)
    for lam, batch in zip(lambdas, large_batches):
        if side == "row":
            design = np.matmul(batch.g.transpose(0, 2, 1), fixed_factor @ lam)
        else:
            design = np.matmul(batch.g, fixed_factor @ lam.T)
        design = design.reshape(batch.g.shape[0], d * r)
        gram += design.T @ design
        rhs += design.T @ batch.y
    solution = _solve(gram, rhs, ridge, on_singular).reshape(d, r)
    return qr_thin(solution)[0]


def _pooled_loss(u, v, lambdas, large_batches) -> float:
    total = 0.0
    for lam, batch in zip(lambdas, large_batches):
        pred = np.einsum("jab,ab->j", batch.g, u @ lam @ v.T)
        total += float(np.sum((batch.y - pred) ** 2))
    return total


def _snapshot(t, u, v, lambdas, loss, gt: GroundTruth | None) -> HistoryRecord:
    if gt is None:
        return HistoryRecord(t=t, dist_u=None, dist_v=None, max_recon=None, loss=loss)
    recon = max(
        reconstruction_error(u, lambdas[i], v, gt.targets[i]) for i in range(len(lambdas))
    )
    return HistoryRecord(
        t=t,
        dist_u=subspace_dist(u, gt.u_star),
        dist_v=subspace_dist(v, gt.v_star),
        max_recon=recon,
        loss=loss,
    )


def run(ds: Dataset, cfg: SolverConfig, trace_gt: GroundTruth | None = None) -> SolverState:
    """Execute the full alternating scheme on ``ds``.

    Initializes from the pooled spectral estimate, then per iteration t:
    per-client core solve on small batch t (fast path: on the large batch),
    right-factor update, then left-factor update against the pre-update
    right factor (or the fresh one when ``sequential_uv`` is set), each
    followed by QR. The returned cores are the ones solved during the final
    iteration unless ``refit_lambda`` requests a last solve against the
    final factors.
    """
    k = len(ds.large)
    if cfg.single_client_fast_path:
        if k != 1:
            raise ValueError("the fast path is only valid for a single client")
    else:
        available = min(len(b) for b in ds.small) if ds.small else 0
        if cfg.iterations > available:
            raise ValueError(
                f"iterations={cfg.iterations} exceeds the {available} small batches per client"
            )

    u, lam0, v = init_spectral(ds, ds.meta.r)
    lambdas = [lam0.copy() for _ in range(k)]
    history: list[HistoryRecord] = []
    if cfg.record_history:
        history.append(_snapshot(0, u, v, lambdas, _pooled_loss(u, v, lambdas, ds.large), trace_gt))

    for t in range(cfg.iterations):
        try:
            new_lambdas = []
            for i in range(k):
                batch = ds.large[i] if cfg.single_client_fast_path else ds.small[i][t]
                new_lambdas.append(lambda_step(u, v, batch, cfg.ridge, on_singular="raise"))
            loss = _pooled_loss(u, v, new_lambdas, ds.large) if cfg.record_history else 0.0
            v_new = factor_step("row", u, new_lambdas, ds.large, cfg.ridge, on_singular="fallback")
            v_for_u = v_new if cfg.sequential_uv else v
            u_new = factor_step("column", v_for_u, new_lambdas, ds.large, cfg.ridge, on_singular="fallback")
        except ColoraError as exc:
            raise type(exc)(f"iteration {t}: {exc}") from exc
        u, v, lambdas = u_new, v_new, new_lambdas
        if cfg.record_history:
            history.append(_snapshot(t + 1, u, v, lambdas, loss, trace_gt))

    if cfg.refit_lambda and cfg.iterations > 0:
        lambdas = [
            lambda_step(u, v, ds.large[i], cfg.ridge, on_singular="fallback") for i in range(k)
        ]
    return SolverState(u=u, v=v, lambdas=lambdas, t=cfg.iterations, history=history)


class CoAltMin(BaseEstimator):
    """Estimator facade over :func:`run`.

    Parameters mirror :class:`SolverConfig`. ``fit`` consumes a
    :class:`~colora.taskgen.Dataset` (optionally with ground truth for
    tracing); fitted factors land in ``u_``, ``v_`` and ``lambdas_``.
    """

    def __init__(
        self,
        iterations: int = 25,
        ridge: float = 0.0,
        single_client_fast_path: bool = False,
        record_history: bool = True,
        sequential_uv: bool = False,
        refit_lambda: bool = False,
    ):
        self.iterations = iterations
        self.ridge = ridge
        self.single_client_fast_path = single_client_fast_path
        self.record_history = record_history
        self.sequential_uv = sequential_uv
        self.refit_lambda = refit_lambda

    def _config(self) -> SolverConfig:
        return SolverConfig(
            iterations=self.iterations,
            ridge=self.ridge,
            single_client_fast_path=self.single_client_fast_path,
            record_history=self.record_history,
            sequential_uv=self.sequential_uv,
            refit_lambda=self.refit_lambda,
        )

    def fit(self, dataset: Dataset, ground_truth: GroundTruth | None = None):
        state = run(dataset, self._config(), trace_gt=ground_truth)
        self.state_ = state
        self.u_ = state.u
        self.v_ = state.v
        self.lambdas_ = state.lambdas
        self.n_iter_ = state.t
        return self

    def _check_fitted(self):
        if not hasattr(self, "state_"):
            raise NotFittedError("this CoAltMin instance is not fitted yet")

    def reconstruct(self, client: int = 0) -> np.ndarray:
        """Low-rank target estimate for one client."""
        self._check_fitted()
        return self.u_ @ self.lambdas_[client] @ self.v_.T

    def predict(self, g, client: int = 0) -> np.ndarray:
        """Labels <G_j, U L_client V^T> for a stack of sensing matrices."""
        self._check_fitted()
        g = np.asarray(g, dtype=np.float64)
        single = g.ndim == 2
        if single:
            g = g[None]
        y = np.einsum("jab,ab->j", g, self.reconstruct(client))
        return y[0] if single else y
