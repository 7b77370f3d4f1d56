"""Synchronous-round simulation of collaborative adapter training.

Linear instantiation of the alternating federated protocol: client models
predict ``y = <G, B @ L @ A>`` from a d-by-r factor ``B``, an r-by-d factor
``A`` and an r-by-r personal core ``L``. Rounds alternate which shared
factor is trained and averaged; two baselines (purely local adapters and
the core-free alternating variant) run on the same simulated bus. The bus
is in-memory with barrier semantics, so client scheduling order never
affects results.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import Diverged, ShapeMismatch
from .numkit import rand_gaussian
from .taskgen import Batch, Dataset
from .validation import seed_sequence

PROTOCOLS = ("colora_alt", "local_only", "rolora_linear")


@dataclass(frozen=True)
class AdapterTriple:
    """Client adapter state; the effective model is ``b @ lam @ a`` (d-by-d)."""

    b: np.ndarray      # (d, r)
    a: np.ndarray      # (r, d)
    lam: np.ndarray    # (r, r)

    @property
    def composite(self) -> np.ndarray:
        return self.b @ self.lam @ self.a


@dataclass(frozen=True)
class FedConfig:
    rounds: int
    local_steps: int = 10
    learning_rate: float = 1e-3
    protocol: str = "colora_alt"
    init_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError("rounds must be nonnegative")
        if self.local_steps < 1:
            raise ValueError("local_steps must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.init_scale < 0:
            raise ValueError("init_scale must be nonnegative")


@dataclass
class RoundRecord:
    round: int
    parity: str                                 # "B-round" or "A-round"
    per_client_train_mse: list[float]
    per_client_holdout_mse: list[float]
    bytes_communicated: int


def init_adapters(d: int, r: int, k: int, init_scale: float, seed) -> list[AdapterTriple]:
    """Identical starting triples for all clients.

    ``b`` and ``a`` are Gaussian scaled by ``init_scale / sqrt(d)``; the
    core starts at identity so it stays identifiable from the first step.
    """
    s_b, s_a = seed_sequence(seed).spawn(2)
    scale = init_scale / np.sqrt(d)
    b = scale * rand_gaussian(d, r, s_b)
    a = scale * rand_gaussian(r, d, s_a)
    return [AdapterTriple(b=b.copy(), a=a.copy(), lam=np.eye(r)) for _ in range(k)]


def predictions(g: np.ndarray, triple: AdapterTriple) -> np.ndarray:
    return np.einsum("jab,ab->j", g, triple.composite)


def mse(batch: Batch, triple: AdapterTriple) -> float:
    resid = batch.y - predictions(batch.g, triple)
    return float(np.mean(resid * resid))


def loss_and_grads(batch: Batch, triple: AdapterTriple):
    """Squared loss sum_j (y_j - <G_j, B L A>)^2 and its gradients.

    Returns (loss, grad_b, grad_lam, grad_a) from the chain rule through
    the trilinear product.
    """
    resid = batch.y - predictions(batch.g, triple)
    loss = float(np.sum(resid * resid))
    s = -2.0 * np.einsum("j,jab->ab", resid, batch.g)
    grad_b = s @ (triple.lam @ triple.a).T
    grad_lam = triple.b.T @ s @ triple.a.T
    grad_a = (triple.b @ triple.lam).T @ s
    return loss, grad_b, grad_lam, grad_a


def local_train(
    batch: Batch,
    triple: AdapterTriple,
    frozen: str | None,
    steps: int,
    lr: float,
    train_lambda: bool = True,
) -> AdapterTriple:
    """Full-batch gradient descent on one client's squared loss.

    ``frozen="A"`` updates (b, lam); ``frozen="B"`` updates (a, lam);
    ``frozen=None`` updates both factors. ``train_lambda=False`` pins the
    core (used by the baselines, which have no personal core).
    """
    if frozen not in ("A", "B", None):
        raise ValueError(f"frozen must be 'A', 'B' or None, got {frozen!r}")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    b, a, lam = triple.b.copy(), triple.a.copy(), triple.lam.copy()
    # overflow is detected and raised as Diverged; silence the transient
    # numpy warnings on the way there
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(steps):
            loss, grad_b, grad_lam, grad_a = loss_and_grads(batch, AdapterTriple(b, a, lam))
            if not np.isfinite(loss):
                raise Diverged(f"loss became non-finite ({loss})")
            if frozen != "B":
                b -= lr * grad_b
            if frozen != "A":
                a -= lr * grad_a
            if train_lambda:
                lam -= lr * grad_lam
            if not (np.all(np.isfinite(b)) and np.all(np.isfinite(a)) and np.all(np.isfinite(lam))):
                raise Diverged("adapter entries became non-finite")
    return AdapterTriple(b=b, a=a, lam=lam)


def aggregate(payloads: list[np.ndarray]) -> np.ndarray:
    """Entrywise mean in ascending client order."""
    if not payloads:
        raise ValueError("nothing to aggregate")
    shape = payloads[0].shape
    acc = np.zeros(shape)
    for i, p in enumerate(payloads):
        if p.shape != shape:
            raise ShapeMismatch(f"payload {i} has shape {p.shape}, expected {shape}")
        acc += p
    return acc / len(payloads)


def personalized_param_count(protocol: str, d: int, r: int) -> int:
    """Scalars of per-client state that persist across rounds and are never shared."""
    if protocol == "colora_alt":
        return r * r          # the personal core
    if protocol == "local_only":
        return 2 * d * r      # both factors stay private
    if protocol == "rolora_linear":
        return 0              # both factors end up averaged, no core
    raise ValueError(f"unknown protocol {protocol!r}")


def run_protocol(
    ds: Dataset, holdout: Dataset, cfg: FedConfig
) -> tuple[list[RoundRecord], list[AdapterTriple]]:
    """Run ``cfg.rounds`` synchronous rounds and log per-round metrics.

    Even rounds train (core, B) with A frozen then average B; odd rounds
    swap the roles and average A. ``local_only`` trains both factors with
    no core and never communicates; ``rolora_linear`` follows the same
    alternation but without a core. Train/holdout MSE is recorded after
    the round's aggregation. Per-client cores persist across parity
    switches; they are never re-initialized mid-protocol.
    """
    k = len(ds.large)
    if len(holdout.large) != k:
        raise ValueError("train and holdout datasets must cover the same clients")
    d = ds.large[0].g.shape[1]
    r = ds.meta.r
    adapters = init_adapters(d, r, k, cfg.init_scale, cfg.seed)
    agg_bytes = k * d * r * 8

    records: list[RoundRecord] = []
    for t in range(cfg.rounds):
        parity = "B-round" if t % 2 == 0 else "A-round"
        try:
            if cfg.protocol == "local_only":
                adapters = [
                    local_train(ds.large[i], adapters[i], frozen=None,
                                steps=cfg.local_steps, lr=cfg.learning_rate,
                                train_lambda=False)
                    for i in range(k)
                ]
                sent = 0
            else:
                train_lambda = cfg.protocol == "colora_alt"
                frozen = "A" if parity == "B-round" else "B"
                adapters = [
                    local_train(ds.large[i], adapters[i], frozen=frozen,
                                steps=cfg.local_steps, lr=cfg.learning_rate,
                                train_lambda=train_lambda)
                    for i in range(k)
                ]
                if parity == "B-round":
                    shared = aggregate([tr.b for tr in adapters])
                    adapters = [replace(tr, b=shared.copy()) for tr in adapters]
                else:
                    shared = aggregate([tr.a for tr in adapters])
                    adapters = [replace(tr, a=shared.copy()) for tr in adapters]
                sent = agg_bytes
        except Diverged as exc:
            raise Diverged(f"round {t}: {exc}") from exc
        records.append(RoundRecord(
            round=t,
            parity=parity,
            per_client_train_mse=[mse(ds.large[i], adapters[i]) for i in range(k)],
            per_client_holdout_mse=[mse(holdout.large[i], adapters[i]) for i in range(k)],
            bytes_communicated=sent,
        ))
    return records, adapters


ROUND_CSV_COLUMNS = ("round", "parity", "client", "train_mse", "holdout_mse", "bytes")


def write_rounds_csv(path, records: list[RoundRecord]) -> None:
    """Flatten round records to one CSV row per (round, client)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ROUND_CSV_COLUMNS)
        for rec in records:
            for i, (tr, ho) in enumerate(zip(rec.per_client_train_mse,
                                             rec.per_client_holdout_mse)):
                writer.writerow([rec.round, rec.parity, i, repr(tr), repr(ho),
                                 rec.bytes_communicated])
