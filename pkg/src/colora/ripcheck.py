"""Randomized empirical estimators for measurement-ensemble concentration.

The underlying conditions quantify over all (structured) low-rank matrices,
which is not checkable exhaustively, so each estimator reports a randomized
lower bound on the true worst-case deviation: sample test matrices, evaluate
the relevant quadratic form, keep the max. Trial draws depend only on
(seed, trial index), so enlarging the trial budget extends rather than
reshuffles the stream and the reported bound is monotone in ``trials``.

Test-point distributions: Gaussian-factor low-rank products for the plain
and sub-isometric checks, orthonormal factors with Gaussian cores for the
shared-factor (GRIP) and fixed-factor checks.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .numkit import rand_gaussian, rand_orthonormal
from .validation import check_finite, check_orthonormal, seed_sequence

CSV_COLUMNS = ("estimator", "d", "r", "k", "n_or_N", "trials", "delta_hat", "seed")


@dataclass(frozen=True)
class WorstCasePayload:
    """Enough to redraw the maximizing trial: root seed plus trial index."""

    seed: int
    trial: int


@dataclass(frozen=True)
class IsometryReport:
    delta_hat: float
    trials: int
    sample_size: int
    worst_case_payload: WorstCasePayload


def trial_seed(seed: int, trial: int) -> np.random.SeedSequence:
    """Seed stream of one trial; stable under changes of the trial budget."""
    return seed_sequence(seed).spawn(trial + 1)[trial]


def _as_ensemble(ensemble, ndim: int, name: str) -> np.ndarray:
    e = np.asarray(ensemble, dtype=np.float64)
    if e.ndim != ndim:
        raise ValueError(f"{name} must have ndim={ndim}, got {e.ndim}")
    if e.shape[-1] != e.shape[-2]:
        raise ValueError(f"{name} sensing matrices must be square, got {e.shape}")
    check_finite(e, name)
    return e


def quadratic_mean(ensemble: np.ndarray, x: np.ndarray) -> float:
    """(1/N) sum_j <G_j, X>^2 over one flat ensemble."""
    vals = np.einsum("jab,ab->j", ensemble, x)
    return float(np.mean(vals * vals))


def rip_deviation(ensemble: np.ndarray, x: np.ndarray) -> float:
    """|(1/N) sum <G_j, X>^2 - ||X||_F^2| / ||X||_F^2 for one test matrix."""
    fro2 = float(np.sum(x * x))
    if fro2 == 0.0:
        return 0.0
    return abs(quadratic_mean(ensemble, x) - fro2) / fro2


def grip_deviation(ensemble: np.ndarray, family: list[np.ndarray]) -> float:
    """Shared-factor deviation for one per-client test family.

    |(1/kN) sum_ij <G^i_j, X^i>^2 - (1/k) sum_i ||X^i||_F^2| divided by
    max_i ||X^i||_F^2. Collapses to :func:`rip_deviation` at k=1.
    """
    k = ensemble.shape[0]
    if len(family) != k:
        raise ValueError("one test matrix per client is required")
    stat = 0.0
    pop = 0.0
    norms = []
    for i in range(k):
        stat += quadratic_mean(ensemble[i], family[i])
        fro2 = float(np.sum(family[i] * family[i]))
        pop += fro2
        norms.append(fro2)
    if max(norms) == 0.0:
        return 0.0
    return abs(stat / k - pop / k) / max(norms)


def draw_rip_test_matrix(d: int, r: int, seed) -> np.ndarray:
    """Unit-Frobenius rank-r draw X = A B^T with Gaussian factors."""
    s_a, s_b = seed_sequence(seed).spawn(2)
    x = rand_gaussian(d, r, s_a) @ rand_gaussian(d, r, s_b).T
    return x / np.linalg.norm(x, "fro")


def draw_grip_test_family(d: int, r: int, k: int, seed) -> list[np.ndarray]:
    """Shared orthonormal factors with k Gaussian cores, max norm scaled to 1."""
    seeds = seed_sequence(seed).spawn(2 + k)
    u = rand_orthonormal(d, r, seeds[0])
    v = rand_orthonormal(d, r, seeds[1])
    cores = [rand_gaussian(r, r, seeds[2 + i]) for i in range(k)]
    scale = 1.0 / max(np.linalg.norm(c, "fro") for c in cores)
    return [scale * (u @ c @ v.T) for c in cores]


def draw_unit_core(r: int, seed) -> np.ndarray:
    """Unit-Frobenius Gaussian r-by-r core."""
    c = rand_gaussian(r, r, seed)
    return c / np.linalg.norm(c, "fro")


def estimate_rip(ensemble, r: int, trials: int = 256, seed: int = 0) -> IsometryReport:
    """Empirical lower bound on the plain isometry constant of ``ensemble``."""
    ensemble = _as_ensemble(ensemble, 3, "ensemble")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    d = ensemble.shape[-1]
    worst, worst_trial = -1.0, 0
    for i in range(trials):
        x = draw_rip_test_matrix(d, r, trial_seed(seed, i))
        dev = rip_deviation(ensemble, x)
        if dev > worst:
            worst, worst_trial = dev, i
    return IsometryReport(
        delta_hat=worst,
        trials=trials,
        sample_size=ensemble.shape[0],
        worst_case_payload=WorstCasePayload(seed=int(seed), trial=worst_trial),
    )


def estimate_grip(ensemble, r: int, trials: int = 256, seed: int = 0) -> IsometryReport:
    """Empirical lower bound on the shared-factor isometry constant."""
    ensemble = _as_ensemble(ensemble, 4, "ensemble")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    k, n = ensemble.shape[0], ensemble.shape[1]
    d = ensemble.shape[-1]
    worst, worst_trial = -1.0, 0
    for i in range(trials):
        family = draw_grip_test_family(d, r, k, trial_seed(seed, i))
        dev = grip_deviation(ensemble, family)
        if dev > worst:
            worst, worst_trial = dev, i
    return IsometryReport(
        delta_hat=worst,
        trials=trials,
        sample_size=k * n,
        worst_case_payload=WorstCasePayload(seed=int(seed), trial=worst_trial),
    )


def estimate_uv_rip(u, v, ensemble, trials: int = 256, seed: int = 0) -> IsometryReport:
    """Empirical isometry bound restricted to matrices u @ L @ v.T."""
    ensemble = _as_ensemble(ensemble, 3, "ensemble")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    check_orthonormal(u, "u")
    check_orthonormal(v, "v")
    r = u.shape[1]
    worst, worst_trial = -1.0, 0
    for i in range(trials):
        core = draw_unit_core(r, trial_seed(seed, i))
        dev = rip_deviation(ensemble, u @ core @ v.T)
        if dev > worst:
            worst, worst_trial = dev, i
    return IsometryReport(
        delta_hat=worst,
        trials=trials,
        sample_size=ensemble.shape[0],
        worst_case_payload=WorstCasePayload(seed=int(seed), trial=worst_trial),
    )


def estimate_subisometry(ensemble, r: int, trials: int = 256, seed: int = 0) -> float:
    """Empirical lower bound on the energy coefficient of ``ensemble``.

    Per trial draws an independent unit-Frobenius rank-r test matrix per
    client (no shared factors) and evaluates
    (1/kn) sum_ij <G^i_j, X^i>^2 / max_i ||X^i||_F^2.
    """
    ensemble = _as_ensemble(ensemble, 4, "ensemble")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    k = ensemble.shape[0]
    d = ensemble.shape[-1]
    worst = -np.inf
    for i in range(trials):
        client_seeds = trial_seed(seed, i).spawn(k)
        stat = 0.0
        for c in range(k):
            x = draw_rip_test_matrix(d, r, client_seeds[c])
            stat += quadratic_mean(ensemble[c], x)
        worst = max(worst, stat / k)
    return float(worst)


def csv_row(estimator: str, d: int, r: int, k: int, n_or_n: int,
            trials: int, delta_hat: float, seed: int) -> dict:
    return {
        "estimator": estimator,
        "d": d,
        "r": r,
        "k": k,
        "n_or_N": n_or_n,
        "trials": trials,
        "delta_hat": repr(float(delta_hat)),
        "seed": seed,
    }


def write_reports_csv(path, rows: list[dict]) -> None:
    """One CSV row per estimator invocation, fixed column order."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
