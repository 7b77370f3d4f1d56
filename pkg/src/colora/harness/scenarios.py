"""Scenario implementations and the grid runner.

Each scenario maps one grid cell (a flat dict of scalars) to CSV rows; the
runner executes the cross product in a worker pool, writes one CSV per
cell (atomic rename), then combines rows in cell order into the scenario
CSV plus a manifest. Cell outputs depend only on the cell's parameters,
so results are byte-identical for any pool size.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .. import __version__
from ..coaltmin import SolverConfig, init_spectral, run
from ..fedsim import FedConfig, run_protocol
from ..metrics import conditioning, subspace_dist, task_similarity_xi
from ..ripcheck import estimate_grip
from ..taskgen import TaskGenConfig, make_ground_truth, sample_dataset, xi_from_beta
from ..validation import seed_sequence
from .config import ExperimentSpec, expand_grid, validate_spec

WORKERS_ENV = "COLORA_WORKERS"

# Large-batch solves use the fresh right factor in the left-factor update;
# this is the variant whose contraction the convergence scenarios report.
_SOLVER_VARIANT = dict(sequential_uv=True)


def version_string() -> str:
    return f"colora-{__version__}"


def _ground_truth(cell: dict):
    return make_ground_truth(TaskGenConfig(
        d=int(cell["d"]), r=int(cell["r"]), k=int(cell["k"]),
        beta=float(cell.get("beta", 0.0)) if "xi" not in cell else None,
        xi=float(cell["xi"]) if "xi" in cell else None,
        kappa_target=float(cell["kappa"]), sigma_min=float(cell["sigma_min"]),
        seed=int(cell["seed"]),
    ))


def _ident(cell: dict, keys) -> dict:
    return {key: cell[key] for key in keys if key in cell}


def _cell_convergence(cell: dict) -> list[dict]:
    gt = _ground_truth(cell)
    ds = sample_dataset(gt, N=int(cell["N"]), n=int(cell["n"]), T=int(cell["T"]),
                        seed=int(cell["seed"]) * 2 + 1)
    state = run(ds, SolverConfig(iterations=int(cell["T"]), ridge=float(cell["ridge"]),
                                 record_history=True, **_SOLVER_VARIANT), trace_gt=gt)
    ident = _ident(cell, ("cell", "d", "r", "k", "N", "n", "T", "beta", "kappa", "seed"))
    return [
        {**ident, "t": h.t, "dist_u": h.dist_u, "dist_v": h.dist_v,
         "max_recon": h.max_recon, "loss": h.loss}
        for h in state.history
    ]


def _cell_similarity_sweep(cell: dict) -> list[dict]:
    gt = _ground_truth(cell)
    beta = float(cell["beta"]) if "beta" in cell else None
    report = conditioning(gt.targets, int(cell["r"]))
    row = _ident(cell, ("cell", "d", "r", "k", "beta", "xi", "seed"))
    row.update({
        "xi_nominal": xi_from_beta(beta, int(cell["r"])) if beta is not None else cell["xi"],
        "xi_realized": task_similarity_xi(gt) if int(cell["k"]) >= 2 else 1.0,
        "max_dist_u": max(subspace_dist(gt.u_star, u) for u in gt.u_i),
        "max_dist_v": max(subspace_dist(gt.v_star, v) for v in gt.v_i),
        "kappa_realized": report.kappa,
        "gamma_realized": report.gamma,
    })
    return [row]


def _cell_sample_sweep(cell: dict) -> list[dict]:
    gt = _ground_truth(cell)
    ds = sample_dataset(gt, N=int(cell["N"]), n=int(cell["n"]), T=int(cell["T"]),
                        seed=int(cell["seed"]) * 2 + 1)
    state = run(ds, SolverConfig(iterations=int(cell["T"]), ridge=float(cell["ridge"]),
                                 record_history=True, **_SOLVER_VARIANT), trace_gt=gt)
    last = state.history[-1]
    row = _ident(cell, ("cell", "d", "r", "k", "N", "n", "T", "beta", "kappa", "seed"))
    row.update({"final_dist_u": last.dist_u, "final_dist_v": last.dist_v,
                "final_max_recon": last.max_recon})
    return [row]


def _cell_grip_sweep(cell: dict) -> list[dict]:
    d, r, k, n = int(cell["d"]), int(cell["r"]), int(cell["k"]), int(cell["N"])
    seed = int(cell["seed"])
    rng = np.random.default_rng(seed_sequence(seed))
    ensemble = rng.standard_normal((k, n, d, d))
    # trial draws use a disjoint integer seed so they never share a stream
    # with the ensemble
    report = estimate_grip(ensemble, r, trials=int(cell["trials"]), seed=seed + 990001)
    row = _ident(cell, ("cell", "d", "r", "k", "N", "seed"))
    row.update({"kN": k * n, "trials": report.trials, "delta_hat": report.delta_hat})
    return [row]


def _cell_fed_compare(cell: dict) -> list[dict]:
    gt = _ground_truth(cell)
    seed = int(cell["seed"])
    train = sample_dataset(gt, N=int(cell["N"]), n=1, T=1, seed=seed * 2 + 1)
    holdout = sample_dataset(gt, N=int(cell["holdout"]), n=1, T=1, seed=seed * 2 + 2)
    cfg = FedConfig(
        rounds=int(cell["rounds"]), local_steps=int(cell["local_steps"]),
        learning_rate=float(cell["learning_rate"]), protocol=str(cell["protocol"]),
        init_scale=float(cell["init_scale"]), seed=seed,
    )
    records, _ = run_protocol(train, holdout, cfg)
    ident = _ident(cell, ("cell", "d", "r", "k", "N", "beta", "protocol", "rounds",
                          "local_steps", "learning_rate", "seed"))
    rows = []
    for rec in records:
        for client, (tr, ho) in enumerate(zip(rec.per_client_train_mse,
                                              rec.per_client_holdout_mse)):
            rows.append({**ident, "round": rec.round, "parity": rec.parity,
                         "client": client, "train_mse": tr, "holdout_mse": ho,
                         "bytes": rec.bytes_communicated})
    return rows


def _cell_init_quality(cell: dict) -> list[dict]:
    gt = _ground_truth(cell)
    ds = sample_dataset(gt, N=int(cell["N"]), n=1, T=1, seed=int(cell["seed"]) * 2 + 1)
    u0, _, v0 = init_spectral(ds, int(cell["r"]))
    row = _ident(cell, ("cell", "d", "r", "k", "N", "beta", "kappa", "seed"))
    row.update({"dist_u0": subspace_dist(u0, gt.u_star),
                "dist_v0": subspace_dist(v0, gt.v_star)})
    return [row]


SCENARIOS = {
    "convergence": _cell_convergence,
    "similarity_sweep": _cell_similarity_sweep,
    "sample_sweep": _cell_sample_sweep,
    "grip_sweep": _cell_grip_sweep,
    "fed_compare": _cell_fed_compare,
    "init_quality": _cell_init_quality,
}


def _format(value) -> str:
    if isinstance(value, float):
        return repr(float(value))  # builtin float repr: shortest exact form
    return str(value)


def _rows_to_csv_text(scenario: str, rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write(f"# producer={version_string()} scenario={scenario} units=dimensionless\n")
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: _format(val) for key, val in row.items()})
    return buf.getvalue()


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _run_cell(scenario: str, cell: dict, cells_dir: str):
    """Worker entry: compute one cell, persist its own CSV, report rows."""
    start = time.perf_counter()
    try:
        rows = SCENARIOS[scenario](cell)
    except Exception as exc:  # noqa: BLE001 - cell isolation wants everything caught
        return cell["cell"], None, f"{type(exc).__name__}: {exc}", time.perf_counter() - start
    path = Path(cells_dir) / f"{scenario}_cell{cell['cell']:04d}.csv"
    _atomic_write(path, _rows_to_csv_text(scenario, rows))
    return cell["cell"], rows, None, time.perf_counter() - start


def worker_count() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_experiment(spec: ExperimentSpec) -> dict:
    """Execute the full grid and write CSV, manifest and optional plots.

    Returns a summary with artifact paths and per-cell status. Validation
    problems raise SpecError before any cell runs; cell failures are
    collected, not raised, and partial results are still written.
    """
    validate_spec(spec)
    cells = expand_grid(spec)
    out_dir = Path(spec.output_dir)
    cells_dir = out_dir / "cells"
    cells_dir.mkdir(parents=True, exist_ok=True)

    workers = worker_count()
    results = {}
    if workers == 1:
        for cell in cells:
            idx, rows, err, wall = _run_cell(spec.scenario, cell, str(cells_dir))
            results[idx] = (rows, err, wall)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_cell, spec.scenario, cell, str(cells_dir))
                       for cell in cells]
            for fut in futures:
                idx, rows, err, wall = fut.result()
                results[idx] = (rows, err, wall)

    ok_rows = []
    failures = []
    cell_log = []
    for cell in cells:
        rows, err, wall = results[cell["cell"]]
        entry = {"cell": cell["cell"], "wall_s": round(wall, 6)}
        if err is None:
            entry["status"] = "ok"
            ok_rows.extend(rows)
        else:
            entry["status"] = "error"
            entry["error"] = err
            failures.append({"cell": cell["cell"], "error": err})
        cell_log.append(entry)

    csv_path = None
    if ok_rows:
        csv_path = out_dir / f"{spec.scenario}.csv"
        _atomic_write(csv_path, _rows_to_csv_text(spec.scenario, ok_rows))

    manifest = {
        "version": version_string(),
        "spec": {
            "scenario": spec.scenario,
            "grid": spec.grid,
            "output_dir": str(spec.output_dir),
            "plot": spec.plot,
        },
        "cells": cell_log,
    }
    manifest_path = out_dir / f"{spec.scenario}_manifest.json"
    _atomic_write(manifest_path, json.dumps(manifest, indent=2) + "\n")

    plots = []
    if spec.plot and csv_path is not None:
        from .svgplot import render_plots

        plots = [str(p) for p in render_plots(csv_path, spec.scenario)]

    return {
        "scenario": spec.scenario,
        "csv": str(csv_path) if csv_path else None,
        "manifest": str(manifest_path),
        "plots": plots,
        "cells_total": len(cells),
        "cells_ok": len(cells) - len(failures),
        "cells_failed": failures,
    }
