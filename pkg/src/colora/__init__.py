"""Collaborative low-rank adaptation on linear measurements.

Shared-factor matrix sensing with per-client cores: task generators with
controlled similarity, an alternating-minimization solver, subspace
metrics, empirical isometry checks, and a synchronous federated-round
simulator, plus an experiment harness under ``colora.harness``.
"""

__version__ = "0.1.0"

from .coaltmin import (
    CoAltMin,
    SolverConfig,
    SolverState,
    factor_step,
    init_spectral,
    lambda_step,
    run,
)
from .errors import (
    BadBeta,
    ColoraError,
    DegenerateAverage,
    Diverged,
    RankDeficient,
    SchemaMismatch,
    ShapeMismatch,
    SingularSystem,
)
from .fedsim import AdapterTriple, FedConfig, RoundRecord, aggregate, local_train, run_protocol
from .metrics import (
    ConditioningReport,
    conditioning,
    reconstruction_error,
    spectral_norm,
    subspace_dist,
    subspace_similarity,
    task_similarity_xi,
)
from .numkit import qr_thin, rand_gaussian, rand_orthonormal, solve_ridge, svd_truncated
from .ripcheck import (
    IsometryReport,
    estimate_grip,
    estimate_rip,
    estimate_subisometry,
    estimate_uv_rip,
)
from .taskgen import (
    Dataset,
    GroundTruth,
    TaskGenConfig,
    load_dataset,
    make_ground_truth,
    perturb_basis,
    sample_dataset,
    save_dataset,
)

__all__ = [
    "__version__",
    "CoAltMin", "SolverConfig", "SolverState", "init_spectral", "lambda_step",
    "factor_step", "run",
    "ColoraError", "RankDeficient", "SingularSystem", "BadBeta",
    "DegenerateAverage", "ShapeMismatch", "Diverged", "SchemaMismatch",
    "AdapterTriple", "FedConfig", "RoundRecord", "aggregate", "local_train",
    "run_protocol",
    "ConditioningReport", "conditioning", "reconstruction_error",
    "spectral_norm", "subspace_dist", "subspace_similarity", "task_similarity_xi",
    "qr_thin", "svd_truncated", "solve_ridge", "rand_gaussian", "rand_orthonormal",
    "IsometryReport", "estimate_rip", "estimate_grip", "estimate_uv_rip",
    "estimate_subisometry",
    "TaskGenConfig", "GroundTruth", "Dataset", "perturb_basis",
    "make_ground_truth", "sample_dataset", "save_dataset", "load_dataset",
]
