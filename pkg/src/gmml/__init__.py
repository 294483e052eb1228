"""Mahalanobis metric learning via geodesics of SPD scatter matrices.

Learns a symmetric positive definite matrix A from similar/dissimilar
point pairs in closed form: A is the point at parameter t on the
Riemannian geodesic from the inverse similarity scatter to the
dissimilarity scatter. A k-NN evaluation harness with repeated
stratified splits and two-step cross-validation over t is included,
plus a CLI (``gmml learn / eval / benchmark``).
"""

from .dataset import LabeledDataset
from .evaluation import (
    DEFAULT_COARSE_GRID,
    DEFAULT_K,
    CvPolicy,
    CvResult,
    EvalReport,
    RunRecord,
    SplitPlan,
    cross_validate_t,
    default_constraint_count,
    evaluate_split,
    knn_predict,
    run_benchmark,
    sample_constraints,
    stratified_folds,
)
from .exceptions import (
    ConvergenceError,
    CorruptMatrix,
    DataError,
    DimensionMismatch,
    EmptyFile,
    GmmlError,
    InconsistentWidth,
    NotPositiveDefinite,
    ParseError,
    SingularScatter,
    VersionMismatch,
)
from .io import (
    DatasetFingerprint,
    fingerprint_dataset,
    load_dataset,
    load_metric,
    read_report,
    save_metric,
    write_report,
)
from .learn import (
    GmmlConfig,
    LearnedMetric,
    MetricProvenance,
    PairConstraints,
    ScatterMatrices,
    mahalanobis,
    objective,
    objective_gradient,
    riccati_residual,
    scatter_matrices,
    solve_plain,
    solve_regularized,
    solve_weighted,
)
from .spd import (
    SPD_TOLERANCE,
    check_spd,
    geodesic,
    is_spd,
    loewner_less,
    riemannian_distance,
    sld_divergence,
    spd_inverse,
    spd_power,
    sym_eigen,
    symmetrize,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "CorruptMatrix",
    "CvPolicy",
    "CvResult",
    "DEFAULT_COARSE_GRID",
    "DEFAULT_K",
    "DataError",
    "DatasetFingerprint",
    "DimensionMismatch",
    "EmptyFile",
    "EvalReport",
    "GmmlConfig",
    "GmmlError",
    "InconsistentWidth",
    "LabeledDataset",
    "LearnedMetric",
    "MetricProvenance",
    "NotPositiveDefinite",
    "PairConstraints",
    "ParseError",
    "RunRecord",
    "SPD_TOLERANCE",
    "ScatterMatrices",
    "SingularScatter",
    "SplitPlan",
    "VersionMismatch",
    "check_spd",
    "cross_validate_t",
    "default_constraint_count",
    "evaluate_split",
    "fingerprint_dataset",
    "geodesic",
    "is_spd",
    "knn_predict",
    "load_dataset",
    "load_metric",
    "loewner_less",
    "mahalanobis",
    "objective",
    "objective_gradient",
    "read_report",
    "riccati_residual",
    "riemannian_distance",
    "run_benchmark",
    "sample_constraints",
    "save_metric",
    "scatter_matrices",
    "sld_divergence",
    "solve_plain",
    "solve_regularized",
    "solve_weighted",
    "spd_inverse",
    "spd_power",
    "stratified_folds",
    "symmetrize",
    "sym_eigen",
    "write_report",
]
