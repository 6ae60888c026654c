"""Supervised linear dimensionality reduction around class centroids.

The core method learns a projection that pulls embedded samples toward
their embedded class centroid while rewarding centroid configurations
that span a large volume, trading the two off through a single lambda.
Fisher LDA and PCA are included as baselines, together with k-NN
evaluation protocols and a benchmarking command line.
"""

from .data import (
    Dataset,
    SplitPlan,
    SyntheticSpec,
    kfold_indices,
    load_csv,
    load_dataset,
    load_idx,
    pca_reduce,
    save_dataset,
    select_classes,
    split_dataset,
    standardize,
    stratified_split,
    synth_gaussian,
)
from .errors import (
    FormatError,
    NumericError,
    ParseError,
    ShapeError,
    ValidationError,
)
from .fisher import FisherLdaParams, fit_fisher, scatter_matrices
from .linalg import (
    SymEigResult,
    logdet_spd,
    orthonormal_init,
    spd_factor_solve,
    sym_eig,
)
from .metrics import (
    EvalReport,
    LambdaSweepReport,
    accuracy,
    class_scatter,
    directed_hausdorff,
    fit_method,
    knn_predict,
    loo_knn_accuracy,
    mean_set_distance,
    run_protocol,
    sweep_lambda,
    tune_lambda,
)
from .model import (
    CentroidSet,
    ConvexLdaParams,
    OptimizerConfig,
    compute_centroids,
    cost,
    fit,
    gradient,
)
from .projection import ProjectionModel, load_model, save_model, transform

__version__ = "0.1.0"

__all__ = [
    "CentroidSet",
    "ConvexLdaParams",
    "Dataset",
    "EvalReport",
    "FisherLdaParams",
    "FormatError",
    "LambdaSweepReport",
    "NumericError",
    "OptimizerConfig",
    "ParseError",
    "ProjectionModel",
    "ShapeError",
    "SplitPlan",
    "SymEigResult",
    "SyntheticSpec",
    "ValidationError",
    "accuracy",
    "class_scatter",
    "compute_centroids",
    "cost",
    "directed_hausdorff",
    "fit",
    "fit_fisher",
    "fit_method",
    "gradient",
    "kfold_indices",
    "knn_predict",
    "load_csv",
    "load_dataset",
    "load_idx",
    "load_model",
    "logdet_spd",
    "loo_knn_accuracy",
    "mean_set_distance",
    "orthonormal_init",
    "pca_reduce",
    "run_protocol",
    "save_dataset",
    "save_model",
    "scatter_matrices",
    "select_classes",
    "spd_factor_solve",
    "split_dataset",
    "standardize",
    "stratified_split",
    "sweep_lambda",
    "sym_eig",
    "synth_gaussian",
    "transform",
    "tune_lambda",
    "__version__",
]
