"""Core supervised embedding: centroid-pull objective, gradient, and fit.

The method learns a linear map A (d x p) by minimizing

    L(A) = l1(A) + lambda * l2(A)

where l1 = ||A.T (Ct - X)||_F^2 pulls every embedded sample toward its
embedded class centroid (Ct holds each sample's centroid column-wise),
and l2 = -log det(A.T C C.T A + gamma I) rewards embeddings whose class
centroids span a large volume (C holds the M unique centroids). Larger
lambda trades tightness around centroids for more centroid spread.

All evaluation runs in the p-sized Gram form: the d x d scatter products
are never materialized, so wide data (d >> n) stays cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset
from .errors import NumericError, ShapeError, ValidationError
from .linalg import as_matrix, logdet_spd, orthonormal_init, spd_factor_solve
from .projection import ProjectionModel

# A backtracked step below this is treated as line-search failure.
MIN_STEP = 1e-20


@dataclass(frozen=True)
class CentroidSet:
    """Class centroids of a dataset, in two layouts.

    per_sample : (d, n) matrix whose column i is the centroid of sample
    i's class, so per_sample - X is the pull residual. unique : (d, M)
    matrix of the M distinct centroids. class_sizes : (M,) sample counts.
    """

    per_sample: np.ndarray
    unique: np.ndarray
    class_sizes: np.ndarray


def compute_centroids(ds: Dataset) -> CentroidSet:
    """Per-class mean vectors for a Dataset.

    Columns of ``per_sample`` are exact copies of the matching columns of
    ``unique``; no arithmetic is repeated per sample.
    """
    m = ds.n_classes
    unique = np.empty((ds.n_features, m), dtype=np.float64)
    sizes = np.empty(m, dtype=np.int64)
    for j in range(m):
        members = ds.labels == j
        sizes[j] = int(np.count_nonzero(members))
        unique[:, j] = ds.X[:, members].mean(axis=1)
    per_sample = np.ascontiguousarray(unique[:, ds.labels])
    return CentroidSet(per_sample=per_sample, unique=unique, class_sizes=sizes)


@dataclass(frozen=True)
class ConvexLdaParams:
    """Objective parameters: target dimension p, trade-off lambda, and the
    log-det regularizer gamma.

    lambda_ = 0 degenerates to the pure centroid-pull objective, which is
    occasionally useful for testing; gamma must stay strictly positive so
    the log-det term is always defined.
    """

    p: int
    lambda_: float = 1.0
    gamma: float = 1e-6

    def __post_init__(self):
        if self.p < 1:
            raise ValidationError(f"p must be >= 1, got {self.p}")
        if not self.lambda_ >= 0.0:
            raise ValidationError(f"lambda must be >= 0, got {self.lambda_}")
        if not self.gamma > 0.0:
            raise ValidationError(f"gamma must be > 0, got {self.gamma}")


@dataclass(frozen=True)
class OptimizerConfig:
    """Gradient descent settings.

    Full-batch steepest descent with Armijo backtracking. Iteration stops
    on small gradient (max |entry| <= grad_tol), small relative cost
    change (|L_k - L_{k-1}| <= rel_tol * (1 + |L_k|)), or max_iters. The
    seed drives the orthonormal random initialization of A.
    """

    max_iters: int = 2000
    rel_tol: float = 1e-8
    grad_tol: float = 1e-6
    initial_step: float = 1.0
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.rel_tol >= 0.0:
            raise ValidationError(f"rel_tol must be >= 0, got {self.rel_tol}")
        if not self.grad_tol >= 0.0:
            raise ValidationError(f"grad_tol must be >= 0, got {self.grad_tol}")
        if not self.initial_step > 0.0:
            raise ValidationError(f"initial_step must be > 0, got {self.initial_step}")
        if not 0.0 < self.armijo_c < 1.0:
            raise ValidationError(f"armijo_c must lie in (0, 1), got {self.armijo_c}")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValidationError(
                f"backtrack_factor must lie in (0, 1), got {self.backtrack_factor}"
            )


def _check_problem(X: np.ndarray, cs: CentroidSet, A: np.ndarray, params: ConvexLdaParams):
    d = X.shape[0]
    if cs.per_sample.shape != X.shape:
        raise ShapeError(
            f"per-sample centroids have shape {cs.per_sample.shape}, data {X.shape}"
        )
    if cs.unique.shape[0] != d:
        raise ShapeError(
            f"centroids live in dimension {cs.unique.shape[0]}, data in {d}"
        )
    if A.shape[0] != d:
        raise ShapeError(f"A has {A.shape[0]} rows, data dimension is {d}")
    if A.shape[1] != params.p:
        raise ShapeError(f"A has {A.shape[1]} columns, params.p is {params.p}")
    if params.p > d:
        raise ValidationError(f"p={params.p} exceeds data dimension d={d}")


def cost(
    X, cs: CentroidSet, A, params: ConvexLdaParams
) -> tuple[float, float, float]:
    """Evaluate the objective at A.

    Returns
    -------
    (total, l1, l2) : tuple of float
        total = l1 + lambda * l2 with l1 the squared pull residual
        ||A.T (Ct - X)||_F^2 and l2 the negative log-det of the embedded
        centroid scatter A.T C C.T A + gamma I.

    Raises
    ------
    NumericError
        If the regularized scatter is numerically indefinite; the message
        suggests a larger gamma.
    """
    X = as_matrix(X, "X")
    A = as_matrix(A, "A")
    _check_problem(X, cs, A, params)
    R = A.T @ (cs.per_sample - X)
    l1 = float(np.sum(R * R))
    U = A.T @ cs.unique
    S = U @ U.T + params.gamma * np.eye(params.p)
    try:
        l2 = -logdet_spd(S)
    except NumericError as exc:
        raise NumericError(
            f"embedded centroid scatter is not positive definite with "
            f"gamma={params.gamma}; increase gamma"
        ) from exc
    return l1 + params.lambda_ * l2, l1, l2


def gradient(X, cs: CentroidSet, A, params: ConvexLdaParams) -> np.ndarray:
    """Analytic gradient of the objective at A.

    d/dA [ l1 ] = 2 (Ct - X)(Ct - X).T A, and
    d/dA [ lambda * l2 ] = -2 lambda (C C.T A)(A.T C C.T A + gamma I)^{-1}.

    The inverse is applied as an SPD solve of a p x p system; nothing
    d x d is ever formed.
    """
    X = as_matrix(X, "X")
    A = as_matrix(A, "A")
    _check_problem(X, cs, A, params)
    D = cs.per_sample - X
    pull = 2.0 * (D @ (D.T @ A))
    U = cs.unique.T @ A  # (M, p) = C.T A
    S = U.T @ U + params.gamma * np.eye(params.p)
    try:
        Y = spd_factor_solve(S, U.T)  # (p, M), solves S Y = (C.T A).T
    except NumericError as exc:
        raise NumericError(
            f"embedded centroid scatter is not positive definite with "
            f"gamma={params.gamma}; increase gamma"
        ) from exc
    spread = 2.0 * params.lambda_ * (cs.unique @ Y.T)
    return pull - spread


def _line_search(
    eval_cost, A: np.ndarray, L: float, G: np.ndarray, step: float, opt: OptimizerConfig
):
    """Backtracking Armijo search along -G.

    Returns (A_new, cost_triple, accepted_step) or None when no step down
    to MIN_STEP achieves the sufficient decrease L - c * t * ||G||_F^2.
    """
    gsq = float(np.sum(G * G))
    t = step
    while t >= MIN_STEP:
        A_new = A - t * G
        triple = eval_cost(A_new)
        if triple is not None:
            L_new = triple[0]
            if math.isfinite(L_new) and L_new <= L - opt.armijo_c * t * gsq:
                return A_new, triple, t
        t *= opt.backtrack_factor
    return None


def fit(
    ds: Dataset, params: ConvexLdaParams, opt: OptimizerConfig | None = None
) -> ProjectionModel:
    """Fit the embedding by gradient descent from a seeded orthonormal A.

    Runs full-batch descent with Armijo backtracking; each line search
    warm-starts one backtrack level above the previously accepted step, so
    badly scaled problems do not pay the full backtracking ladder every
    iteration. Accepted steps never increase the cost.

    Returns a ProjectionModel whose diagnostics record the final cost
    split (final_cost, L1, L2), accepted-iteration count, convergence
    flag, and the full cost trace (in memory only; the trace is not
    serialized). If no acceptable step exists the current iterate is
    returned with converged=False and line_search_failed=True rather than
    raising.
    """
    opt = opt or OptimizerConfig()
    if ds.n_samples < 2 or ds.n_classes < 2:
        raise ValidationError(
            f"fitting needs n >= 2 samples and M >= 2 classes, "
            f"got n={ds.n_samples}, M={ds.n_classes}"
        )
    if params.p > ds.n_features:
        raise ValidationError(
            f"p={params.p} exceeds data dimension d={ds.n_features}"
        )
    cs = compute_centroids(ds)
    X = ds.X

    def eval_cost(A):
        try:
            return cost(X, cs, A, params)
        except NumericError:
            return None

    A = orthonormal_init(ds.n_features, params.p, opt.seed)
    triple = cost(X, cs, A, params)
    L, l1, l2 = triple
    trace = [L]
    step = opt.initial_step
    converged = False
    ls_failed = False
    reason = "max_iters"
    for _ in range(opt.max_iters):
        G = gradient(X, cs, A, params)
        if float(np.max(np.abs(G))) <= opt.grad_tol:
            converged = True
            reason = "grad_tol"
            break
        result = _line_search(eval_cost, A, L, G, step, opt)
        if result is None:
            ls_failed = True
            reason = "line_search_failed"
            break
        A, triple, accepted = result
        L_prev = L
        L, l1, l2 = triple
        trace.append(L)
        # Warm start the next search one level above the accepted step.
        step = accepted / opt.backtrack_factor
        if abs(L - L_prev) <= opt.rel_tol * (1.0 + abs(L)):
            converged = True
            reason = "rel_tol"
            break

    diagnostics = {
        "final_cost": L,
        "L1": l1,
        "L2": l2,
        "iterations": len(trace) - 1,
        "converged": converged,
        "line_search_failed": ls_failed,
        "stop_reason": reason,
        "cost_trace": trace,
    }
    return ProjectionModel(
        method="convexlda",
        A=A,
        params={
            "p": params.p,
            "lambda": params.lambda_,
            "gamma": params.gamma,
            "seed": opt.seed,
        },
        diagnostics=diagnostics,
        class_names=ds.class_names,
    )


def default_optimizer(seed: int) -> OptimizerConfig:
    """OptimizerConfig with defaults and the given seed."""
    return OptimizerConfig(seed=seed)


def with_seed(opt: OptimizerConfig, seed: int) -> OptimizerConfig:
    """Copy of an OptimizerConfig with a different seed."""
    return replace(opt, seed=seed)
