"""Fisher linear discriminant baseline.

Classic trace-ratio discriminant directions: maximize between-class
scatter against (ridge-regularized) within-class scatter. Deliberately
materializes the d x d scatter matrices, which is exactly the cost the
centroid objective in model.py avoids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import Dataset
from .errors import NumericError, ValidationError
from .linalg import sym_eig
from .model import compute_centroids
from .projection import ProjectionModel

DEFAULT_RIDGE_SCALE = 1e-6


@dataclass(frozen=True)
class FisherLdaParams:
    """Target dimension p and within-scatter ridge.

    ridge=None picks the default 1e-6 * trace(S_w) / d at fit time; 0
    disables regularization entirely (fails on singular S_w, e.g. d > n).
    """

    p: int
    ridge: float | None = None

    def __post_init__(self):
        if self.p < 1:
            raise ValidationError(f"p must be >= 1, got {self.p}")
        if self.ridge is not None and not self.ridge >= 0.0:
            raise ValidationError(f"ridge must be >= 0, got {self.ridge}")


def scatter_matrices(ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Within-class and between-class scatter (S_w, S_b), both d x d.

    S_w sums squared deviations of samples from their class centroid;
    S_b sums class-size-weighted squared deviations of centroids from the
    global mean. S_w + S_b equals the total scatter around the mean.
    """
    cs = compute_centroids(ds)
    Dw = ds.X - cs.per_sample
    Sw = Dw @ Dw.T
    grand_mean = ds.X.mean(axis=1, keepdims=True)
    Db = (cs.unique - grand_mean) * np.sqrt(cs.class_sizes.astype(np.float64))
    Sb = Db @ Db.T
    # Products of a matrix with its own transpose; symmetrize away roundoff.
    Sw = (Sw + Sw.T) / 2.0
    Sb = (Sb + Sb.T) / 2.0
    return Sw, Sb


def fit_fisher(ds: Dataset, params: FisherLdaParams) -> ProjectionModel:
    """Top-p generalized eigenvectors of S_b against S_w + ridge I.

    Solved symmetrically: factor the regularized within-scatter as L L.T,
    eigendecompose L^{-1} S_b L^{-T}, and map the eigenvectors back
    through L^{-T}. Direction signs are pinned so the largest-magnitude
    entry of each column is positive, making the fit deterministic.

    Requires p <= M - 1 (S_b has at most M - 1 informative directions).
    Raises NumericError when the regularized within-scatter is not
    positive definite, which with ridge=0 happens whenever d > n.
    """
    if ds.n_classes < 2:
        raise ValidationError(f"need M >= 2 classes, got {ds.n_classes}")
    if params.p > ds.n_classes - 1:
        raise ValidationError(
            f"p={params.p} exceeds M-1={ds.n_classes - 1} discriminant directions"
        )
    if params.p > ds.n_features:
        raise ValidationError(f"p={params.p} exceeds data dimension d={ds.n_features}")
    Sw, Sb = scatter_matrices(ds)
    d = ds.n_features
    if params.ridge is None:
        ridge = DEFAULT_RIDGE_SCALE * float(np.trace(Sw)) / d
    else:
        ridge = float(params.ridge)
    W = Sw + ridge * np.eye(d)
    try:
        L = np.linalg.cholesky(W)
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            f"within-class scatter is singular (ridge={ridge}); "
            "set a positive ridge to regularize it"
        ) from exc
    # T = L^{-1} S_b L^{-T}, symmetric with the same spectrum as the pencil.
    B = scipy.linalg.solve_triangular(L, Sb, lower=True, check_finite=False)
    T = scipy.linalg.solve_triangular(L, B.T, lower=True, check_finite=False)
    T = (T + T.T) / 2.0
    eig = sym_eig(T)
    Y = eig.eigenvectors[:, : params.p]
    A = scipy.linalg.solve_triangular(L.T, Y, lower=False, check_finite=False)
    A = np.ascontiguousarray(A)
    for col in range(params.p):
        lead = np.argmax(np.abs(A[:, col]))
        if A[lead, col] < 0.0:
            A[:, col] = -A[:, col]
    eigenvalues = [float(v) for v in eig.eigenvalues[: params.p]]
    return ProjectionModel(
        method="fisher_lda",
        A=A,
        params={"p": params.p, "ridge": ridge},
        diagnostics={"eigenvalues": eigenvalues, "ridge": ridge},
        class_names=ds.class_names,
    )
