"""Dense symmetric linear algebra kernels used throughout the package.

Thin, validated wrappers around LAPACK routines (via numpy and scipy).
Every kernel is deterministic for identical input bytes, which is what
lets fitted models reproduce bit for bit under a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericError, ShapeError, ValidationError

# Relative asymmetry tolerated before a matrix is rejected as non-symmetric.
SYMMETRY_RTOL = 1e-10


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Validate and convert input to a 2-D float64 array.

    Parameters
    ----------
    values : array_like
        Anything numpy can turn into an array.
    name : str
        Name used in error messages.

    Returns
    -------
    numpy.ndarray
        C-contiguous float64 array with ndim == 2 and both sizes >= 1.

    Raises
    ------
    ShapeError
        If the input is not 2-D or has an empty axis.
    ValidationError
        If any entry is NaN or infinite.
    """
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains NaN or infinite entries")
    return arr


@dataclass(frozen=True)
class SymEigResult:
    """Eigendecomposition of a symmetric matrix.

    Attributes
    ----------
    eigenvalues : numpy.ndarray
        Shape (n,), sorted in descending order.
    eigenvectors : numpy.ndarray
        Shape (n, n); column ``i`` pairs with ``eigenvalues[i]`` and the
        columns are orthonormal.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def sym_eig(S) -> SymEigResult:
    """Full eigendecomposition of a symmetric matrix.

    The input must be square and symmetric to a relative tolerance of
    1e-10; it is then symmetrized as (S + S.T) / 2 before factorization
    so roundoff in the caller cannot leak into the spectrum.

    Parameters
    ----------
    S : array_like
        Symmetric matrix, shape (n, n).

    Returns
    -------
    SymEigResult
        Eigenvalues descending, eigenvectors as matching columns.

    Raises
    ------
    ShapeError
        Non-square or asymmetric input.
    NumericError
        The underlying eigensolver failed to converge.
    """
    S = as_matrix(S, "S")
    n, m = S.shape
    if n != m:
        raise ShapeError(f"S must be square, got shape {S.shape}")
    scale = float(np.max(np.abs(S)))
    asym = float(np.max(np.abs(S - S.T)))
    if asym > SYMMETRY_RTOL * scale:
        raise ShapeError(
            f"S is not symmetric: max |S - S.T| = {asym:.3e} "
            f"exceeds {SYMMETRY_RTOL:.0e} * max |S| = {SYMMETRY_RTOL * scale:.3e}"
        )
    S = (S + S.T) / 2.0
    try:
        w, V = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed for {n}x{n} matrix: {exc}") from exc
    # eigh returns ascending order; flip to descending.
    return SymEigResult(np.ascontiguousarray(w[::-1]), np.ascontiguousarray(V[:, ::-1]))


def spd_factor_solve(M, B) -> np.ndarray:
    """Solve M Z = B for symmetric positive definite M via Cholesky.

    Parameters
    ----------
    M : array_like
        SPD matrix, shape (n, n).
    B : array_like
        Right hand side, shape (n,) or (n, k).

    Returns
    -------
    numpy.ndarray
        Solution with the same shape as B.

    Raises
    ------
    ShapeError
        Non-square M or mismatched B.
    NumericError
        M is not positive definite; the message suggests increasing the
        regularizer (gamma) because that is how downstream callers make
        their systems definite.
    """
    M = as_matrix(M, "M")
    n, m = M.shape
    if n != m:
        raise ShapeError(f"M must be square, got shape {M.shape}")
    B_arr = np.ascontiguousarray(B, dtype=np.float64)
    vector_rhs = B_arr.ndim == 1
    if vector_rhs:
        B_arr = B_arr[:, None]
    B_arr = as_matrix(B_arr, "B")
    if B_arr.shape[0] != n:
        raise ShapeError(f"B has {B_arr.shape[0]} rows, expected {n}")
    try:
        factor = scipy.linalg.cho_factor(M, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NumericError(
            f"{n}x{n} matrix is not positive definite; "
            "increase the regularizer (gamma) to make the system solvable"
        ) from exc
    Z = scipy.linalg.cho_solve(factor, B_arr, check_finite=False)
    return Z[:, 0] if vector_rhs else Z


def logdet_spd(M) -> float:
    """Log-determinant of a symmetric positive definite matrix.

    Computed from the Cholesky factor as twice the sum of the log
    diagonal, which never over- or underflows the determinant itself.

    Raises
    ------
    ShapeError
        Non-square input.
    NumericError
        Input is not positive definite.
    """
    M = as_matrix(M, "M")
    n, m = M.shape
    if n != m:
        raise ShapeError(f"M must be square, got shape {M.shape}")
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            f"{n}x{n} matrix is not positive definite; log-determinant undefined"
        ) from exc
    return float(2.0 * np.sum(np.log(np.diag(L))))


def orthonormal_init(rows: int, cols: int, seed: int) -> np.ndarray:
    """Deterministic random matrix with orthonormal columns.

    Draws a Gaussian matrix from a seeded generator and orthonormalizes
    it by QR, with the factor signs pinned so the result is a pure
    function of (rows, cols, seed).

    Raises
    ------
    ShapeError
        If cols > rows (more orthonormal columns than the dimension allows)
        or either size is < 1.
    """
    if rows < 1 or cols < 1:
        raise ShapeError(f"rows and cols must be >= 1, got ({rows}, {cols})")
    if cols > rows:
        raise ShapeError(f"cannot build {cols} orthonormal columns in dimension {rows}")
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((rows, cols))
    Q, R = np.linalg.qr(G)
    # Pin the sign ambiguity of QR: force a positive R diagonal.
    signs = np.sign(np.diag(R))
    signs[signs == 0.0] = 1.0
    return np.ascontiguousarray(Q * signs)
