"""
Verdoorn Toolkit - Numerics
---------------------------
Least-squares and probability kernels used by every estimator and test.

All functions are pure: they never mutate their inputs and keep no state,
so they can be called from concurrent workers.
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import linalg, special

from core.errors import DomainError, RankDeficiencyError

# R-diagonal magnitudes below this fraction of the largest count as zero.
RANK_TOLERANCE = 1e-10


@dataclass(frozen=True)
class LeastSquaresFit:
    """Result of an ordinary least-squares solve.

    Attributes:
        coefficients: Estimated coefficient vector.
        residuals: y minus fitted values, one per observation.
        residual_sum_squares: Dot product of the residuals with themselves.
        xtx_inverse: (X'X)^-1, symmetric.
        rank: Numerical rank of X (always the column count on success).
    """

    coefficients: np.ndarray
    residuals: np.ndarray
    residual_sum_squares: float
    xtx_inverse: np.ndarray
    rank: int

    @property
    def n_observations(self) -> int:
        return int(self.residuals.shape[0])


def as_matrix(values, name: str = "X") -> np.ndarray:
    """Validate and convert to a finite 2-D float array."""
    matrix = np.asarray(values, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    if matrix.ndim != 2:
        raise DomainError(f"{name} must be two-dimensional, got {matrix.ndim} dimensions")
    if not np.all(np.isfinite(matrix)):
        raise DomainError(f"{name} contains non-finite entries")
    return matrix


def as_vector(values, length: int = -1, name: str = "y") -> np.ndarray:
    """Validate and convert to a finite 1-D float array of optional length."""
    vector = np.asarray(values, dtype=float).reshape(-1)
    if length >= 0 and vector.shape[0] != length:
        raise DomainError(f"{name} has length {vector.shape[0]}, expected {length}")
    if not np.all(np.isfinite(vector)):
        raise DomainError(f"{name} contains non-finite entries")
    return vector


def solve_least_squares(X, y) -> LeastSquaresFit:
    """
    Minimise ||y - X b||^2 through a column-pivoted Householder QR.

    The normal equations are never formed. (X'X)^-1 is obtained from the
    triangular factor as R^-1 R^-T.

    Args:
        X: Design matrix with at least as many rows as columns.
        y: Response vector, one entry per row of X.

    Returns:
        The fitted LeastSquaresFit.

    Raises:
        RankDeficiencyError: If X has numerical rank below its column count.
    """
    X = as_matrix(X)
    n_rows, n_cols = X.shape
    y = as_vector(y, n_rows)
    if n_cols == 0:
        raise DomainError("design matrix has no columns")
    if n_rows < n_cols:
        raise RankDeficiencyError(n_cols, n_rows)

    q, r, pivot = linalg.qr(X, mode="economic", pivoting=True)
    diagonal = np.abs(np.diag(r))
    largest = diagonal.max()
    rank = int(np.sum(diagonal > RANK_TOLERANCE * largest)) if largest > 0 else 0
    if rank < n_cols:
        raise RankDeficiencyError(n_cols, rank)

    permuted = linalg.solve_triangular(r, q.T @ y)
    coefficients = np.empty(n_cols)
    coefficients[pivot] = permuted

    r_inverse = linalg.solve_triangular(r, np.eye(n_cols))
    xtx_inverse = np.empty((n_cols, n_cols))
    xtx_inverse[np.ix_(pivot, pivot)] = r_inverse @ r_inverse.T
    xtx_inverse = 0.5 * (xtx_inverse + xtx_inverse.T)

    residuals = y - X @ coefficients
    return LeastSquaresFit(
        coefficients=coefficients,
        residuals=residuals,
        residual_sum_squares=float(residuals @ residuals),
        xtx_inverse=xtx_inverse,
        rank=rank,
    )


def symmetric_inverse(matrix) -> Tuple[np.ndarray, bool]:
    """
    Invert a symmetric matrix, falling back to the Moore-Penrose inverse.

    Returns:
        (inverse, used_pseudo_inverse). Eigenvalues below RANK_TOLERANCE
        times the largest magnitude are treated as zero.
    """
    matrix = as_matrix(matrix, "matrix")
    matrix = 0.5 * (matrix + matrix.T)
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    largest = np.abs(eigenvalues).max() if eigenvalues.size else 0.0
    keep = np.abs(eigenvalues) > RANK_TOLERANCE * largest
    inverse_values = np.zeros_like(eigenvalues)
    inverse_values[keep] = 1.0 / eigenvalues[keep]
    inverse = (eigenvectors * inverse_values) @ eigenvectors.T
    return 0.5 * (inverse + inverse.T), bool(not np.all(keep))


def t_ratio(estimate: float, std_error: float) -> float:
    """estimate / std_error with a zero standard error mapped to +-inf or 0."""
    if std_error > 0:
        return estimate / std_error
    if estimate == 0:
        return 0.0
    return math.copysign(math.inf, estimate)


def _check_df(df: float, name: str = "df") -> None:
    if not df > 0:
        raise DomainError(f"{name} must be positive, got {df}")


def cdf_normal(x: float) -> float:
    return float(special.ndtr(x))


def sf_normal(x: float) -> float:
    return float(special.ndtr(-x))


def quantile_normal(p: float) -> float:
    """Inverse of the standard normal cdf on the open interval (0, 1)."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"normal quantile requires 0 < p < 1, got {p}")
    return float(special.ndtri(p))


def cdf_chi_squared(x: float, df: float) -> float:
    """Chi-squared cdf through the regularized lower incomplete gamma function."""
    _check_df(df)
    if x < 0:
        raise DomainError(f"chi-squared cdf requires x >= 0, got {x}")
    return float(special.gammainc(0.5 * df, 0.5 * x))


def sf_chi_squared(x: float, df: float) -> float:
    _check_df(df)
    if x < 0:
        raise DomainError(f"chi-squared tail requires x >= 0, got {x}")
    return float(special.gammaincc(0.5 * df, 0.5 * x))


def cdf_student_t(x: float, df: float) -> float:
    """Student-t cdf through the regularized incomplete beta function."""
    _check_df(df)
    if math.isinf(x):
        return 1.0 if x > 0 else 0.0
    tail = 0.5 * float(special.betainc(0.5 * df, 0.5, df / (df + x * x)))
    return 1.0 - tail if x > 0 else tail


def sf_student_t(x: float, df: float) -> float:
    return cdf_student_t(-x, df)


def cdf_f(x: float, df1: float, df2: float) -> float:
    """F cdf through the regularized incomplete beta function."""
    _check_df(df1, "df1")
    _check_df(df2, "df2")
    if x < 0:
        raise DomainError(f"F cdf requires x >= 0, got {x}")
    if math.isinf(x):
        return 1.0
    return float(special.betainc(0.5 * df1, 0.5 * df2, df1 * x / (df1 * x + df2)))


def sf_f(x: float, df1: float, df2: float) -> float:
    _check_df(df1, "df1")
    _check_df(df2, "df2")
    if x < 0:
        raise DomainError(f"F tail requires x >= 0, got {x}")
    if math.isinf(x):
        return 0.0
    return float(special.betainc(0.5 * df2, 0.5 * df1, df2 / (df2 + df1 * x)))
