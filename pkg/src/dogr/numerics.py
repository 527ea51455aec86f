"""Dense numerical kernels shared by the rest of the package.

Everything here is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from dogr.exceptions import (
    DegenerateWeightsError,
    FactorizationError,
    SingularDesignError,
)

LOG_2PI = float(np.log(2.0 * np.pi))


def symmetrize(matrix):
    """Return ``(A + A.T) / 2`` as a float array; raises on non-square input."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return 0.5 * (a + a.T)


def cholesky_lower(cov, context: str = "") -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive-definite matrix.

    Raises
    ------
    FactorizationError
        If ``cov`` is not numerically positive definite. ``context`` is
        carried in the message so callers can name the offending component.
    """
    try:
        return linalg.cholesky(cov, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        where = f" ({context})" if context else ""
        raise FactorizationError(
            f"covariance is not positive definite{where}: {exc}", context=context
        ) from exc


def mvn_log_density_rows(X, mean, cov=None, *, chol=None, context: str = "") -> np.ndarray:
    """Log-density of N(mean, cov) evaluated at every row of ``X``.

    Either ``cov`` or its lower Cholesky factor ``chol`` must be given.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    mean = np.asarray(mean, dtype=float)
    if chol is None:
        if cov is None:
            raise ValueError("either cov or chol is required")
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValueError(
                f"covariance shape {cov.shape} does not match mean length {mean.size}"
            )
        chol = cholesky_lower(cov, context)
    d = mean.size
    if X.shape[1] != d:
        raise ValueError(f"points have dimension {X.shape[1]}, mean has {d}")
    # solve L z = (x - mu) for all rows at once
    z = linalg.solve_triangular(chol, (X - mean).T, lower=True, check_finite=False)
    maha = np.einsum("ij,ij->j", z, z)
    log_det = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (d * LOG_2PI + log_det + maha)


def mvn_log_density(x, mean, cov, context: str = "") -> float:
    """Log of the multivariate normal density at a single point ``x``.

    Computed through a Cholesky factorization; no explicit inverse is formed.

    >>> round(mvn_log_density([0.0], [0.0], [[1.0]]), 6)
    -0.918939
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    if x.shape != mean.shape:
        raise ValueError(f"x has shape {x.shape}, mean has shape {mean.shape}")
    return float(mvn_log_density_rows(x[None, :], mean, cov, context=context)[0])


def normal_log_density(y, mean, variance):
    """Univariate normal log-density, elementwise; ``variance`` is sigma squared."""
    y = np.asarray(y, dtype=float)
    return -0.5 * (LOG_2PI + np.log(variance) + (y - mean) ** 2 / variance)


def log_sum_exp(values) -> float:
    """Stable ``log(sum(exp(values)))`` for a non-empty 1-D input.

    >>> log_sum_exp([-1000.0, -1000.0]) + 1000.0 - np.log(2.0)
    0.0
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("log_sum_exp of an empty vector is undefined")
    m = np.max(v)
    if not np.isfinite(m):
        # all -inf gives -inf; any +inf or nan propagates
        return float(m) if m == -np.inf else float(np.sum(v))
    return float(m + np.log(np.sum(np.exp(v - m))))


def log_sum_exp_rows(A) -> np.ndarray:
    """Row-wise :func:`log_sum_exp` of a 2-D array."""
    A = np.asarray(A, dtype=float)
    m = np.max(A, axis=1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return (m + np.log(np.sum(np.exp(A - m), axis=1, keepdims=True)))[:, 0]


@dataclass(frozen=True)
class WlsSolution:
    """Result of a weighted least-squares fit with an intercept.

    Attributes
    ----------
    coefficients : ndarray, shape (p + 1,)
        Intercept first, then one slope per feature.
    standard_errors : ndarray, shape (p + 1,)
    weighted_rss : float
        ``sum_i w_i (y_i - b0 - b . x_i) ** 2`` at ``coefficients``.
    effective_weight : float
        Sum of the weights.
    """

    coefficients: np.ndarray
    standard_errors: np.ndarray
    weighted_rss: float
    effective_weight: float

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])

    @property
    def slopes(self) -> np.ndarray:
        return self.coefficients[1:]

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.coefficients[0] + X @ self.coefficients[1:]


def add_intercept(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return np.column_stack([np.ones(X.shape[0]), X])


def weighted_sum_of_squares(X, y, weights, coefficients) -> float:
    """WSS objective for an intercept-first coefficient vector."""
    resid = np.asarray(y, dtype=float) - add_intercept(X) @ np.asarray(coefficients, dtype=float)
    return float(np.sum(np.asarray(weights, dtype=float) * resid**2))


def wls_fit(X, y, weights, rank_tol: float = 1e-10) -> WlsSolution:
    """Weighted least squares of ``y`` on ``X`` plus an intercept column.

    The fit goes through a QR factorization of the row-scaled design
    ``sqrt(w) * [1, X]``; the coefficient covariance is
    ``s2 * (R^T R)^{-1}`` with ``s2 = WSS / (sum(w) - (p + 1))``.

    Parameters
    ----------
    X : array_like, shape (N, p)
        Features, without a constant column.
    y : array_like, shape (N,)
    weights : array_like, shape (N,)
        Nonnegative observation weights.
    rank_tol : float
        Relative threshold on the diagonal of R below which the weighted
        design is declared singular.

    Raises
    ------
    DegenerateWeightsError
        Weights are negative, non-finite or all zero.
    SingularDesignError
        The weighted design matrix is rank deficient.
    """
    A = add_intercept(X)
    y = np.asarray(y, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    n, q = A.shape
    if y.size != n or w.size != n:
        raise ValueError(f"X has {n} rows but y has {y.size} and weights {w.size}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise DegenerateWeightsError("weights must be finite and nonnegative")
    total = float(np.sum(w))
    if total <= 0.0:
        raise DegenerateWeightsError("all weights are zero")

    sw = np.sqrt(w)
    Q, R = linalg.qr(sw[:, None] * A, mode="economic", check_finite=False)
    diag = np.abs(np.diag(R))
    if diag.size < q or diag.min() <= rank_tol * max(diag.max(), 1e-300):
        raise SingularDesignError(
            f"weighted design of shape {A.shape} is rank deficient "
            f"(min |R_ii| = {diag.min() if diag.size else 0.0:.3g})"
        )
    beta = linalg.solve_triangular(R, Q.T @ (sw * y), lower=False, check_finite=False)

    resid = y - A @ beta
    wrss = float(np.sum(w * resid**2))
    dof = total - q
    if dof > 0:
        r_inv = linalg.solve_triangular(R, np.eye(q), lower=False, check_finite=False)
        se = np.sqrt((wrss / dof) * np.sum(r_inv**2, axis=1))
    else:
        se = np.full(q, np.inf)
    return WlsSolution(beta, se, wrss, total)
