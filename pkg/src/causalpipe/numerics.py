"""Least squares, ridge-stabilised logistic regression and summary statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import expit

from .errors import NumericalError, RankDeficientError

RANK_TOL = 1e-10
LOGISTIC_TOL = 1e-8
LOGISTIC_MAX_ITER = 100
DEFAULT_RIDGE = 1e-6

_P_LOW = np.finfo(np.float64).tiny
_P_HIGH = 1.0 - np.finfo(np.float64).epsneg


@dataclass(frozen=True, eq=False)
class LinearFit:
    coefficients: np.ndarray
    residuals: np.ndarray
    n: int

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.coefficients


@dataclass(frozen=True, eq=False)
class LogisticFit:
    coefficients: np.ndarray
    converged: bool
    iterations: int
    ridge: float = DEFAULT_RIDGE


def design(*columns, n=None) -> np.ndarray:
    """Stack an intercept column with the given 1-D or 2-D blocks."""
    blocks = [np.asarray(c, dtype=np.float64) for c in columns]
    if n is None:
        n = blocks[0].shape[0]
    blocks = [b.reshape(n, -1) for b in blocks]
    return np.column_stack([np.ones(n)] + blocks)


def fit_ols(X, y) -> LinearFit:
    """Least squares via column-pivoted Householder QR.

    Raises RankDeficientError when a pivot falls below RANK_TOL times the
    largest pivot.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    n, p = X.shape
    if n < p:
        raise RankDeficientError(f"{n} rows cannot determine {p} coefficients")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NumericalError("non-finite values in regression inputs")
    q, r, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if p and (diag[0] == 0.0 or diag[-1] < RANK_TOL * diag[0]):
        raise RankDeficientError(f"design matrix is rank deficient ({p} columns)")
    beta = np.empty(p)
    beta[piv] = scipy.linalg.solve_triangular(r, q.T @ y)
    return LinearFit(beta, y - X @ beta, n)


def _penalized_loglik(X, y, beta, ridge):
    eta = X @ beta
    # log(1 + exp(eta)) computed stably
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)) - 0.5 * ridge * beta @ beta)


def fit_logistic(X, y, ridge: float = DEFAULT_RIDGE, max_iter: int = LOGISTIC_MAX_ITER) -> LogisticFit:
    """Maximise the ridge-penalised Bernoulli log-likelihood by IRLS.

    The intercept is penalised along with every other coefficient.  Newton
    steps are halved until the objective does not decrease.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (X.shape[0],):
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise NumericalError("logistic response must be binary (0/1)")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    n, p = X.shape
    if n < p:
        raise RankDeficientError(f"{n} rows cannot determine {p} coefficients")
    beta = np.zeros(p)
    objective = _penalized_loglik(X, y, beta, ridge)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        prob = expit(X @ beta)
        weights = prob * (1.0 - prob)
        if not np.all(np.isfinite(weights)):
            hint = " (perfect separation; use ridge > 0)" if ridge == 0 else ""
            raise NumericalError("NaN in IRLS weights" + hint)
        gradient = X.T @ (y - prob) - ridge * beta
        hessian = (X * weights[:, None]).T @ X + ridge * np.eye(p)
        try:
            step = np.linalg.solve(hessian, gradient)
        except np.linalg.LinAlgError:
            hint = " (perfect separation; use ridge > 0)" if ridge == 0 else ""
            raise NumericalError("singular IRLS system" + hint) from None
        if not np.all(np.isfinite(step)):
            raise NumericalError("NaN in IRLS step")
        scale = 1.0
        while True:
            candidate = beta + scale * step
            value = _penalized_loglik(X, y, candidate, ridge)
            if value >= objective - 1e-12 * abs(objective) or scale < 1e-10:
                break
            scale *= 0.5
        change = np.max(np.abs(candidate - beta)) if p else 0.0
        beta, objective = candidate, value
        if change < LOGISTIC_TOL:
            converged = True
            break
    return LogisticFit(beta, converged, iterations, ridge)


def predict_proba(fit: LogisticFit, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != fit.coefficients.shape[0]:
        raise ValueError(
            f"expected {fit.coefficients.shape[0]} columns, got {X.shape[1] if X.ndim == 2 else X.shape}")
    return np.clip(expit(X @ fit.coefficients), _P_LOW, _P_HIGH)


def mean_and_variance(v) -> tuple:
    v = np.asarray(v, dtype=np.float64)
    if v.size < 1:
        raise ValueError("need at least one value")
    mean = float(np.mean(v))
    var = float(np.var(v, ddof=1)) if v.size > 1 else 0.0
    return mean, var
