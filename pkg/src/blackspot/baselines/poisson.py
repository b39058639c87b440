"""Poisson regression with a log link, fitted by L-BFGS."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from ..errors import ParameterError
from ..numerics import as_matrix, lbfgs_minimize
from .base import TrainedModel, register


def poisson_pmf(k: int, lam: float) -> float:
    """P(K = k) for K ~ Poisson(lam), evaluated in log space."""
    if lam <= 0:
        raise ParameterError("rate must be positive")
    if k < 0:
        return 0.0
    return math.exp(-lam + k * math.log(lam) - gammaln(k + 1))


@register
class PoissonRegression(TrainedModel):
    family = "poisson"
    threshold = 0.5

    def __init__(self, coef, intercept, metadata=None):
        self.coef = np.asarray(coef, dtype=np.float64)
        self.intercept = float(intercept)
        self.metadata = metadata or {}

    def rate(self, X):
        X = np.asarray(X, dtype=np.float64)
        with np.errstate(over="ignore"):
            return np.exp(np.minimum(X @ self.coef + self.intercept, 700.0))

    def score(self, X):
        return self.rate(X)

    def to_state(self):
        return {"intercept": self.intercept, "metadata": self.metadata}, {"coef": self.coef}

    @classmethod
    def from_state(cls, meta, arrays):
        return cls(arrays["coef"], meta["intercept"], meta["metadata"])


def poisson_objective(X, y, alpha):
    """Mean negative log-likelihood (up to constants) plus ridge on the slopes."""
    n = X.shape[0]

    def fun_grad(theta):
        b, w = theta[0], theta[1:]
        eta = X @ w + b
        with np.errstate(over="ignore"):
            mu = np.exp(eta)
        value = float(np.mean(mu - y * eta) + 0.5 * alpha * np.dot(w, w))
        resid = (mu - y) / n
        grad = np.empty_like(theta)
        grad[0] = resid.sum()
        grad[1:] = X.T @ resid + alpha * w
        return value, grad

    return fun_grad


def fit_poisson_regression(X, y, alpha=0.9, tol=1e-5, max_iter=500) -> PoissonRegression:
    """Maximise the L2-penalised Poisson log-likelihood (intercept unpenalised).

    Labels may be counts or soft labels in [0, 1]; the score is the predicted
    rate and the label is ``rate >= 0.5``.
    """
    X = as_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (X.shape[0],) or np.any(y < 0):
        raise ParameterError("y must be a non-negative vector matching X rows")
    fun_grad = poisson_objective(X, y, alpha)
    res = lbfgs_minimize(fun_grad, np.zeros(X.shape[1] + 1), tol=tol, max_iter=max_iter)
    meta = {"alpha": alpha, "tol": tol, "iterations": res.iterations, "objective": res.fun}
    model = PoissonRegression(res.x[1:], res.x[0], meta)
    model.objective_history = res.history
    return model
