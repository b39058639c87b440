from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from ..errors import FitError
from ..numerics import as_matrix
from .base import TrainedModel, register


@register
class GaussianNaiveBayes(TrainedModel):
    """Class-conditional independent Gaussians; score is P(black spot | x)."""

    family = "naive_bayes"
    threshold = 0.5

    def __init__(self, means, variances, log_prior, metadata=None):
        self.means = np.asarray(means, dtype=np.float64)  # (2, d)
        self.variances = np.asarray(variances, dtype=np.float64)
        self.log_prior = np.asarray(log_prior, dtype=np.float64)
        self.metadata = metadata or {}

    def joint_log_likelihood(self, X):
        X = np.asarray(X, dtype=np.float64)
        out = np.empty((X.shape[0], 2))
        for c in range(2):
            var = self.variances[c]
            log_norm = -0.5 * np.sum(np.log(2.0 * np.pi * var))
            out[:, c] = self.log_prior[c] + log_norm - 0.5 * np.sum((X - self.means[c]) ** 2 / var, axis=1)
        return out

    def posterior(self, X):
        jll = self.joint_log_likelihood(X)
        return np.exp(jll - logsumexp(jll, axis=1, keepdims=True))

    def score(self, X):
        return self.posterior(X)[:, 1]

    def to_state(self):
        return {"metadata": self.metadata}, {
            "means": self.means, "variances": self.variances, "log_prior": self.log_prior,
        }

    @classmethod
    def from_state(cls, meta, arrays):
        return cls(arrays["means"], arrays["variances"], arrays["log_prior"], meta["metadata"])


def fit_gaussian_nb(X, y, var_smoothing=1e-9) -> GaussianNaiveBayes:
    """Per-class feature means/variances with a variance floor of
    ``var_smoothing`` times the largest feature variance."""
    X = as_matrix(X)
    y = np.asarray(y).astype(int)
    if not (np.any(y == 0) and np.any(y == 1)):
        raise FitError("naive Bayes needs both classes in the training data")
    floor = max(var_smoothing * float(np.var(X, axis=0).max()), np.finfo(float).tiny)
    means = np.stack([X[y == c].mean(axis=0) for c in (0, 1)])
    variances = np.stack([X[y == c].var(axis=0) for c in (0, 1)]) + floor
    prior = np.array([np.mean(y == 0), np.mean(y == 1)])
    return GaussianNaiveBayes(means, variances, np.log(prior), {"var_floor": floor})
