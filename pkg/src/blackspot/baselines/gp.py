"""Kernel ridge regression on +/-1 targets, standing in for Gaussian-process
classification (an exact GP classifier is cubic in the row count)."""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve

from ..errors import NumericalError, ShapeError
from ..numerics import as_matrix, make_rng, rbf_matrix
from .base import TrainedModel, register, stratified_subsample
from .svm import _signed


@register
class KernelRidgeSurrogate(TrainedModel):
    family = "gaussian_process"
    threshold = 0.0

    def __init__(self, X, coef, gamma, metadata=None):
        self.X = np.asarray(X, dtype=np.float64)
        self.coef = np.asarray(coef, dtype=np.float64)
        self.gamma = float(gamma)
        self.metadata = metadata or {}

    def score(self, X, chunk=2048):
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(X.shape[0])
        for s in range(0, X.shape[0], chunk):
            out[s:s + chunk] = rbf_matrix(X[s:s + chunk], self.X, self.gamma) @ self.coef
        return out

    def to_state(self):
        return {"gamma": self.gamma, "metadata": self.metadata}, {"X": self.X, "coef": self.coef}

    @classmethod
    def from_state(cls, meta, arrays):
        return cls(arrays["X"], arrays["coef"], meta["gamma"], meta["metadata"])


def cholesky_solve(A, b, max_jitter=1e-2):
    """Solve SPD ``A x = b``; adds growing diagonal jitter if factorisation fails.

    Returns ``(x, jitter_used)``.
    """
    scale = float(np.mean(np.diag(A))) or 1.0
    jitter = 0.0
    while True:
        try:
            L = np.linalg.cholesky(A + jitter * np.eye(A.shape[0]) if jitter else A)
            return cho_solve((L, True), b), jitter
        except np.linalg.LinAlgError:
            jitter = scale * 1e-10 if jitter == 0.0 else jitter * 10.0
            if jitter > max_jitter * scale:
                raise NumericalError("kernel system is not positive definite after jitter escalation") from None


def fit_gp_surrogate(X, y, gamma=32.0, ridge=1e-2, cap=4000, seed=0) -> KernelRidgeSurrogate:
    """Solve ``(K + ridge I) c = y`` on at most ``cap`` rows; score = ``K(x, X) c``."""
    X = as_matrix(X)
    ys = _signed(y)
    if ys.shape != (X.shape[0],):
        raise ShapeError("labels must match X rows")
    meta = {"gamma": gamma, "ridge": ridge, "cap": cap, "n_train": int(X.shape[0]), "surrogate": "kernel_ridge"}
    rows = stratified_subsample(ys, cap, make_rng(seed, "subsample"))
    if rows is not None:
        X, ys = X[rows], ys[rows]
        meta["subsampled_to"] = int(rows.size)
    K = rbf_matrix(X, X, gamma)
    K[np.diag_indices_from(K)] += ridge
    coef, jitter = cholesky_solve(K, ys)
    meta["jitter"] = jitter
    return KernelRidgeSurrogate(X, coef, gamma, meta)
