"""Soft-margin SVMs: a primal linear machine and a dual RBF machine."""

from __future__ import annotations

import numpy as np
from numba import njit

from ..errors import ParameterError, ShapeError
from ..numerics import as_matrix, make_rng, rbf_matrix
from .base import TrainedModel, register, stratified_subsample


def _signed(y):
    y = np.asarray(y)
    if set(np.unique(y).tolist()) <= {-1, 1}:
        return y.astype(np.float64)
    if set(np.unique(y).tolist()) <= {0, 1}:
        return np.where(y > 0, 1.0, -1.0)
    raise ParameterError("SVM labels must be in {-1, +1} or {0, 1}")


# ---------------------------------------------------------------------------
# linear


@register
class LinearSVM(TrainedModel):
    family = "linear_svm"
    threshold = 0.0

    def __init__(self, w, b, metadata=None):
        self.w = np.asarray(w, dtype=np.float64)
        self.b = float(b)
        self.metadata = metadata or {}

    def score(self, X):
        return np.asarray(X, dtype=np.float64) @ self.w + self.b

    def to_state(self):
        return {"b": self.b, "metadata": self.metadata}, {"w": self.w}

    @classmethod
    def from_state(cls, meta, arrays):
        return cls(arrays["w"], meta["b"], meta["metadata"])


def hinge_loss(model: LinearSVM, X, y):
    """Mean hinge loss on ``(X, y)`` with ``y`` in {-1, +1} or {0, 1}."""
    return float(np.mean(np.maximum(0.0, 1.0 - _signed(y) * model.score(X))))


@njit(cache=True)
def _dcd_epoch(Xb, ys, qdiag, alpha, w, order, c):
    """One pass of dual coordinate descent; returns the projected-gradient spread."""
    pg_max = -np.inf
    pg_min = np.inf
    for i in order:
        g = 0.0
        for j in range(Xb.shape[1]):
            g += w[j] * Xb[i, j]
        g = ys[i] * g - 1.0
        pg = g
        if alpha[i] == 0.0:
            pg = min(g, 0.0)
        elif alpha[i] == c:
            pg = max(g, 0.0)
        pg_max = max(pg_max, pg)
        pg_min = min(pg_min, pg)
        if pg != 0.0 and qdiag[i] > 0.0:
            old = alpha[i]
            alpha[i] = min(max(old - g / qdiag[i], 0.0), c)
            step = (alpha[i] - old) * ys[i]
            for j in range(Xb.shape[1]):
                w[j] += step * Xb[i, j]
    return pg_max - pg_min


def fit_linear_svm(X, y, c=1.0, tol=1e-3, max_epochs=1000, seed=0) -> LinearSVM:
    """Minimise ``|w|^2 / 2 + c * sum(hinge)`` by dual coordinate descent.

    This is the liblinear L1-loss solver: the bias is the weight of a constant
    input column (so it is regularised with the rest), rows are visited in a
    seeded random order each epoch, and the run stops once the spread of the
    projected dual gradient falls below ``tol``.
    """
    X = as_matrix(X)
    ys = _signed(y)
    n, d = X.shape
    if ys.shape != (n,):
        raise ShapeError("labels must match X rows")
    if c <= 0:
        raise ParameterError("c must be positive")
    Xb = np.ascontiguousarray(np.hstack([X, np.ones((n, 1))]))
    qdiag = np.einsum("ij,ij->i", Xb, Xb)
    alpha = np.zeros(n)
    w = np.zeros(d + 1)
    rng = make_rng(seed, "dual-cd")
    spread = np.inf
    epoch = 0
    while epoch < max_epochs and spread > tol:
        spread = _dcd_epoch(Xb, ys, qdiag, alpha, w, rng.permutation(n), float(c))
        epoch += 1
    meta = {"c": c, "tol": tol, "epochs": epoch, "converged": bool(spread <= tol),
            "support_vectors": int(np.count_nonzero(alpha))}
    return LinearSVM(w[:d], w[d], meta)


# ---------------------------------------------------------------------------
# RBF, dual


@register
class RbfSVM(TrainedModel):
    family = "rbf_svm"
    threshold = 0.0

    def __init__(self, support, coef, b, gamma, metadata=None):
        self.support = np.asarray(support, dtype=np.float64)  # support vectors
        self.coef = np.asarray(coef, dtype=np.float64)  # alpha_i * y_i
        self.b = float(b)
        self.gamma = float(gamma)
        self.metadata = metadata or {}

    def score(self, X, chunk=2048):
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(X.shape[0])
        for s in range(0, X.shape[0], chunk):
            out[s:s + chunk] = rbf_matrix(X[s:s + chunk], self.support, self.gamma) @ self.coef
        return out + self.b

    def to_state(self):
        return {"b": self.b, "gamma": self.gamma, "metadata": self.metadata}, {
            "support": self.support, "coef": self.coef,
        }

    @classmethod
    def from_state(cls, meta, arrays):
        return cls(arrays["support"], arrays["coef"], meta["b"], meta["gamma"], meta["metadata"])


def smo_solve(K, y, c, tol=1e-3, max_iter=1_000_000):
    """Solve the soft-margin dual ``min 1/2 a'Qa - e'a`` s.t. ``0 <= a <= c``,
    ``y'a = 0`` with ``Q = (y y') * K``.

    Working pairs are chosen as the maximal KKT violators; each pair update is
    solved analytically and clipped to the box. Returns ``(alpha, b, iters)``.
    """
    n = y.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of the dual objective
    QD = np.diag(K).copy()
    tau = 1e-12
    it = 0
    while it < max_iter:
        yG = -y * G
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(yG[up])])
        j = int(np.flatnonzero(low)[np.argmin(yG[low])])
        if yG[i] - yG[j] < tol:
            break
        it += 1
        Ki, Kj = K[i], K[j]
        Qij = y[i] * y[j] * Ki[j]
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(QD[i] + QD[j] + 2.0 * Qij, tau)
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > c:
                    ai, aj = c, c - diff
            elif aj > c:
                aj, ai = c, c + diff
        else:
            quad = max(QD[i] + QD[j] - 2.0 * Qij, tau)
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ai -= delta
            aj += delta
            if total > c:
                if ai > c:
                    ai, aj = c, total - c
            elif aj < 0:
                aj, ai = 0.0, total
            if total > c:
                if aj > c:
                    aj, ai = c, total - c
            elif ai < 0:
                ai, aj = 0.0, total
        d_i, d_j = ai - alpha[i], aj - alpha[j]
        alpha[i], alpha[j] = ai, aj
        # Q[:, i] = y * y_i * K[:, i]
        G += y * (y[i] * d_i * Ki + y[j] * d_j * Kj)

    yG = y * G
    at_upper = alpha >= c
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        rho = float(yG[free].mean())
    else:
        ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
        lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2.0) if np.isfinite(ub + lb) else 0.0
    return alpha, -rho, it


def fit_rbf_svm(X, y, gamma=32.0, c=1.0, cap=4000, tol=1e-3, seed=0) -> RbfSVM:
    """Dual RBF SVM via SMO on at most ``cap`` rows (seeded stratified subsample)."""
    X = as_matrix(X)
    ys = _signed(y)
    if ys.shape != (X.shape[0],):
        raise ShapeError("labels must match X rows")
    meta = {"gamma": gamma, "c": c, "tol": tol, "cap": cap, "n_train": int(X.shape[0])}
    rows = stratified_subsample(ys, cap, make_rng(seed, "subsample"))
    if rows is not None:
        X, ys = X[rows], ys[rows]
        meta["subsampled_to"] = int(rows.size)
    K = rbf_matrix(X, X, gamma)
    alpha, b, iters = smo_solve(K, ys, c, tol)
    meta["iterations"] = iters
    sv = alpha > 0
    model = RbfSVM(X[sv], alpha[sv] * ys[sv], b, gamma, meta)
    model.alpha = alpha
    model.train_labels = ys
    return model
