"""Discrete AdaBoost over depth-1 decision stumps."""

from __future__ import annotations

import numba
import numpy as np

from ..errors import ParameterError, ShapeError
from ..numerics import as_matrix
from .base import TrainedModel, register
from .svm import _signed

_EPS = 1e-10


@numba.njit(cache=True)
def _best_stump(Xt, order, ys, w):
    """Weighted-error-minimising stump over every feature and midpoint.

    A stump predicts ``-s`` for ``x <= thr`` and ``s`` otherwise. Ties keep
    the lower feature, then the lower threshold, then ``s = +1``.
    """
    d, n = Xt.shape
    wneg = 0.0
    for i in range(n):
        if ys[i] < 0:
            wneg += w[i]
    total = w.sum()
    best_err = np.inf
    best_f = -1
    best_t = 0.0
    best_s = 1
    for f in range(d):
        lpos = 0.0
        lneg = 0.0
        for q in range(n - 1):
            r = order[f, q]
            if ys[r] > 0:
                lpos += w[r]
            else:
                lneg += w[r]
            a = Xt[f, r]
            b = Xt[f, order[f, q + 1]]
            if a == b:
                continue
            err = lpos + (wneg - lneg)  # s = +1
            s = 1
            if total - err < err:
                err = total - err
                s = -1
            if err < best_err:
                best_err = err
                best_f = f
                thr = 0.5 * (a + b)
                if thr >= b:
                    thr = a
                best_t = thr
                best_s = s
    return best_f, best_t, best_s, best_err / total


def stump_predict(X, feature, threshold, sign):
    return np.where(np.asarray(X)[:, feature] <= threshold, -sign, sign).astype(np.float64)


@register
class AdaBoost(TrainedModel):
    family = "adaboost"

    def __init__(self, features, thresholds, signs, alphas, threshold=0.0, metadata=None):
        self.features = np.asarray(features, dtype=np.int64)
        self.thresholds = np.asarray(thresholds, dtype=np.float64)
        self.signs = np.asarray(signs, dtype=np.int64)
        self.alphas = np.asarray(alphas, dtype=np.float64)
        # 0 for a real ensemble; for the 0-round fallback it encodes the
        # majority class against the constant score 0
        self.threshold = float(threshold)
        self.metadata = metadata or {}

    @property
    def n_rounds(self):
        return self.alphas.shape[0]

    def score(self, X):
        X = np.asarray(X, dtype=np.float64)
        out = np.zeros(X.shape[0])
        for f, t, s, a in zip(self.features, self.thresholds, self.signs, self.alphas):
            out += a * stump_predict(X, f, t, s)
        return out

    def to_state(self):
        return {"threshold": self.threshold, "metadata": self.metadata}, {
            "features": self.features, "thresholds": self.thresholds,
            "signs": self.signs, "alphas": self.alphas,
        }

    @classmethod
    def from_state(cls, meta, arrays):
        return cls(arrays["features"], arrays["thresholds"], arrays["signs"], arrays["alphas"],
                   meta["threshold"], meta["metadata"])


def reweight(w, ys, pred, alpha):
    """One AdaBoost weight update followed by normalisation."""
    w = w * np.exp(-alpha * ys * pred)
    return w / w.sum()


def fit_adaboost(X, y, rounds=30) -> AdaBoost:
    """Stop early when a stump is no better than chance (not kept) or perfect
    (kept, with its error clipped to 1e-10 for the round weight)."""
    X = as_matrix(X)
    ys = _signed(y)
    n = X.shape[0]
    if ys.shape != (n,):
        raise ShapeError("labels must match X rows")
    if rounds < 0:
        raise ParameterError("rounds must be non-negative")
    Xt = np.ascontiguousarray(X.T)
    order = np.argsort(Xt, axis=1, kind="stable")
    w = np.full(n, 1.0 / n)
    feats, thrs, signs, alphas, errors = [], [], [], [], []
    stop = "rounds"
    for _ in range(rounds):
        f, t, s, err = _best_stump(Xt, order, ys, w)
        if f < 0 or err >= 0.5:
            stop = "no_better_than_chance"
            break
        alpha = 0.5 * np.log((1.0 - max(err, _EPS)) / max(err, _EPS))
        feats.append(f)
        thrs.append(t)
        signs.append(s)
        alphas.append(alpha)
        errors.append(float(err))
        if err <= 0.0:
            stop = "perfect_stump"
            break
        w = reweight(w, ys, stump_predict(X, f, t, s), alpha)
    threshold = 0.0
    if not alphas and np.sum(ys > 0) * 2 < n:
        threshold = 1.0  # constant score 0 never reaches it: majority negative
    meta = {"rounds": rounds, "stop": stop, "stump_errors": errors}
    return AdaBoost(feats, thrs, signs, alphas, threshold, meta)
