from __future__ import annotations

import numpy as np

from ..errors import FitError, ParameterError
from ..numerics import as_matrix
from .base import TrainedModel, register


@register
class KNearestNeighbors(TrainedModel):
    """Euclidean k-NN; score is the positive fraction among the k nearest.

    Equal distances are resolved in favour of the lower training index.
    """

    family = "knn"
    threshold = 0.5

    def __init__(self, X, y, k=4, metadata=None):
        self.X = np.asarray(X, dtype=np.float64)
        self.y = np.asarray(y).astype(np.int8)
        self.k = int(k)
        self.metadata = metadata or {}

    def neighbours(self, X_query, budget=4_000_000):
        # distances from explicit differences (not the |a|^2 - 2ab + |b|^2
        # expansion) so that equal distances compare equal and ties are exact
        X_query = np.asarray(X_query, dtype=np.float64)
        out = np.empty((X_query.shape[0], self.k), dtype=np.int64)
        chunk = max(1, budget // max(1, self.X.size))
        for s in range(0, X_query.shape[0], chunk):
            diff = X_query[s:s + chunk, None, :] - self.X[None, :, :]
            d2 = np.einsum("qnd,qnd->qn", diff, diff)
            out[s:s + chunk] = np.argsort(d2, axis=1, kind="stable")[:, :self.k]
        return out

    def score(self, X):
        return self.y[self.neighbours(X)].mean(axis=1)

    def to_state(self):
        return {"k": self.k, "metadata": self.metadata}, {"X": self.X, "y": self.y}

    @classmethod
    def from_state(cls, meta, arrays):
        return cls(arrays["X"], arrays["y"], meta["k"], meta["metadata"])


def fit_knn(X, y, k=4) -> KNearestNeighbors:
    X = as_matrix(X)
    if X.shape[0] == 0:
        raise FitError("k-NN needs at least one training row")
    if not 1 <= k <= X.shape[0]:
        raise ParameterError(f"k={k} must lie in [1, {X.shape[0]}]")
    return KNearestNeighbors(X, y, k)


def knn_classify(X_train, y_train, X_query, k=4):
    """Labels and scores for ``X_query``; see :class:`KNearestNeighbors`."""
    model = fit_knn(X_train, y_train, k)
    scores = model.score(X_query)
    return (scores >= 0.5).astype(np.int8), scores
