"""CART-style Gini trees and the two bagged ensembles built from them.

Trees live in flat arrays (one row per node). The growth and routing loops
are compiled with numba because the augmented variant has tens of thousands
of rows and an unpruned tree visits every one of them at every level.
"""

from __future__ import annotations

import math

import numba
import numpy as np

from ..errors import ParameterError, ShapeError
from ..numerics import as_matrix, child_seed, make_rng
from .base import TrainedModel, register

LEAF = -1
_MIN_GAIN = 1e-13


def gini_impurity(counts) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts < 0):
        raise ParameterError("class counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise ParameterError("class counts must sum to at least 1")
    p = counts / total
    return float(1.0 - np.sum(p * p))


# ---------------------------------------------------------------------------
# compiled kernels


@numba.njit(cache=True)
def _proxy(l0, l1, r0, r1):
    # larger is better; equals W * (1 - weighted child impurity)
    return (l0 * l0 + l1 * l1) / (l0 + l1) + (r0 * r0 + r1 * r1) / (r0 + r1)


@numba.njit(cache=True)
def _pick_features(Xt, idx, start, end, max_features, d):
    """Random order over features, skipping ones constant in the node, until
    ``max_features`` usable ones are found. Returned ascending."""
    perm = np.arange(d)
    chosen = np.empty(d, dtype=np.int64)
    lo = np.empty(d)
    hi = np.empty(d)
    n_chosen = 0
    for k in range(d):
        if n_chosen >= max_features:
            break
        if max_features < d:
            j = k + np.random.randint(0, d - k)
            perm[k], perm[j] = perm[j], perm[k]
        f = perm[k]
        vmin = Xt[f, idx[start]]
        vmax = vmin
        for p in range(start + 1, end):
            v = Xt[f, idx[p]]
            if v < vmin:
                vmin = v
            elif v > vmax:
                vmax = v
        if vmax > vmin:
            chosen[n_chosen] = f
            lo[f] = vmin
            hi[f] = vmax
            n_chosen += 1
    out = np.sort(chosen[:n_chosen])
    return out, lo, hi


@numba.njit(cache=True)
def _best_exhaustive(Xt, y, w, idx, start, end, feats):
    best_proxy = -1.0
    best_f = -1
    best_t = 0.0
    m = end - start
    vals = np.empty(m)
    t0 = 0.0
    t1 = 0.0
    for p in range(start, end):
        if y[idx[p]] == 1:
            t1 += w[idx[p]]
        else:
            t0 += w[idx[p]]
    for f in feats:
        for p in range(m):
            vals[p] = Xt[f, idx[start + p]]
        order = np.argsort(vals)
        c0 = 0.0
        c1 = 0.0
        for q in range(m - 1):
            r = idx[start + order[q]]
            if y[r] == 1:
                c1 += w[r]
            else:
                c0 += w[r]
            a = vals[order[q]]
            b = vals[order[q + 1]]
            if a == b:
                continue
            score = _proxy(c0, c1, t0 - c0, t1 - c1)
            if score > best_proxy:
                best_proxy = score
                best_f = f
                thr = 0.5 * (a + b)
                if thr >= b:
                    thr = a
                best_t = thr
    return best_f, best_t, best_proxy, t0, t1


@numba.njit(cache=True)
def _best_random(Xt, y, w, idx, start, end, feats, lo, hi):
    best_proxy = -1.0
    best_f = -1
    best_t = 0.0
    t0 = 0.0
    t1 = 0.0
    for p in range(start, end):
        if y[idx[p]] == 1:
            t1 += w[idx[p]]
        else:
            t0 += w[idx[p]]
    for f in feats:
        thr = lo[f] + np.random.random() * (hi[f] - lo[f])
        if thr >= hi[f]:
            thr = lo[f]
        c0 = 0.0
        c1 = 0.0
        for p in range(start, end):
            r = idx[p]
            if Xt[f, r] <= thr:
                if y[r] == 1:
                    c1 += w[r]
                else:
                    c0 += w[r]
        score = _proxy(c0, c1, t0 - c0, t1 - c1)
        if score > best_proxy:
            best_proxy = score
            best_f = f
            best_t = thr
    return best_f, best_t, best_proxy, t0, t1


@numba.njit(cache=True)
def _grow(Xt, y, w, rows, max_features, extra, seed):
    np.random.seed(seed)
    d = Xt.shape[0]
    n = rows.shape[0]
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    count0 = np.zeros(cap)
    count1 = np.zeros(cap)
    idx = rows.copy()
    # stack of (node, start, end)
    stack = np.empty((cap, 3), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        t0 = 0.0
        t1 = 0.0
        for p in range(start, end):
            if y[idx[p]] == 1:
                t1 += w[idx[p]]
            else:
                t0 += w[idx[p]]
        count0[node] = t0
        count1[node] = t1
        if t0 == 0.0 or t1 == 0.0 or end - start < 2:
            continue
        feats, lo, hi = _pick_features(Xt, idx, start, end, max_features, d)
        if feats.shape[0] == 0:
            continue
        if extra:
            f, thr, proxy, t0, t1 = _best_random(Xt, y, w, idx, start, end, feats, lo, hi)
        else:
            f, thr, proxy, t0, t1 = _best_exhaustive(Xt, y, w, idx, start, end, feats)
        tot = t0 + t1
        gain = proxy / tot - (t0 * t0 + t1 * t1) / (tot * tot)
        if f < 0 or not gain > _MIN_GAIN:
            continue
        # partition idx[start:end] so rows with x <= thr come first
        i = start
        j = end - 1
        while i <= j:
            if Xt[f, idx[i]] <= thr:
                i += 1
            else:
                tmp = idx[i]
                idx[i] = idx[j]
                idx[j] = tmp
                j -= 1
        mid = i
        if mid == start or mid == end:
            continue
        feature[node] = f
        threshold[node] = thr
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        left[node] = lc
        right[node] = rc
        # push right first so the left subtree is numbered first
        stack[top, 0] = rc
        stack[top, 1] = mid
        stack[top, 2] = end
        top += 1
        stack[top, 0] = lc
        stack[top, 1] = start
        stack[top, 2] = mid
        top += 1
    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes],
            count0[:n_nodes], count1[:n_nodes])


@numba.njit(cache=True)
def _apply(X, feature, threshold, left, right, offsets):
    """Leaf index (global node id) of every row in every tree: (n, n_trees)."""
    n = X.shape[0]
    n_trees = offsets.shape[0] - 1
    out = np.empty((n, n_trees), dtype=np.int64)
    for t in range(n_trees):
        base = offsets[t]
        for i in range(n):
            node = 0
            while feature[base + node] != -1:
                if X[i, feature[base + node]] <= threshold[base + node]:
                    node = left[base + node]
                else:
                    node = right[base + node]
            out[i, t] = base + node
    return out


# ---------------------------------------------------------------------------
# models


class _TreeModel(TrainedModel):
    threshold = 0.5

    def __init__(self, feature, threshold, left, right, count0, count1, offsets, metadata=None):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.split_threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.count0 = np.asarray(count0, dtype=np.float64)
        self.count1 = np.asarray(count1, dtype=np.float64)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.metadata = metadata or {}

    @property
    def n_trees(self):
        return self.offsets.shape[0] - 1

    def leaf_scores(self):
        tot = self.count0 + self.count1
        return np.divide(self.count1, tot, out=np.zeros_like(tot), where=tot > 0)

    def apply(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or (self.feature.max(initial=-1) >= X.shape[1]):
            raise ShapeError("input has fewer columns than the tree was trained on")
        return _apply(X, self.feature, self.split_threshold, self.left, self.right, self.offsets)

    def score(self, X):
        return self.leaf_scores()[self.apply(X)].mean(axis=1)

    def tree_depths(self):
        depths = []
        for t in range(self.n_trees):
            base = self.offsets[t]
            stack = [(0, 0)]
            deepest = 0
            while stack:
                node, depth = stack.pop()
                deepest = max(deepest, depth)
                if self.feature[base + node] != LEAF:
                    stack.append((self.left[base + node], depth + 1))
                    stack.append((self.right[base + node], depth + 1))
            depths.append(deepest)
        return depths

    def to_state(self):
        return {"metadata": self.metadata}, {
            "feature": self.feature, "threshold": self.split_threshold,
            "left": self.left, "right": self.right,
            "count0": self.count0, "count1": self.count1, "offsets": self.offsets,
        }

    @classmethod
    def from_state(cls, meta, arrays):
        return cls(arrays["feature"], arrays["threshold"], arrays["left"], arrays["right"],
                   arrays["count0"], arrays["count1"], arrays["offsets"], meta["metadata"])


@register
class DecisionTree(_TreeModel):
    family = "decision_tree"


@register
class RandomForest(_TreeModel):
    family = "random_forest"


@register
class ExtraTrees(_TreeModel):
    family = "extra_trees"


def _resolve_bag(feature_bag, d):
    if feature_bag in (None, "all"):
        return d
    if feature_bag == "sqrt":
        return max(1, math.ceil(math.sqrt(d)))
    k = int(feature_bag)
    if not 1 <= k <= d:
        raise ParameterError(f"feature_bag must be in [1, {d}], got {k}")
    return k


def _prepare(X, y):
    X = as_matrix(X)
    y = np.asarray(y)
    if y.shape != (X.shape[0],):
        raise ShapeError("labels must match X rows")
    if X.shape[0] < 1:
        raise ParameterError("need at least one training row")
    return X, (y > 0).astype(np.int8)


def _grow_one(Xt, y, weights, max_features, extra, seed):
    rows = np.flatnonzero(weights > 0).astype(np.int64)
    return _grow(Xt, y, weights, rows, max_features, extra, np.uint32(seed % 2**32))


def _ensemble(trees, cls, metadata):
    offsets = np.zeros(len(trees) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([t[0].shape[0] for t in trees])
    cols = [np.concatenate([t[k] for t in trees]) for k in range(6)]
    return cls(*cols, offsets, metadata)


def fit_decision_tree(X, y, feature_bag="all", seed=0) -> DecisionTree:
    """Unpruned Gini tree; exhaustive midpoint thresholds, grown until pure or
    no split improves impurity. Ties keep the lower feature, then the lower
    threshold."""
    X, y = _prepare(X, y)
    d = X.shape[1]
    k = _resolve_bag(feature_bag, d)
    Xt = np.ascontiguousarray(X.T)
    tree = _grow_one(Xt, y, np.ones(X.shape[0]), k, False, child_seed(seed, "tree", 0))
    return _ensemble([tree], DecisionTree, {"feature_bag": k, "n_train": int(X.shape[0])})


def _fit_forest(X, y, n_trees, feature_bag, bootstrap, extra, seed, cls):
    X, y = _prepare(X, y)
    n, d = X.shape
    if n_trees < 1:
        raise ParameterError("n_trees must be at least 1")
    k = _resolve_bag(feature_bag, d)
    Xt = np.ascontiguousarray(X.T)
    trees = []
    oob_sum = np.zeros(n)
    oob_hits = np.zeros(n, dtype=np.int64)
    for i in range(n_trees):
        if bootstrap:
            draws = make_rng(seed, "bootstrap", i).integers(0, n, size=n)
            weights = np.bincount(draws, minlength=n).astype(np.float64)
        else:
            weights = np.ones(n)
        tree = _grow_one(Xt, y, weights, k, extra, child_seed(seed, "tree", i))
        trees.append(tree)
        if bootstrap:
            out = np.flatnonzero(weights == 0)
            if out.size:
                single = _ensemble([tree], cls, {})
                oob_sum[out] += single.score(X[out])
                oob_hits[out] += 1
    meta = {"n_trees": n_trees, "feature_bag": k, "bootstrap": bootstrap, "n_train": int(n)}
    seen = oob_hits > 0
    if bootstrap and seen.any():
        oob_label = (oob_sum[seen] / oob_hits[seen]) >= 0.5
        meta["oob_accuracy"] = float(np.mean(oob_label == (y[seen] == 1)))
        meta["oob_rows"] = int(seen.sum())
    return _ensemble(trees, cls, meta)


def fit_random_forest(X, y, n_trees=30, feature_bag="sqrt", bootstrap=True, seed=0) -> RandomForest:
    """Bootstrap-bagged Gini trees with ``ceil(sqrt(d))`` candidate features per split."""
    return _fit_forest(X, y, n_trees, feature_bag, bootstrap, False, seed, RandomForest)


def fit_extra_trees(X, y, n_trees=30, feature_bag="sqrt", bootstrap=False, seed=0) -> ExtraTrees:
    """Like the random forest, but each candidate feature gets one uniform
    random threshold in its node range instead of an exhaustive search."""
    return _fit_forest(X, y, n_trees, feature_bag, bootstrap, True, seed, ExtraTrees)
