"""MixUp: synthetic rows as convex combinations of training-row pairs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AugmentationError, EmptyInputError, ParameterError, ShapeError
from .numerics import beta_sample


@dataclass(frozen=True)
class MixupConfig:
    pairs: int = 6000
    copies_per_pair: int = 11
    alpha: float = 0.2
    beta: float = 0.2
    mode: str = "uniform"  # or "intra_class"

    def __post_init__(self):
        if self.pairs < 0 or self.copies_per_pair < 1:
            raise ParameterError("pairs must be >= 0 and copies_per_pair >= 1")
        if not (self.alpha > 0 and self.beta > 0):
            raise ParameterError("Beta shapes must be positive")
        if self.mode not in ("uniform", "intra_class"):
            raise ParameterError(f"unknown MixUp mode {self.mode!r}")

    @property
    def n_synthetic(self):
        return self.pairs * self.copies_per_pair


def _blend(lam, a, b):
    # lam * a + (1 - lam) * b, kept inside [min(a, b), max(a, b)] despite rounding
    out = lam * a + (1.0 - lam) * b
    return np.clip(out, np.minimum(a, b), np.maximum(a, b))


def mixup_pair(x1, x2, y1, y2, lam):
    """Blend one pair: ``x' = lam*x1 + (1-lam)*x2`` and likewise for labels."""
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x1.shape != x2.shape:
        raise ShapeError(f"pair shapes differ: {x1.shape} vs {x2.shape}")
    if not 0.0 <= lam <= 1.0:
        raise ParameterError("lambda must lie in [0, 1]")
    y = _blend(lam, np.float64(y1), np.float64(y2))
    return _blend(lam, x1, x2), float(y)


def draw_pairs(y, cfg: MixupConfig, rng: np.random.Generator):
    """Parent indices ``(first, second)`` for every synthetic row.

    Pairs are sampled with replacement and each pair is repeated
    ``copies_per_pair`` times. In ``intra_class`` mode the second parent is
    drawn from the first parent's class.
    """
    y = np.asarray(y)
    n = y.shape[0]
    first = rng.integers(0, n, size=cfg.pairs)
    if cfg.mode == "uniform":
        second = rng.integers(0, n, size=cfg.pairs)
    else:
        classes = np.unique(y)
        members = {c: np.flatnonzero(y == c) for c in classes}
        for c, idx in members.items():
            if idx.size < 2:
                raise AugmentationError(f"class {c} has a single member; intra-class MixUp needs two")
        second = np.empty_like(first)
        for c, idx in members.items():
            mask = y[first] == c
            second[mask] = idx[rng.integers(0, idx.size, size=int(mask.sum()))]
    return np.repeat(first, cfg.copies_per_pair), np.repeat(second, cfg.copies_per_pair)


def augment_training(X, y, cfg: MixupConfig, rng: np.random.Generator, dtype=np.float64):
    """Append ``pairs * copies_per_pair`` MixUp rows to ``(X, y)``.

    Originals are kept verbatim as the first ``n`` rows. A fresh mixing weight
    is drawn from Beta(alpha, beta) for every synthetic row. Labels come back
    as soft labels in [0, 1].
    """
    X = np.asarray(X)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyInputError("MixUp needs a non-empty 2-D training matrix")
    if y.shape[0] != X.shape[0]:
        raise ShapeError("X and y lengths differ")
    n, d = X.shape
    m = cfg.n_synthetic
    out_X = np.empty((n + m, d), dtype=dtype)
    out_y = np.empty(n + m, dtype=np.float64)
    out_X[:n] = X
    out_y[:n] = y
    if m == 0:
        return out_X, out_y
    first, second = draw_pairs(y, cfg, rng)
    lam = beta_sample(rng, cfg.alpha, cfg.beta, size=m)
    chunk = 4096
    for start in range(0, m, chunk):
        sl = slice(start, min(m, start + chunk))
        a, b = X[first[sl]], X[second[sl]]
        out_X[n + sl.start:n + sl.stop] = _blend(lam[sl, None], a, b)
    out_y[n:] = _blend(lam, y[first], y[second])
    return out_X, out_y


def harden_labels(soft, threshold=0.5):
    """Binary labels from soft labels; ties at the threshold go positive."""
    return (np.asarray(soft, dtype=np.float64) >= threshold).astype(np.int8)
