from __future__ import annotations

import numpy as np

from ..container import TAG_FAMILY_BASE, decode_container, encode_container, pack_arrays, unpack_arrays
from ..errors import CorruptArtifactError


class TrainedModel:
    """Common surface of every fitted baseline.

    ``score`` is higher for more black-spot-like rows; ``predict`` thresholds
    it (0.5 for probability-like scores, 0 for signed margins).
    """

    family: str = ""
    threshold: float = 0.5
    metadata: dict

    def score(self, X) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        return (self.score(X) >= self.threshold).astype(np.int8)

    # subclasses return (json-able meta, dict of arrays) and rebuild from them
    def to_state(self):  # pragma: no cover - abstract
        raise NotImplementedError

    @classmethod
    def from_state(cls, meta, arrays):  # pragma: no cover - abstract
        raise NotImplementedError


_REGISTRY: dict[str, type] = {}


def register(cls):
    _REGISTRY[cls.family] = cls
    return cls


def family_tag(family: str) -> int:
    from . import FAMILIES

    return TAG_FAMILY_BASE + FAMILIES.index(family)


def model_to_bytes(model: TrainedModel) -> bytes:
    meta, arrays = model.to_state()
    payload = pack_arrays({"family": model.family, **meta}, arrays)
    return encode_container([(model.family, family_tag(model.family), payload)])


def model_from_bytes(data: bytes) -> TrainedModel:
    from . import FAMILIES

    sections = decode_container(data)
    if len(sections) != 1:
        raise CorruptArtifactError("model container must hold exactly one section")
    name, tag, payload = sections[0]
    index = tag - TAG_FAMILY_BASE
    if not 0 <= index < len(FAMILIES) or FAMILIES[index] != name:
        raise CorruptArtifactError(f"unknown family tag {tag} for section {name!r}")
    meta, arrays = unpack_arrays(payload)
    meta.pop("family")
    return _REGISTRY[name].from_state(meta, arrays)


def stratified_subsample(y, cap, rng: np.random.Generator):
    """Sorted indices of at most ``cap`` rows keeping class proportions.

    Returns ``None`` when no subsampling is needed.
    """
    y = np.asarray(y)
    n = y.shape[0]
    if cap is None or n <= cap:
        return None
    classes, counts = np.unique(y, return_counts=True)
    take = np.floor(counts * cap / n).astype(int)
    take = np.maximum(take, 1)
    # hand out remaining slots to the largest fractional parts, then by class order
    short = cap - take.sum()
    if short > 0:
        frac = counts * cap / n - np.floor(counts * cap / n)
        for c in np.argsort(-frac, kind="stable")[:short]:
            take[c] += 1
    chosen = [rng.choice(np.flatnonzero(y == c), size=min(t, cnt), replace=False)
              for c, t, cnt in zip(classes, take, counts)]
    return np.sort(np.concatenate(chosen))
