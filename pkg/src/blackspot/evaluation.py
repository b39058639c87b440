"""Metrics, leakage-safe stratified cross-validation, grid search and the
full benchmark table.

Everything that is fitted (encoding scalers, MixUp rows, PCA, autoencoder,
model) is fitted on the training rows of a fold only; validation rows are
transformed with the fitted state and scored, never augmented.

RNG streams are derived from the master seed: fold assignment from
``(seed, "folds")``, per-fold preprocessing from ``(seed, variant, fold)``
(shared by every family so they see identical training matrices) and the
model from ``(seed, family, variant, fold)``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import logging
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from multiprocessing import get_context
from time import perf_counter

import numba
import numpy as np
import scipy
from scipy.stats import rankdata
from threadpoolctl import threadpool_limits

from . import __version__
from .augment import MixupConfig, augment_training
from .baselines import (
    DISPLAY_NAMES, FAMILIES, PCA_COMPONENTS, USES_PCA, fit_family, resolve_params,
)
from .dataset import Dataset, FoldPlan, stratified_kfold
from .encoding import EncodingPlan, fit_encoding, transform
from .errors import BlackspotError, EmptyInputError, ParameterError
from .numerics import child_seed, make_rng, pca_fit, pca_transform
from .pipeline import PipelineArtifact, ProposedConfig, fit_proposed, predict_proposed
from .reference import METRICS, QUOTED_ALL_NEGATIVE_ACCURACY, published

log = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
VARIANTS = ("original", "onehot", "augmented", "proposed")
PROPOSED = "proposed"


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_predictions(cls, labels, predicted):
        labels = np.asarray(labels).astype(bool)
        predicted = np.asarray(predicted).astype(bool)
        return cls(
            tp=int(np.sum(labels & predicted)),
            fp=int(np.sum(~labels & predicted)),
            fn=int(np.sum(labels & ~predicted)),
            tn=int(np.sum(~labels & ~predicted)),
        )


def auc_score(labels, scores) -> float:
    """Area under the ROC curve as the Mann-Whitney rank statistic (ties get
    mean ranks, i.e. count one half)."""
    labels = np.asarray(labels).astype(bool)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ParameterError("AUC is undefined when only one class is present")
    ranks = rankdata(scores)  # average ranks, 1-based
    # the rank sum of the positives is a multiple of 1/2, so 2*sum is an exact integer
    u2 = 2.0 * ranks[labels].sum() - n_pos * (n_pos + 1)
    return float(Fraction(int(round(u2)), 2 * n_pos * n_neg))


def compute_metrics(labels, scores, threshold) -> dict:
    """Accuracy, precision, recall, F1 and AUC as fractions, plus the
    confusion counts. ``predicted = scores >= threshold``; 0/0 counts as 0."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape:
        raise ParameterError("labels and scores must have equal lengths")
    if labels.size == 0:
        raise EmptyInputError("cannot score an empty fold")
    cm = ConfusionMatrix.from_predictions(labels, scores >= threshold)
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {
        "tp": cm.tp, "fp": cm.fp, "fn": cm.fn, "tn": cm.tn,
        "accuracy": (cm.tp + cm.tn) / cm.total,
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "auc": auc_score(labels, scores),
    }


def all_negative_fraction(ds: Dataset) -> Fraction:
    """Exact accuracy of always predicting "not a black spot"."""
    if len(ds) == 0:
        raise EmptyInputError("empty dataset")
    cm = ConfusionMatrix.from_predictions(ds.labels, np.zeros(len(ds), dtype=bool))
    return Fraction(cm.tp + cm.tn, cm.total)


def all_negative_baseline(ds: Dataset) -> float:
    return float(all_negative_fraction(ds))


# ---------------------------------------------------------------------------
# variants and per-fold state


@dataclass(frozen=True)
class VariantSpec:
    name: str
    encoding: str  # "label" or "onehot"
    augment: bool
    latent: bool


VARIANT_SPECS = {
    "original": VariantSpec("original", "label", False, False),
    "onehot": VariantSpec("onehot", "onehot", False, False),
    "augmented": VariantSpec("augmented", "onehot", True, False),
    "proposed": VariantSpec("proposed", "onehot", True, True),
}


def make_folds(ds: Dataset, k: int, seed: int) -> FoldPlan:
    return stratified_kfold(ds.labels, k, make_rng(seed, "folds"))


@dataclass
class FoldState:
    """Everything fitted on a fold's training rows that models share."""

    variant: str
    fold: int
    train_rows: np.ndarray
    val_rows: np.ndarray
    y_val: np.ndarray
    plan: EncodingPlan | None = None
    X_train: np.ndarray | None = None
    y_train: np.ndarray | None = None  # soft labels after MixUp
    X_val: np.ndarray | None = None
    artifact: PipelineArtifact | None = None
    _pca: object = field(default=None, repr=False)

    def pca(self):
        if self._pca is None:
            self._pca = pca_fit(self.X_train, PCA_COMPONENTS)
        return self._pca

    def digest(self) -> str:
        """Hash of every piece of fitted state (leakage checks compare it)."""
        h = hashlib.sha256()
        h.update(f"{self.variant}/{self.fold}".encode())
        h.update(np.ascontiguousarray(self.train_rows).tobytes())
        if self.artifact is not None:
            h.update(self.artifact.state_fingerprint().encode())
            return h.hexdigest()
        h.update(self.plan.state_bytes())
        h.update(np.ascontiguousarray(self.X_train).tobytes())
        h.update(np.ascontiguousarray(self.y_train).tobytes())
        p = self.pca()
        for a in (p.mean, p.components, p.explained_variance):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()


def build_fold_state(ds: Dataset, variant: str, folds: FoldPlan, fold: int, seed: int,
                     mixup: MixupConfig | None = None, proposed: ProposedConfig | None = None) -> FoldState:
    if variant not in VARIANT_SPECS:
        raise ParameterError(f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")
    spec = VARIANT_SPECS[variant]
    train, val = folds.split(fold)
    state = FoldState(variant, fold, train, val, ds.labels[val].astype(np.int8))
    if spec.latent:
        cfg = (proposed or ProposedConfig()).with_overrides(seed=child_seed(seed, PROPOSED, fold))
        state.artifact = fit_proposed(ds, train, cfg)
        return state
    state.plan = fit_encoding(ds, train)
    X = transform(ds, state.plan, spec.encoding, train)
    y = ds.labels[train].astype(np.float64)
    if spec.augment:
        X, y = augment_training(X, y, mixup or MixupConfig(), make_rng(seed, "mixup", variant, fold))
    state.X_train, state.y_train = X, y
    state.X_val = transform(ds, state.plan, spec.encoding, val)
    return state


def _fit_and_score(ds: Dataset, state: FoldState, family: str, params: dict, seed: int):
    """Scores for the validation rows, threshold, and model metadata."""
    if state.artifact is not None:
        scores, _ = predict_proposed(state.artifact, ds, state.val_rows)
        return scores, 0.5, dict(state.artifact.metadata)
    X_train, X_val = state.X_train, state.X_val
    if family in USES_PCA:
        p = state.pca()
        X_train, X_val = pca_transform(p, X_train), pca_transform(p, X_val)
    model = fit_family(family, X_train, state.y_train, params,
                       seed=child_seed(seed, family, state.variant, state.fold))
    return model.score(X_val), model.threshold, dict(model.metadata)


# ---------------------------------------------------------------------------
# job execution


@dataclass(frozen=True)
class Cell:
    variant: str
    family: str
    params: tuple = ()  # sorted (name, value) pairs; hashable and picklable

    @property
    def param_dict(self):
        return dict(self.params)


def _freeze(params):
    return tuple(sorted((params or {}).items()))


_WORKER_DATASET: Dataset | None = None
_STATE_CACHE: dict = {}


def _init_worker(ds):
    global _WORKER_DATASET
    _WORKER_DATASET = ds
    _STATE_CACHE.clear()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def _shared_state(ds, variant, folds, fold, seed, mixup):
    # consecutive jobs of one worker rarely share a state, and augmented
    # states are large, so only the most recent one is kept
    key = (variant, fold, seed, mixup)
    if key not in _STATE_CACHE:
        _STATE_CACHE.clear()
        _STATE_CACHE[key] = build_fold_state(ds, variant, folds, fold, seed, mixup)
    return _STATE_CACHE[key]


def _run_job(job):
    """One (variant, fold) with every cell that needs it; returns per-cell
    fold results. Errors are caught and recorded per cell."""
    variant, fold, cells, folds_assignment, k, seed, mixup, proposed = job
    ds = _WORKER_DATASET
    folds = FoldPlan(k, folds_assignment)
    out = []
    with threadpool_limits(1):
        for index, cell in cells:
            t0 = perf_counter()
            try:
                if variant == PROPOSED:
                    cfg = (proposed or ProposedConfig()).with_overrides(**cell.param_dict)
                    state = build_fold_state(ds, variant, folds, fold, seed, proposed=cfg)
                    n_fit = state.artifact.metadata["head_train_rows"]
                else:
                    state = _shared_state(ds, variant, folds, fold, seed, mixup)
                    n_fit = state.X_train.shape[0]
                scores, threshold, meta = _fit_and_score(ds, state, cell.family, cell.param_dict, seed)
                result = compute_metrics(state.y_val, scores, threshold)
                result.update(fold=fold, n_train=int(state.train_rows.size), n_fit=int(n_fit),
                              n_val=int(state.val_rows.size), model=_jsonable(meta))
                out.append((index, fold, result, None, perf_counter() - t0))
            except BlackspotError as exc:
                out.append((index, fold, None, f"fold {fold}: {type(exc).__name__}: {exc}",
                            perf_counter() - t0))
    return out


def run_cells(ds: Dataset, cells, k=5, seed=0, workers=1, mixup=None, proposed=None):
    """Cross-validate every cell. Returns ``(cell_reports, timings)``.

    Results do not depend on ``workers``: every job derives its RNG streams
    from the seed alone and runs with single-threaded BLAS.
    """
    cells = list(cells)
    folds = make_folds(ds, k, seed)
    jobs = []
    by_variant = {}
    for index, cell in enumerate(cells):
        by_variant.setdefault(cell.variant, []).append((index, cell))
    for variant in VARIANTS:
        group = by_variant.get(variant, [])
        if not group:
            continue
        if variant == PROPOSED:
            chunks = [[item] for item in group]
        else:
            chunks = [group]
        for chunk in chunks:
            for fold in range(k):
                jobs.append((variant, fold, chunk, folds.assignment, k, seed, mixup, proposed))
    results = []
    if workers <= 1:
        _init_worker(ds)
        for job in jobs:
            results.extend(_run_job(job))
        _STATE_CACHE.clear()
    else:
        ctx = get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx,
                                 initializer=_init_worker, initargs=(ds,)) as pool:
            for part in pool.map(_run_job, jobs):
                results.extend(part)
    per_cell = {i: {} for i in range(len(cells))}
    errors = {i: [] for i in range(len(cells))}
    timings = {i: 0.0 for i in range(len(cells))}
    for index, fold, result, error, seconds in results:
        timings[index] += seconds
        if error is not None:
            errors[index].append(error)
        else:
            per_cell[index][fold] = result
    reports = []
    for index, cell in enumerate(cells):
        reports.append(_cell_report(cell, [per_cell[index][f] for f in sorted(per_cell[index])],
                                    sorted(errors[index]), seed, k))
    return reports, [timings[i] for i in range(len(cells))]


def _cell_report(cell: Cell, folds, errors, seed, k):
    params = (ProposedConfig().with_overrides(**cell.param_dict).to_dict() if cell.family == PROPOSED
              else resolve_params(cell.family, cell.param_dict))
    report = {
        "variant": cell.variant,
        "family": cell.family,
        "model": "Proposed (autoencoder + latent MixUp + MLP)" if cell.family == PROPOSED
        else DISPLAY_NAMES[cell.family],
        "seed": seed,
        "folds_requested": k,
        "params": _jsonable(params),
        "cap": params.get("cap"),
        "status": "error" if errors else "ok",
        "errors": errors,
        "folds": folds,
        "mean": None,
        "std": None,
        "published": None,
    }
    ref = published(cell.variant, cell.family)
    if ref is not None:
        report["published"] = {m: {"mean": ref[m][0], "std": ref[m][1]} for m in METRICS}
    if folds and not errors:
        report["mean"] = {m: float(np.mean([f[m] for f in folds])) for m in METRICS}
        report["std"] = {m: float(np.std([f[m] for f in folds])) for m in METRICS}
    return report


# ---------------------------------------------------------------------------
# public entry points


def cross_validate(family: str, ds: Dataset, variant: str, k=5, seed=0, params=None,
                   workers=1, mixup=None, proposed=None) -> dict:
    """Single-cell cross-validation report (see :func:`run_cells`)."""
    if variant == PROPOSED:
        family = PROPOSED
    elif family not in FAMILIES:
        raise ParameterError(f"unknown family {family!r}")
    reports, _ = run_cells(ds, [Cell(variant, family, _freeze(params))], k, seed, workers, mixup, proposed)
    return reports[0]


def expand_grid(grid):
    """Points of a lattice given as ``{name: [values]}`` (insertion order) or
    an explicit list of dicts."""
    if isinstance(grid, dict):
        names = list(grid)
        points = [dict(zip(names, combo)) for combo in itertools.product(*(grid[n] for n in names))]
    else:
        points = [dict(p) for p in grid]
    if not points:
        raise ParameterError("grid is empty")
    return points


@dataclass
class GridResult:
    best_params: dict
    best_report: dict
    points: list  # (params, report) in grid order


def grid_search(family: str, grid, ds: Dataset, variant: str, k=5, seed=0, workers=1,
                mixup=None, proposed=None) -> GridResult:
    """Exhaustive search maximising mean F1; ties go to higher mean AUC, then
    to the earlier grid point. Errored points are never selected."""
    points = expand_grid(grid)
    fam = PROPOSED if variant == PROPOSED else family
    if fam != PROPOSED:
        for p in points:
            resolve_params(fam, p)  # fail fast on unknown names
    cells = [Cell(variant, fam, _freeze(p)) for p in points]
    reports, _ = run_cells(ds, cells, k, seed, workers, mixup, proposed)
    best = None
    for i, rep in enumerate(reports):
        if rep["mean"] is None:
            continue
        key = (rep["mean"]["f1"], rep["mean"]["auc"], -i)
        if best is None or key > best[0]:
            best = (key, i)
    if best is None:
        raise ParameterError("every grid point failed")
    i = best[1]
    return GridResult(points[i], reports[i], list(zip(points, reports)))


def default_cells(families=None, variants=None, params=None, cap=None):
    """Benchmark cells. With no family list, the published table layout:
    ten families on each of three variants (RBF SVM only on the augmented
    one) plus the proposed row."""
    variants = list(variants or VARIANTS)
    for v in variants:
        if v not in VARIANT_SPECS:
            raise ParameterError(f"unknown variant {v!r}; expected one of {', '.join(VARIANTS)}")
    params = params or {}
    cells = []
    for variant in VARIANTS:
        if variant not in variants:
            continue
        if variant == PROPOSED:
            cells.append(Cell(PROPOSED, PROPOSED, _freeze(params.get(PROPOSED))))
            continue
        if families is None:
            fams = [f for f in FAMILIES if f != "rbf_svm" or variant == "augmented"]
        else:
            fams = [f for f in FAMILIES if f in families]
            unknown = set(families) - set(FAMILIES) - {PROPOSED}
            if unknown:
                raise ParameterError(f"unknown families: {', '.join(sorted(unknown))}")
        for fam in fams:
            p = dict(params.get(fam, {}))
            if cap is not None and "cap" in resolve_params(fam):
                p.setdefault("cap", cap)
            resolve_params(fam, p)
            cells.append(Cell(variant, fam, _freeze(p)))
    return cells


NOTES = (
    "Gaussian process rows use kernel ridge regression on +/-1 targets with the same RBF kernel "
    "(length scale 0.125, gamma 32) as a scalable stand-in for GP classification.",
    "RBF SVM and the GP stand-in train on a seeded stratified subsample when the training fold "
    "exceeds the cap recorded in each cell.",
    "Validation folds are never augmented; MixUp rows exist only in training folds.",
    "Encoding scalers, PCA, MixUp and the autoencoder are refitted on every training fold.",
    "Augmented baselines mix one-hot rows; the proposed pipeline mixes autoencoder latent vectors.",
    "Decision thresholds are fixed: 0.5 for probability-like scores, 0 for signed margins.",
    "Metrics refer to the black-spot class. Std is the population std over folds.",
)


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(_jsonable(config), sort_keys=True).encode()).hexdigest()


def benchmark(ds: Dataset, families=None, variants=None, seed=0, k=5, workers=1, cap=4000,
              params=None, mixup=None, proposed=None):
    """Run the benchmark table. Returns ``(report, timings)``.

    ``report`` is a JSON-compatible dict that depends only on the inputs and
    the seed (not on ``workers``); wall-clock ``timings`` are kept apart so
    that the report stays byte-reproducible.
    """
    cells = default_cells(families, variants, params, cap)
    t0 = perf_counter()
    reports, cell_seconds = run_cells(ds, cells, k, seed, workers, mixup, proposed)
    total = perf_counter() - t0
    exact = all_negative_fraction(ds)
    config = {
        "families": families, "variants": variants or list(VARIANTS), "seed": seed, "k": k, "cap": cap,
        "params": params or {},
        "mixup": (mixup or MixupConfig()).__dict__,
        "proposed": (proposed or ProposedConfig()).to_dict(),
    }
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "tool": {"name": "blackspot", "version": __version__},
        "provenance": {
            "dataset_sha256": ds.content_hash(),
            "rows": len(ds),
            "positives": ds.n_positive,
            "config_sha256": config_hash(config),
            "seed": seed,
        },
        "config": _jsonable(config),
        "runtime": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
            "machine": platform.machine(),
        },
        "all_negative_baseline": {
            "computed": float(exact),
            "exact": f"{exact.numerator}/{exact.denominator}",
            "quoted_percent": QUOTED_ALL_NEGATIVE_ACCURACY,
            "note": "the quoted figure does not equal 1 - prevalence of the published row and "
                    "positive counts; both are shown, the computed one is authoritative here",
        },
        "notes": list(NOTES),
        "cells": reports,
    }
    timings = {
        "total_seconds": total,
        "cells": [{"variant": c.variant, "family": c.family, "seconds": s} for c, s in zip(cells, cell_seconds)],
    }
    return report, timings


# ---------------------------------------------------------------------------
# rendering


def _pct(x):
    return f"{100.0 * x:.2f}"


def _pair(mean, std, scale=100.0):
    return f"{scale * mean:6.2f} ({scale * std:5.2f})"


def report_to_json(report) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def render_table(report) -> str:
    """Aligned plain-text table; each cell is followed by its published row."""
    head = ["Variant", "Model", "Acc (std)", "Prec (std)", "Rec (std)", "F1 (std)", "AUC (std)"]
    rows = []
    for c in report["cells"]:
        if c["mean"] is not None:
            vals = [_pair(c["mean"][m], c["std"][m]) for m in METRICS]
        else:
            vals = ["error"] + [""] * 4
        rows.append([c["variant"], c["model"], *vals])
        if c["published"] is not None:
            rows.append(["", "  published", *[_pair(c["published"][m]["mean"], c["published"][m]["std"], 1.0)
                                              for m in METRICS]])
    widths = [max(len(r[i]) for r in [head, *rows]) for i in range(len(head))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(head, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in rows)
    base = report["all_negative_baseline"]
    lines.append("")
    lines.append(f"All-negative accuracy: {_pct(base['computed'])}% computed ({base['exact']}); "
                 f"{base['quoted_percent']}% quoted with the published results.")
    for c in report["cells"]:
        for e in c["errors"]:
            lines.append(f"ERROR {c['variant']}/{c['family']}: {e}")
    lines.append("")
    lines.extend(f"- {n}" for n in report["notes"])
    return "\n".join(lines) + "\n"


def render_csv(report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)  # RFC 4180: CRLF line ends, minimal quoting
    header = ["variant", "family", "model", "status"]
    header += [f"{m}{s}" for m in METRICS for s in ("", "_std")]
    header += [f"published_{m}{s}" for m in METRICS for s in ("", "_std")]
    w.writerow(header)
    for c in report["cells"]:
        row = [c["variant"], c["family"], c["model"], c["status"]]
        if c["mean"] is not None:
            row += [v for m in METRICS for v in (_pct(c["mean"][m]), _pct(c["std"][m]))]
        else:
            row += [""] * 10
        if c["published"] is not None:
            row += [f"{c['published'][m][s]:.2f}" for m in METRICS for s in ("mean", "std")]
        else:
            row += [""] * 10
        w.writerow(row)
    return buf.getvalue()
