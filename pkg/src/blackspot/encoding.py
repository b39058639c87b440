"""Label and one-hot encodings fitted on training rows only.

Vocabularies come from the schema, so the one-hot width is identical for
every fold whatever categories the training rows happen to contain. Numeric
variables are min-max scaled with bounds observed on the fitting rows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, Schema
from .errors import AmbiguityError, EmptyInputError, ShapeError

log = logging.getLogger(__name__)

PUBLISHED_ONEHOT_WIDTH = 687


@dataclass(frozen=True)
class EncodingPlan:
    schema: Schema
    minimum: dict  # numeric variable -> min over fitting rows
    maximum: dict

    @property
    def block_sizes(self):
        return [1 if v.is_numeric else len(v.categories) for v in self.schema.variables]

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.block_sizes)]).astype(int)

    @property
    def onehot_width(self):
        return int(sum(self.block_sizes))

    @property
    def label_width(self):
        return len(self.schema.variables)

    def feature_names(self, mode="onehot"):
        names = []
        for v in self.schema.variables:
            if mode == "label" or v.is_numeric:
                names.append(v.name)
            else:
                names.extend(f"{v.name}={c}" for c in v.categories)
        return names

    def state_bytes(self) -> bytes:
        """Canonical serialisation of the fitted state (used for leakage checks)."""
        parts = [repr((name, self.minimum[name], self.maximum[name])) for name in sorted(self.minimum)]
        return "\n".join(parts).encode()

    def to_dict(self):
        return {"minimum": dict(self.minimum), "maximum": dict(self.maximum)}

    @classmethod
    def from_dict(cls, schema, data):
        return cls(schema, dict(data["minimum"]), dict(data["maximum"]))


def fit_encoding(ds: Dataset, rows=None) -> EncodingPlan:
    """Fit scalers on ``rows`` (all rows when omitted)."""
    if rows is None:
        rows = np.arange(len(ds))
    rows = np.asarray(rows)
    if rows.size == 0:
        raise EmptyInputError("encoding needs at least one fitting row")
    lo, hi = {}, {}
    for v in ds.schema.variables:
        if v.is_numeric:
            col = ds.columns[v.name][rows]
            lo[v.name] = float(col.min())
            hi[v.name] = float(col.max())
    return EncodingPlan(ds.schema, lo, hi)


def _scaled(plan, name, values):
    lo, hi = plan.minimum[name], plan.maximum[name]
    if hi == lo:
        # constant on the fitting rows
        return np.zeros_like(values, dtype=np.float64), 0
    z = (values - lo) / (hi - lo)
    outside = int(np.count_nonzero((z < 0.0) | (z > 1.0)))
    return np.clip(z, 0.0, 1.0), outside


def count_out_of_range(ds: Dataset, plan: EncodingPlan, rows=None) -> int:
    """Number of numeric cells that :func:`transform` clips into [0, 1]."""
    total = 0
    for v in plan.schema.variables:
        if v.is_numeric:
            col = ds.columns[v.name] if rows is None else ds.columns[v.name][rows]
            total += _scaled(plan, v.name, col)[1]
    return total


def transform(ds: Dataset, plan: EncodingPlan, mode="onehot", rows=None) -> np.ndarray:
    """Encode records as a dense matrix.

    ``label`` mode yields one column per variable (category index, 0/1 for
    binaries, scaled value for numerics). ``onehot`` mode expands every
    non-numeric variable into a block with exactly one active column.
    Numeric values outside the fitted range are clipped; the count is logged.
    """
    if mode not in ("label", "onehot"):
        raise ValueError(f"unknown encoding mode {mode!r}")
    if ds.schema.names != plan.schema.names:
        raise ShapeError("dataset schema does not match the encoding plan")
    n = len(ds) if rows is None else len(rows)
    width = plan.label_width if mode == "label" else plan.onehot_width
    X = np.zeros((n, width), dtype=np.float64)
    clipped = 0
    col = 0
    for v in plan.schema.variables:
        values = ds.columns[v.name] if rows is None else ds.columns[v.name][rows]
        if v.is_numeric:
            X[:, col], outside = _scaled(plan, v.name, values)
            clipped += outside
            col += 1
        elif mode == "label":
            X[:, col] = values
            col += 1
        else:
            X[np.arange(n), col + values] = 1.0
            col += len(v.categories)
    if clipped:
        log.info("clipped %d numeric value(s) outside the fitted range", clipped)
    return X


def inverse_onehot(X, plan: EncodingPlan):
    """Decode a one-hot matrix back to text records.

    Blended rows (e.g. after MixUp) decode to the arg-max category of each
    block; numerics are mapped back through the scaler.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != plan.onehot_width:
        raise ShapeError(f"expected {plan.onehot_width} columns, got shape {X.shape}")
    records = [dict() for _ in range(X.shape[0])]
    for v, start in zip(plan.schema.variables, plan.offsets[:-1]):
        if v.is_numeric:
            lo, hi = plan.minimum[v.name], plan.maximum[v.name]
            vals = lo + X[:, start] * (hi - lo)
            for rec, x in zip(records, vals):
                rec[v.name] = float(x)
            continue
        block = X[:, start:start + len(v.categories)]
        empty = np.flatnonzero(~np.any(block != 0.0, axis=1))
        if empty.size:
            raise AmbiguityError(f"row {empty[0]}: one-hot block {v.name!r} is all zero")
        for rec, code in zip(records, np.argmax(block, axis=1)):
            rec[v.name] = v.categories[int(code)]
    return records


def audit_width(schema: Schema, ds: Dataset | None = None, expected=PUBLISHED_ONEHOT_WIDTH) -> dict:
    """Explain the one-hot width of ``schema`` against an expected figure.

    With a dataset, also reports per-variable observed distinct values, unused
    vocabulary entries, and the width that would result from one-hot encoding
    every variable (numerics included) on its observed values.
    """
    rows = []
    for v in schema.variables:
        entry = {"name": v.name, "kind": v.kind, "columns": 1 if v.is_numeric else len(v.categories)}
        if ds is not None:
            col = ds.columns[v.name]
            distinct = int(np.unique(col).size)
            entry["observed_distinct"] = distinct
            if not v.is_numeric:
                used = set(np.unique(col).tolist())
                entry["unused_categories"] = [c for i, c in enumerate(v.categories) if i not in used]
        rows.append(entry)
    width = sum(r["columns"] for r in rows)
    report = {"variables": rows, "schema_width": width, "expected_width": expected, "residual": expected - width}
    if ds is not None:
        report["observed_onehot_width"] = sum(r["observed_distinct"] for r in rows)
    return report


def format_audit(report: dict) -> str:
    has_obs = "observed_onehot_width" in report
    head = f"{'Variable':<26} {'Kind':<12} {'Columns':>7}"
    if has_obs:
        head += f" {'Observed':>9}  Unused categories"
    lines = [head]
    for r in report["variables"]:
        line = f"{r['name']:<26} {r['kind']:<12} {r['columns']:>7}"
        if has_obs:
            line += f" {r['observed_distinct']:>9}  {', '.join(r.get('unused_categories', [])) or '-'}"
        lines.append(line)
    lines.append(f"schema one-hot width: {report['schema_width']}")
    lines.append(f"expected width:       {report['expected_width']}")
    lines.append(f"residual:             {report['residual']}")
    if has_obs:
        lines.append(f"width if every variable (numerics included) were one-hot on observed values: "
                     f"{report['observed_onehot_width']}")
    return "\n".join(lines)
