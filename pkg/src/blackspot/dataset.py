"""Schema, CSV loading/validation, profiling and stratified folds."""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import EmptyInputError, ParameterError, RowError, SchemaError, StratificationError

KINDS = ("categorical", "ordinal", "binary", "numeric")
SCHEMA_FORMAT_VERSION = 1
N_FEATURES = 35


@dataclass(frozen=True)
class VariableSpec:
    name: str
    kind: str
    categories: tuple = ()
    column: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"variable {self.name!r}: unknown kind {self.kind!r}", self.name)
        if self.kind == "numeric":
            if self.categories:
                raise SchemaError(f"numeric variable {self.name!r} cannot list categories", self.name)
        else:
            if len(self.categories) < 2:
                raise SchemaError(f"variable {self.name!r} needs at least two categories", self.name)
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"variable {self.name!r} has duplicate categories", self.name)
            if self.kind == "binary" and len(self.categories) != 2:
                raise SchemaError(f"binary variable {self.name!r} needs exactly two categories", self.name)

    @property
    def is_numeric(self):
        return self.kind == "numeric"

    @property
    def header(self):
        return self.column or self.name


@dataclass(frozen=True)
class Schema:
    variables: tuple
    target: VariableSpec
    version: int = SCHEMA_FORMAT_VERSION

    def __post_init__(self):
        names = [v.name for v in self.variables] + [self.target.name]
        if len(set(names)) != len(names):
            raise SchemaError("variable names must be unique")
        if self.target.kind != "binary":
            raise SchemaError("target variable must be binary", self.target.name)

    @property
    def names(self):
        return [v.name for v in self.variables]

    def __getitem__(self, name):
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def to_text(self) -> str:
        """Serialise back to the INI grammar read by :func:`load_schema`."""
        lines = ["[schema]", f"version = {self.version}", f"target = {self.target.name}", ""]
        for v in (*self.variables, self.target):
            lines.append(f"[{v.name}]")
            lines.append(f"kind = {v.kind}")
            if v.column:
                lines.append(f"column = {v.column}")
            if v.categories:
                lines.append("categories =")
                lines.extend(f"    {c}" for c in v.categories)
            lines.append("")
        return "\n".join(lines)


def _parse_schema(text, source):
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(source))
    except configparser.Error as exc:
        raise SchemaError(f"{source}: {exc}") from exc
    if not parser.has_section("schema"):
        raise SchemaError(f"{source}: missing [schema] section")
    head = parser["schema"]
    version = int(head.get("version", SCHEMA_FORMAT_VERSION))
    if version > SCHEMA_FORMAT_VERSION:
        raise SchemaError(f"{source}: schema version {version} is newer than supported {SCHEMA_FORMAT_VERSION}")
    target_name = head.get("target")
    if not target_name:
        raise SchemaError(f"{source}: [schema] must name a target")
    variables, target = [], None
    for name in parser.sections():
        if name == "schema":
            continue
        sec = parser[name]
        cats = tuple(line.strip() for line in sec.get("categories", "").splitlines() if line.strip())
        spec = VariableSpec(name, sec.get("kind", "").strip(), cats, sec.get("column"))
        if name == target_name:
            target = spec
        else:
            variables.append(spec)
    if target is None:
        raise SchemaError(f"{source}: target {target_name!r} has no section", target_name)
    return Schema(tuple(variables), target, version)


def load_schema(path=None) -> Schema:
    """Read a schema file; ``None`` loads the bundled BSNG schema."""
    if path is None:
        text = resources.files("blackspot.data").joinpath("bsng_schema.ini").read_text("utf-8")
        return _parse_schema(text, "bsng_schema.ini")
    path = Path(path)
    try:
        text = path.read_text("utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read schema {path}: {exc}") from exc
    return _parse_schema(text, path)


@dataclass(frozen=True)
class Dataset:
    """Validated records.

    Categorical, ordinal and binary variables are stored as integer codes into
    the schema vocabulary; numeric variables as float64.
    """

    schema: Schema
    columns: dict
    labels: np.ndarray | None
    extra: dict = field(default_factory=dict)

    def __len__(self):
        first = self.schema.variables[0].name
        return int(self.columns[first].shape[0])

    @property
    def n_positive(self):
        return int(self.labels.sum())

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        cols = {k: v[rows] for k, v in self.columns.items()}
        labels = None if self.labels is None else self.labels[rows]
        return Dataset(self.schema, cols, labels, {k: [v[i] for i in rows] for k, v in self.extra.items()})

    def replace_columns(self, **updates) -> "Dataset":
        cols = dict(self.columns)
        cols.update(updates)
        return Dataset(self.schema, cols, self.labels, self.extra)

    def text_value(self, name, i):
        spec = self.schema[name]
        value = self.columns[name][i]
        if spec.is_numeric:
            return repr(float(value))
        return spec.categories[int(value)]

    def records(self):
        """Rows as ``{variable: text value}`` dicts (target excluded)."""
        return [{v.name: self.text_value(v.name, i) for v in self.schema.variables} for i in range(len(self))]

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for v in self.schema.variables:
            h.update(v.name.encode())
            h.update(np.ascontiguousarray(self.columns[v.name]).tobytes())
        if self.labels is not None:
            h.update(np.ascontiguousarray(self.labels).tobytes())
        return h.hexdigest()


def _match_category(index, raw):
    if raw in index:
        return index[raw]
    # numeric spellings such as "2016.0" still match category "2016"
    try:
        x = float(raw)
    except ValueError:
        return None
    for cat, idx in index.items():
        try:
            if float(cat) == x:
                return idx
        except ValueError:
            continue
    return None


def read_rows(path):
    """Return ``(header, rows)`` from a UTF-8 CSV file."""
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: file is empty (no header row)") from None
        rows = [row for row in reader if any(cell.strip() for cell in row)]
    return header, rows


def parse_rows(header, rows, schema: Schema, require_target=True, keep_extra=False) -> Dataset:
    """Validate raw CSV rows against ``schema``.

    Raises :class:`SchemaError` for a missing column and :class:`RowError`
    listing every invalid cell; never returns a partially-valid dataset.
    """
    positions = {}
    wanted = list(schema.variables) + ([schema.target] if require_target else [])
    for spec in wanted:
        if spec.header not in header:
            raise SchemaError(f"missing column {spec.header!r}", spec.header)
        positions[spec.name] = header.index(spec.header)
    has_target = schema.target.header in header
    if has_target:
        positions[schema.target.name] = header.index(schema.target.header)

    n = len(rows)
    columns = {}
    errors = []
    specs = list(schema.variables) + ([schema.target] if has_target else [])
    for spec in specs:
        pos = positions[spec.name]
        if spec.is_numeric:
            out = np.empty(n, dtype=np.float64)
        else:
            index = {c: i for i, c in enumerate(spec.categories)}
            out = np.empty(n, dtype=np.int64)
        for i, row in enumerate(rows):
            raw = row[pos].strip() if pos < len(row) else ""
            if raw == "":
                errors.append((i, spec.header, raw, "missing value"))
                continue
            if spec.is_numeric:
                try:
                    x = float(raw)
                except ValueError:
                    errors.append((i, spec.header, raw, "not a number"))
                    continue
                if not np.isfinite(x):
                    errors.append((i, spec.header, raw, "not a finite number"))
                    continue
                out[i] = x
            else:
                code = _match_category(index, raw)
                if code is None:
                    errors.append((i, spec.header, raw, "unknown category"))
                    continue
                out[i] = code
        columns[spec.name] = out
    if errors:
        errors.sort(key=lambda e: (e[0], header.index(e[1])))
        raise RowError(errors)
    labels = columns.pop(schema.target.name).astype(np.int8) if has_target else None
    extra = {}
    if keep_extra:
        known = {positions[name] for name in positions}
        for j, h in enumerate(header):
            if j not in known:
                extra[h] = [row[j] if j < len(row) else "" for row in rows]
    return Dataset(schema, columns, labels, extra)


def load_csv(path, schema: Schema, require_target=True, keep_extra=False) -> Dataset:
    header, rows = read_rows(path)
    return parse_rows(header, rows, schema, require_target=require_target, keep_extra=keep_extra)


def write_csv(ds: Dataset, path_or_buffer):
    """Write ``ds`` back out (schema order, target last); numerics use repr."""
    own = isinstance(path_or_buffer, (str, Path))
    fh = open(path_or_buffer, "w", newline="", encoding="utf-8") if own else path_or_buffer
    try:
        writer = csv.writer(fh)
        specs = list(ds.schema.variables)
        header = [v.header for v in specs]
        if ds.labels is not None:
            header.append(ds.schema.target.header)
        writer.writerow(header)
        for i in range(len(ds)):
            row = [ds.text_value(v.name, i) for v in specs]
            if ds.labels is not None:
                row.append(ds.schema.target.categories[int(ds.labels[i])])
            writer.writerow(row)
    finally:
        if own:
            fh.close()


def to_csv_text(ds: Dataset) -> str:
    buf = io.StringIO()
    write_csv(ds, buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# profiling


def profile(ds: Dataset) -> dict:
    """Per-variable summary in schema order plus target prevalence.

    Categorical-like variables report the mode (ties go to the earlier
    category) and per-category counts; numerics report mean, min and max.
    """
    n = len(ds)
    if n == 0:
        raise EmptyInputError("cannot profile an empty dataset")
    entries = []
    for spec in ds.schema.variables:
        col = ds.columns[spec.name]
        if spec.is_numeric:
            entries.append({
                "name": spec.name, "kind": spec.kind,
                "mean": float(col.mean()), "min": float(col.min()), "max": float(col.max()),
            })
        else:
            counts = np.bincount(col, minlength=len(spec.categories))
            entries.append({
                "name": spec.name, "kind": spec.kind,
                "mode": spec.categories[int(np.argmax(counts))],
                "counts": {c: int(k) for c, k in zip(spec.categories, counts)},
            })
    out = {"rows": n, "variables": entries}
    if ds.labels is not None:
        out["positives"] = ds.n_positive
        out["prevalence"] = ds.n_positive / n
    return out


def format_profile(prof: dict) -> str:
    lines = [f"{'Variable':<26} {'Kind':<12} {'Mode':<16} {'Mean':>10}"]
    for e in prof["variables"]:
        mode = e.get("mode", "-")
        mean = f"{e['mean']:.3f}" if "mean" in e else "-"
        lines.append(f"{e['name']:<26} {e['kind']:<12} {mode:<16} {mean:>10}")
    lines.append(f"rows: {prof['rows']}")
    if "positives" in prof:
        lines.append(f"positives: {prof['positives']} (prevalence {100 * prof['prevalence']:.2f}%)")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# folds


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignment: np.ndarray

    def split(self, fold):
        """Return ``(train_idx, valid_idx)`` for one fold."""
        valid = np.flatnonzero(self.assignment == fold)
        train = np.flatnonzero(self.assignment != fold)
        return train, valid

    def __iter__(self):
        return (self.split(f) for f in range(self.k))


def stratified_kfold(labels, k: int, rng: np.random.Generator) -> FoldPlan:
    """Stratified fold assignment.

    Each class is shuffled and dealt round-robin; the second class starts
    dealing where the first one stopped so total fold sizes also differ by at
    most one.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise ParameterError("k must be at least 2")
    assignment = np.empty(labels.shape[0], dtype=np.int64)
    offset = 0
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        if members.size < k:
            raise StratificationError(f"class {cls} has {members.size} members, fewer than k={k}")
        members = members[rng.permutation(members.size)]
        assignment[members] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k
    return FoldPlan(k, assignment)


# ---------------------------------------------------------------------------
# simulation


def simulate(schema: Schema, n_rows: int, n_positive: int, seed: int, signal: float = 1.0) -> Dataset:
    """Draw a schema-conforming stand-in dataset with exactly ``n_positive`` positives.

    Intended for demos, timing runs and tests while the released CSV is not
    at hand; it carries no information about real accidents. Positives shift
    the category distribution of a fixed subset of variables (strength set by
    ``signal``), so classifiers have something learnable.
    """
    if not 0 <= n_positive <= n_rows:
        raise ParameterError("n_positive must lie in [0, n_rows]")
    rng = np.random.Generator(np.random.PCG64(seed))
    labels = np.zeros(n_rows, dtype=np.int8)
    labels[rng.choice(n_rows, size=n_positive, replace=False)] = 1
    columns = {}
    numeric_ranges = {
        "Week of Year": (1, 53, True), "Time": (0, 23.99, False), "Deceased": (0, 3, True),
        "Serious injuries": (0, 3, True), "Minor injuries": (0, 5, True), "Totally injured": (0, 6, True),
        "Vehicles involved": (1, 4, True), "Road width": (3, 16, False),
    }
    for j, spec in enumerate(schema.variables):
        informative = j % 3 == 0
        if spec.is_numeric:
            lo, hi, integral = numeric_ranges.get(spec.name, (0.0, 10.0, False))
            base = rng.beta(2.0, 3.0, n_rows)
            if informative:
                base = np.where(labels == 1, np.clip(base + 0.15 * signal, 0, 1), base)
            vals = lo + base * (hi - lo)
            columns[spec.name] = np.round(vals) if integral else np.round(vals, 2)
        else:
            m = len(spec.categories)
            p0 = rng.dirichlet(np.full(m, 2.0))
            p1 = rng.dirichlet(np.full(m, 2.0)) if informative else p0
            p1 = (1 - min(signal, 1.0)) * p0 + min(signal, 1.0) * p1
            codes = np.where(
                labels == 1,
                rng.choice(m, size=n_rows, p=p1),
                rng.choice(m, size=n_rows, p=p0),
            )
            columns[spec.name] = codes.astype(np.int64)
    return Dataset(schema, columns, labels)
