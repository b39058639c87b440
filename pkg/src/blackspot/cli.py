"""Command-line entry point.

Exit codes: 0 success, 1 data or content error, 2 usage or configuration
error. Settings come from ``--config`` (INI) and the command line; the
command line wins.

Config file layout::

    [run]
    dataset = data/BSNG.csv
    seed = 7
    families = mlp, random_forest
    variants = onehot, augmented
    workers = 4
    cap = 4000
    folds = 5
    out = results

    [params.random_forest]     ; per-family hyperparameter overrides
    n_trees = 30

    [proposed]                 ; proposed-pipeline overrides (incl. MixUp keys)
    epochs = 100

    [mixup]                    ; MixUp for the augmented variant
    pairs = 6000

    [grid]                     ; lattice for ``tune``; values are Python lists
    learning_rate = [1e-4, 1e-3]
"""

from __future__ import annotations

import argparse
import ast
import configparser
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .augment import MixupConfig
from .baselines import FAMILIES
from .dataset import load_csv, load_schema, parse_rows, read_rows, simulate, write_csv, format_profile, profile
from .encoding import audit_width, fit_encoding, format_audit, transform
from .errors import ArtifactError, BlackspotError, EmptyInputError, ParameterError, RowError, SchemaError
from .evaluation import VARIANTS, benchmark, grid_search, render_csv, render_table, report_to_json
from .pipeline import ProposedConfig, fit_proposed, load_artifact, predict_proposed, save_artifact

log = logging.getLogger("blackspot")

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration


def _literal(text):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text.strip()


def _split_list(value):
    if value is None or isinstance(value, list):
        return value
    return [v.strip() for v in str(value).split(",") if v.strip()]


def read_config(path):
    if path is None:
        return configparser.ConfigParser(interpolation=None)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise UsageError(f"malformed config {path}: {exc}") from exc
    return cp


def resolve(args, cp, name, default=None, cast=None):
    """Command line first, then ``[run]`` in the config, then ``default``."""
    value = getattr(args, name, None)
    if value is None and cp.has_option("run", name):
        value = cp.get("run", name)
    if value is None:
        return default
    if cast is not None:
        try:
            return cast(value)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid value for {name}: {value!r}") from exc
    return value


def family_params(cp) -> dict:
    out = {}
    for section in cp.sections():
        if section.startswith("params."):
            fam = section.split(".", 1)[1]
            if fam not in FAMILIES:
                raise UsageError(f"config section [{section}] names unknown family {fam!r}")
            out[fam] = {k: _literal(v) for k, v in cp.items(section)}
    return out


def proposed_config(cp, args=None) -> ProposedConfig:
    overrides = {k: _literal(v) for k, v in cp.items("proposed")} if cp.has_section("proposed") else {}
    try:
        return ProposedConfig().with_overrides(**overrides)
    except (ParameterError, TypeError) as exc:
        raise UsageError(f"[proposed]: {exc}") from exc


def mixup_config(cp) -> MixupConfig:
    overrides = {k: _literal(v) for k, v in cp.items("mixup")} if cp.has_section("mixup") else {}
    try:
        return replace(MixupConfig(), **overrides)
    except (ParameterError, TypeError) as exc:
        raise UsageError(f"[mixup]: {exc}") from exc


def _require_seed(args, cp):
    seed = resolve(args, cp, "seed", cast=int)
    if seed is None:
        raise UsageError(f"{args.command} needs --seed (there is no default seed)")
    return seed


def _schema(args, cp):
    path = resolve(args, cp, "schema")
    try:
        return load_schema(path)
    except SchemaError as exc:
        raise UsageError(str(exc)) from exc


def _dataset_path(args, cp):
    path = resolve(args, cp, "dataset")
    if path is None:
        raise UsageError(f"{args.command} needs --dataset")
    if not Path(path).is_file():
        raise UsageError(f"dataset file not found: {path}")
    return path


def _load(args, cp, require_target=True):
    schema = _schema(args, cp)
    path = _dataset_path(args, cp)
    ds = load_csv(path, schema, require_target=require_target)
    if len(ds) == 0:
        raise EmptyInputError(f"{path}: no data rows")
    return ds


def _out_dir(args, cp, default="."):
    out = Path(resolve(args, cp, "out", default))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8", newline="")
    log.info("wrote %s", path)


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args, cp):
    schema = _schema(args, cp)
    path = _dataset_path(args, cp)
    try:
        ds = load_csv(path, schema)
    except SchemaError as exc:
        print(f"schema error: {exc}")
        return EXIT_USAGE
    except RowError as exc:
        rows = sorted({e[0] for e in exc.errors})
        print(f"{len(exc.errors)} invalid cell(s) in {len(rows)} row(s)")
        for row, column, value, reason in exc.errors:
            # 0-based record index; the file line adds the header and 1-based counting
            print(f"row {row} (line {row + 2}): column {column!r}: {reason} (value {value!r})")
        return EXIT_DATA
    if len(ds) == 0:
        print("0 rows: the file has a header but no data")
        return EXIT_DATA
    print(f"{len(ds)} rows, {ds.n_positive} positive")
    return EXIT_OK


def cmd_profile(args, cp):
    ds = _load(args, cp)
    text = format_profile(profile(ds)) + "\n"
    sys.stdout.write(text)
    if resolve(args, cp, "out") is not None:
        _write(_out_dir(args, cp) / "profile.txt", text)
    return EXIT_OK


def cmd_encode(args, cp):
    ds = _load(args, cp)
    plan = fit_encoding(ds)
    mode = "label" if args.mode == "label" else "onehot"
    X = transform(ds, plan, mode)
    out = _out_dir(args, cp) / f"encoded_{mode}.csv"
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(plan.feature_names(mode) + [ds.schema.target.header])
        for row, y in zip(X, ds.labels):
            w.writerow([repr(float(x)) for x in row] + [int(y)])
    print(f"{mode} encoding: {len(ds)} rows x {X.shape[1]} columns -> {out}")
    return EXIT_OK


def cmd_audit(args, cp):
    schema = _schema(args, cp)
    ds = None
    if resolve(args, cp, "dataset") is not None:
        ds = load_csv(_dataset_path(args, cp), schema)
    print(format_audit(audit_width(schema, ds)))
    return EXIT_OK


def cmd_simulate(args, cp):
    seed = _require_seed(args, cp)
    schema = _schema(args, cp)
    ds = simulate(schema, args.rows, args.positives, seed)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(ds, out)
    print(f"wrote {len(ds)} simulated rows ({ds.n_positive} positive) to {out}")
    return EXIT_OK


def cmd_train(args, cp):
    seed = _require_seed(args, cp)
    ds = _load(args, cp)
    cfg = proposed_config(cp).with_overrides(seed=seed)
    artifact = fit_proposed(ds, None, cfg)
    out = Path(args.artifact)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_artifact(artifact, out)
    print(f"trained on {len(ds)} rows; head saw {artifact.metadata['head_train_rows']} rows -> {out}")
    return EXIT_OK


def cmd_predict(args, cp):
    artifact = load_artifact(args.artifact)
    path = _dataset_path(args, cp)
    header, rows = read_rows(path)
    try:
        ds = parse_rows(header, rows, artifact.plan.schema, require_target=False)
    except SchemaError as exc:
        print(f"input does not match the artifact schema: {exc}")
        return EXIT_DATA
    scores, labels = predict_proposed(artifact, ds)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header + ["score", "label"])
        for row, s, y in zip(rows, scores, labels):
            w.writerow(list(row) + [repr(float(s)), int(y)])
    print(f"scored {len(rows)} rows -> {out}")
    return EXIT_OK


def _families(args, cp):
    fams = _split_list(resolve(args, cp, "families"))
    if fams:
        unknown = set(fams) - set(FAMILIES) - {"proposed"}
        if unknown:
            raise UsageError(f"unknown families: {', '.join(sorted(unknown))}")
    return fams


def _variants(args, cp, name="variants"):
    vals = _split_list(resolve(args, cp, name))
    if vals:
        unknown = set(vals) - set(VARIANTS)
        if unknown:
            raise UsageError(f"unknown variants: {', '.join(sorted(unknown))}")
    return vals


def _run_table(args, cp, variants, families, stem):
    seed = _require_seed(args, cp)
    ds = _load(args, cp)
    report, timings = benchmark(
        ds,
        families=families,
        variants=variants,
        seed=seed,
        k=resolve(args, cp, "folds", 5, int),
        workers=resolve(args, cp, "workers", 1, int),
        cap=resolve(args, cp, "cap", 4000, int),
        params=family_params(cp),
        mixup=mixup_config(cp),
        proposed=proposed_config(cp),
    )
    out = _out_dir(args, cp)
    _write(out / f"{stem}.json", report_to_json(report))
    _write(out / f"{stem}.csv", render_csv(report))
    table = render_table(report)
    _write(out / f"{stem}.txt", table)
    _write(out / f"{stem}_timings.json", json.dumps(timings, indent=2) + "\n")
    sys.stdout.write(table)
    return EXIT_DATA if any(c["status"] != "ok" for c in report["cells"]) else EXIT_OK


def cmd_evaluate(args, cp):
    variant = resolve(args, cp, "variant", "onehot")
    if variant not in VARIANTS:
        raise UsageError(f"unknown variant {variant!r}")
    return _run_table(args, cp, [variant], _families(args, cp), f"evaluate_{variant}")


def cmd_benchmark(args, cp):
    return _run_table(args, cp, _variants(args, cp), _families(args, cp), "report")


def read_grid(args, cp) -> dict:
    grid_cp = read_config(args.grid) if args.grid else cp
    if not grid_cp.has_section("grid"):
        raise UsageError("tune needs a [grid] section (in --grid or --config)")
    grid = {}
    for key, value in grid_cp.items("grid"):
        vals = _literal(value)
        if not isinstance(vals, (list, tuple)):
            vals = [vals]
        grid[key] = list(vals)
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise UsageError("grid is empty")
    return grid


def cmd_tune(args, cp):
    seed = _require_seed(args, cp)
    grid = read_grid(args, cp)
    ds = _load(args, cp)
    variant = resolve(args, cp, "variant", "onehot")
    family = args.family or ("proposed" if variant == "proposed" else None)
    if family is None:
        raise UsageError("tune needs --family (or --variant proposed)")
    try:
        result = grid_search(family, grid, ds, variant, resolve(args, cp, "folds", 5, int), seed,
                             resolve(args, cp, "workers", 1, int), mixup_config(cp), proposed_config(cp))
    except ParameterError as exc:
        raise UsageError(str(exc)) from exc
    doc = {
        "family": family, "variant": variant, "seed": seed,
        "selection": result.best_params,
        "selected_mean": result.best_report["mean"],
        "points": [{"params": p, "status": r["status"],
                    "mean_f1": None if r["mean"] is None else r["mean"]["f1"],
                    "mean_auc": None if r["mean"] is None else r["mean"]["auc"],
                    "errors": r["errors"]} for p, r in result.points],
    }
    out = _out_dir(args, cp)
    _write(out / f"tune_{family}_{variant}.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    for p, r in result.points:
        f1 = "error" if r["mean"] is None else f"{100 * r['mean']['f1']:.2f}"
        print(f"{json.dumps(p, sort_keys=True)}  F1={f1}")
    print(f"selected: {json.dumps(result.best_params, sort_keys=True)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [run] defaults and parameter sections")
    common.add_argument("--schema", help="schema INI (default: the bundled one)")
    common.add_argument("--dataset", help="input CSV")
    common.add_argument("--seed", type=int, help="master seed (required by stochastic commands)")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--variant", help=f"one of {', '.join(VARIANTS)}")
    run.add_argument("--families", help="comma-separated family names")
    run.add_argument("--workers", type=int, help="parallel worker processes")
    run.add_argument("--cap", type=int, help="row cap for the kernel methods")
    run.add_argument("--folds", type=int, help="number of CV folds (default 5)")

    p = argparse.ArgumentParser(prog="blackspot", description="Black-spot classification toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="check a CSV against the schema")
    sub.add_parser("profile", parents=[common], help="per-variable mode/mean summary")
    sp = sub.add_parser("encode", parents=[common], help="write the encoded matrix")
    sp.add_argument("--mode", choices=["onehot", "label"], default="onehot")
    sub.add_parser("audit", parents=[common], help="explain the one-hot width")
    sp = sub.add_parser("simulate", parents=[common], help="write a schema-conforming synthetic CSV")
    sp.add_argument("--rows", type=int, default=1811)
    sp.add_argument("--positives", type=int, default=142)
    sp.add_argument("--output", required=True, help="CSV path to write")
    sp = sub.add_parser("train", parents=[common], help="fit the proposed pipeline on all rows")
    sp.add_argument("--artifact", required=True, help="artifact path to write")
    sp = sub.add_parser("predict", parents=[common], help="score rows with a saved artifact")
    sp.add_argument("--artifact", required=True)
    sp.add_argument("--output", required=True, help="scored CSV path")
    sub.add_parser("evaluate", parents=[common, run], help="cross-validate families on one variant")
    sp = sub.add_parser("benchmark", parents=[common, run], help="full results table")
    sp.add_argument("--variants", help="comma-separated variants")
    sp = sub.add_parser("tune", parents=[common, run], help="grid search maximising F1")
    sp.add_argument("--family")
    sp.add_argument("--grid", help="INI file with a [grid] section")
    return p


COMMANDS = {
    "validate": cmd_validate, "profile": cmd_profile, "encode": cmd_encode, "audit": cmd_audit,
    "simulate": cmd_simulate, "train": cmd_train, "predict": cmd_predict, "evaluate": cmd_evaluate,
    "benchmark": cmd_benchmark, "tune": cmd_tune,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cp = read_config(args.config)
        return COMMANDS[args.command](args, cp)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RowError, SchemaError, EmptyInputError, ArtifactError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BlackspotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
