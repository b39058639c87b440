import csv
import io
from fractions import Fraction

import numpy as np
import pytest

from blackspot.augment import MixupConfig
from blackspot.dataset import Dataset, _parse_schema
from blackspot.evaluation import (
    all_negative_baseline, all_negative_fraction, auc_score, benchmark, compute_metrics, cross_validate,
    default_cells, expand_grid, grid_search, render_csv, render_table, report_to_json,
)
from blackspot.errors import ParameterError

SEPARABLE = """
[schema]
target = y
[Colour]
kind = categorical
categories =
    red
    green
    blue
[Size]
kind = numeric
[y]
kind = binary
categories =
    no
    yes
"""

FAST = {"mlp": {"hidden": (8,), "epochs": 2}}
SMALL_MIX = MixupConfig(pairs=50, copies_per_pair=2)


@pytest.fixture(scope="module")
def separable():
    schema = _parse_schema(SEPARABLE, "separable")
    rng = np.random.default_rng(0)
    colour = rng.integers(0, 3, 120)
    labels = (colour == 2).astype(np.int8)
    return Dataset(schema, {"Colour": colour, "Size": rng.random(120)}, labels)


def test_perfect_scores():
    y = np.array([0, 1, 1, 0, 1])
    m = compute_metrics(y, y.astype(float), 0.5)
    assert all(m[k] == 1.0 for k in ("accuracy", "precision", "recall", "f1", "auc"))


def test_confusion_example():
    y = np.array([1, 1, 0] + [0] * 7)
    s = np.array([1, 0, 1] + [0] * 7, dtype=float)
    m = compute_metrics(y, s, 0.5)
    assert (m["tp"], m["fp"], m["fn"], m["tn"]) == (1, 1, 1, 7)
    assert 100 * m["precision"] == 50.0 and 100 * m["recall"] == 50.0 and 100 * m["f1"] == 50.0
    assert 100 * m["accuracy"] == 80.0


def test_auc_pair_counting_exact():
    rng = np.random.default_rng(1)
    y = rng.integers(0, 2, 500)
    s = rng.integers(0, 40, 500) / 7.0  # many ties
    pos, neg = s[y == 1], s[y == 0]
    num = sum(2 * int(p > q) + int(p == q) for p in pos for q in neg)
    assert auc_score(y, s) == float(Fraction(num, 2 * pos.size * neg.size))


def test_auc_needs_both_classes():
    with pytest.raises(ParameterError):
        auc_score([1, 1], [0.2, 0.3])


def test_all_negative(schema, sim_ds):
    assert all_negative_fraction(sim_ds) == Fraction(1669, 1811)
    assert round(100 * all_negative_baseline(sim_ds), 2) == 92.16
    neg = Dataset(sim_ds.schema, sim_ds.columns, np.zeros(len(sim_ds), dtype=np.int8))
    assert all_negative_baseline(neg) == 1.0
    half = Dataset(sim_ds.schema, sim_ds.columns, (np.arange(len(sim_ds)) % 2).astype(np.int8)).subset(range(1810))
    assert all_negative_baseline(half) == 0.5


def test_validation_rows_partition(small_ds):
    rep = cross_validate("naive_bayes", small_ds, "onehot", k=5, seed=0)
    assert sum(f["n_val"] for f in rep["folds"]) == len(small_ds)


def test_constant_scores_give_half_auc(small_ds):
    rep = cross_validate("adaboost", small_ds, "original", k=4, seed=1, params={"rounds": 0})
    assert [f["auc"] for f in rep["folds"]] == [0.5] * 4
    assert rep["std"]["auc"] == 0.0


def test_cross_validate_records_errors(small_ds):
    rep = cross_validate("knn", small_ds, "onehot", k=5, seed=0, params={"k": 10_000})
    assert rep["status"] == "error" and len(rep["errors"]) == 5 and rep["mean"] is None


def test_expand_grid():
    pts = expand_grid({"a": [1, 2], "b": ["x"]})
    assert pts == [{"a": 1, "b": "x"}, {"a": 2, "b": "x"}]
    with pytest.raises(ParameterError):
        expand_grid({"a": []})


def test_singleton_grid(small_ds):
    res = grid_search("knn", {"k": [3]}, small_ds, "onehot", k=3, seed=2)
    assert res.best_params == {"k": 3}
    direct = cross_validate("knn", small_ds, "onehot", k=3, seed=2, params={"k": 3})
    assert res.best_report == direct


def test_bad_learning_rate_never_selected(separable):
    grid = {"hidden": [(8,)], "epochs": [30], "learning_rate": [10.0, 1e-2]}
    res = grid_search("mlp", grid, separable, "onehot", k=3, seed=0)
    assert res.best_params["learning_rate"] == 1e-2
    again = grid_search("mlp", grid, separable, "onehot", k=3, seed=0)
    assert again.best_params == res.best_params


def test_default_layout_has_32_rows():
    cells = default_cells()
    assert len(cells) == 32
    assert [c.family for c in cells].count("rbf_svm") == 1
    assert len(default_cells(["mlp", "random_forest"], ["onehot"])) == 2


def test_benchmark_report(small_ds):
    kw = dict(families=["knn", "decision_tree"], variants=["original", "augmented"], seed=7, k=3,
              mixup=SMALL_MIX)
    rep, timings = benchmark(small_ds, **kw)
    again, _ = benchmark(small_ds, **kw)
    assert report_to_json(rep) == report_to_json(again)
    assert len(rep["cells"]) == 4 and len(timings["cells"]) == 4
    for c in rep["cells"]:
        assert {"variant", "family", "seed", "cap", "params", "published", "status"} <= set(c)
    assert rep["provenance"]["dataset_sha256"] == small_ds.content_hash()
    # augmented folds hold the originals plus pairs * copies synthetic rows
    aug = [c for c in rep["cells"] if c["variant"] == "augmented"][0]
    assert all(f["n_fit"] == f["n_train"] + 100 for f in aug["folds"])


def test_renderers(small_ds):
    rep, _ = benchmark(small_ds, families=["naive_bayes"], variants=["onehot"], seed=1, k=3)
    rows = list(csv.reader(io.StringIO(render_csv(rep))))
    assert rows[0][:4] == ["variant", "family", "model", "status"] and len(rows) == 2
    assert rows[1][-10:] == [f"{v:.2f}" for v in (48.23, 0.62, 21.19, 0.87, 79.03, 1.23, 34.26, 0.94, 60.44, 1.08)]
    text = render_table(rep)
    assert "published" in text and "87.5% quoted" in text
