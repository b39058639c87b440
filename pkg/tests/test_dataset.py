import csv
import io

import numpy as np
import pytest

from blackspot.dataset import (
    _parse_schema, load_csv, parse_rows, profile, read_rows, simulate, stratified_kfold, to_csv_text,
    write_csv,
)
from blackspot.errors import EmptyInputError, RowError, SchemaError, StratificationError
from blackspot.numerics import make_rng


def _rows(text):
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    return header, list(reader)


def test_bundled_schema_shape(schema):
    assert len(schema.variables) == 35
    assert schema.target.name == "Black Spot"
    assert "Month" in schema.names


def test_schema_text_round_trip(schema):
    again = _parse_schema(schema.to_text(), "<round-trip>")
    assert again == schema


def test_schema_errors():
    with pytest.raises(SchemaError):
        _parse_schema("[schema]\ntarget = y\n", "x")
    with pytest.raises(SchemaError):
        _parse_schema("[schema]\nversion = 99\ntarget = y\n[y]\nkind = binary\ncategories =\n  a\n  b\n", "x")
    with pytest.raises(SchemaError):
        _parse_schema("[schema]\ntarget = y\n[a]\nkind = weird\n[y]\nkind = binary\ncategories =\n  a\n  b\n", "x")


def test_csv_round_trip(tmp_path, sim_ds, schema):
    path = tmp_path / "sim.csv"
    write_csv(sim_ds, path)
    again = load_csv(path, schema)
    assert again.content_hash() == sim_ds.content_hash()
    assert to_csv_text(again) == path.read_bytes().decode()


def test_bad_month_reports_row(sim_ds, schema):
    header, rows = _rows(to_csv_text(sim_ds))
    col = header.index("Month")
    rows[17][col] = "Juny"
    with pytest.raises(RowError) as info:
        parse_rows(header, rows, schema)
    assert info.value.errors[0][:2] == (17, "Month")
    assert "unknown category" in str(info.value)


def test_every_bad_cell_is_listed(sim_ds, schema):
    header, rows = _rows(to_csv_text(sim_ds))
    rows[3][header.index("Time")] = "noon"
    rows[9][header.index("Weekday")] = ""
    with pytest.raises(RowError) as info:
        parse_rows(header, rows, schema)
    assert [e[0] for e in info.value.errors] == [3, 9]


def test_missing_column(sim_ds, schema):
    header, rows = _rows(to_csv_text(sim_ds))
    j = header.index("Weekday")
    header = header[:j] + header[j + 1:]
    rows = [r[:j] + r[j + 1:] for r in rows]
    with pytest.raises(SchemaError) as info:
        parse_rows(header, rows, schema)
    assert info.value.column == "Weekday"


def test_empty_file_with_header(tmp_path, schema, sim_ds):
    path = tmp_path / "empty.csv"
    path.write_text(to_csv_text(sim_ds).splitlines()[0] + "\n")
    ds = load_csv(path, schema)
    assert len(ds) == 0
    with pytest.raises(EmptyInputError):
        profile(ds)


def test_read_rows_on_zero_byte_file(tmp_path):
    p = tmp_path / "z.csv"
    p.write_text("")
    with pytest.raises(SchemaError):
        read_rows(p)


def test_simulate_counts_and_determinism(schema):
    a = simulate(schema, 300, 27, seed=4)
    b = simulate(schema, 300, 27, seed=4)
    assert len(a) == 300 and a.n_positive == 27
    assert a.content_hash() == b.content_hash()


def test_profile_single_row(sim_ds):
    one = sim_ds.subset([5])
    prof = profile(one)
    rec = one.records()[0]
    for e in prof["variables"]:
        if "mode" in e:
            assert e["mode"] == rec[e["name"]]
        else:
            assert e["mean"] == pytest.approx(float(rec[e["name"]]))


def test_profile_is_in_schema_order(sim_ds, schema):
    assert [e["name"] for e in profile(sim_ds)["variables"]] == schema.names


def test_folds_published_counts():
    labels = np.zeros(1811, dtype=np.int8)
    labels[:142] = 1
    plan = stratified_kfold(labels, 5, make_rng(0, "folds"))
    pos = [int(labels[plan.assignment == f].sum()) for f in range(5)]
    sizes = [int((plan.assignment == f).sum()) for f in range(5)]
    assert set(pos) <= {28, 29} and sum(pos) == 142
    assert max(sizes) - min(sizes) <= 1 and sum(sizes) == 1811


def test_folds_balanced_ten():
    labels = np.array([0, 1] * 5)
    plan = stratified_kfold(labels, 2, make_rng(1))
    for f in range(2):
        sel = labels[plan.assignment == f]
        assert sel.size == 5 and abs(sel.mean() - 0.5) <= 0.1 + 1e-12


def test_folds_deterministic_and_partition():
    labels = np.random.default_rng(0).integers(0, 2, 200)
    a = stratified_kfold(labels, 5, make_rng(9, "folds"))
    b = stratified_kfold(labels, 5, make_rng(9, "folds"))
    assert np.array_equal(a.assignment, b.assignment)
    valid = np.concatenate([v for _, v in a])
    assert np.array_equal(np.sort(valid), np.arange(200))


def test_folds_too_few_members():
    with pytest.raises(StratificationError):
        stratified_kfold(np.array([0, 0, 0, 0, 1, 1]), 3, make_rng(0))
