import csv
import json

import pytest

from blackspot.cli import main
from blackspot.dataset import write_csv

SMALL_INI = """
[run]
folds = 3

[proposed]
epochs = 2
autoencoder_epochs = 2
pairs = 60
copies_per_pair = 2

[mixup]
pairs = 60
copies_per_pair = 2

[params.mlp]
hidden = (8,)
epochs = 2
"""


@pytest.fixture
def files(tmp_path, small_ds):
    data = tmp_path / "data.csv"
    write_csv(small_ds, data)
    ini = tmp_path / "small.ini"
    ini.write_text(SMALL_INI)
    return tmp_path, data, ini


def test_validate_ok(files, capsys):
    _, data, _ = files
    assert main(["validate", "--dataset", str(data)]) == 0
    assert "240 rows, 40 positive" in capsys.readouterr().out


def test_validate_corrupted_row(files, capsys):
    tmp, data, _ = files
    rows = list(csv.reader(open(data, newline="")))
    rows[8][rows[0].index("Month")] = "Juny"
    bad = tmp / "bad.csv"
    with open(bad, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    assert main(["validate", "--dataset", str(bad)]) == 1
    assert "row 7 (line 9)" in capsys.readouterr().out


def test_validate_missing_file(tmp_path):
    assert main(["validate", "--dataset", str(tmp_path / "nope.csv")]) == 2


def test_validate_bad_schema(files, tmp_path):
    _, data, _ = files
    broken = tmp_path / "broken.ini"
    broken.write_text("[schema]\n")
    assert main(["validate", "--dataset", str(data), "--schema", str(broken)]) == 2


def test_profile_outputs(files, capsys):
    tmp, data, _ = files
    assert main(["profile", "--dataset", str(data), "--out", str(tmp / "p")]) == 0
    out = capsys.readouterr().out
    assert out == (tmp / "p" / "profile.txt").read_text()
    assert out.index("Year") < out.index("Month") < out.index("Weekday")


def test_profile_empty(files):
    tmp, data, _ = files
    empty = tmp / "empty.csv"
    empty.write_text(data.read_text().splitlines()[0] + "\n")
    assert main(["profile", "--dataset", str(empty)]) == 1


def test_seed_is_mandatory(files):
    _, data, ini = files
    for cmd in (["train", "--artifact", "x"], ["evaluate"], ["benchmark"], ["tune"]):
        assert main([*cmd, "--dataset", str(data), "--config", str(ini)]) == 2


def test_train_predict(files):
    tmp, data, ini = files
    art = tmp / "a.bin"
    assert main(["train", "--dataset", str(data), "--config", str(ini), "--seed", "3", "--artifact", str(art)]) == 0
    out1, out2 = tmp / "s1.csv", tmp / "s2.csv"
    assert main(["predict", "--dataset", str(data), "--artifact", str(art), "--output", str(out1)]) == 0
    assert main(["predict", "--dataset", str(data), "--artifact", str(art), "--output", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    rows = list(csv.reader(open(out1, newline="")))
    src = list(csv.reader(open(data, newline="")))
    assert rows[0] == src[0] + ["score", "label"]
    assert [r[:-2] for r in rows[1:]] == src[1:]
    assert all(0.0 < float(r[-2]) < 1.0 for r in rows[1:])


def test_predict_wrong_schema(files, capsys):
    tmp, data, ini = files
    art = tmp / "a.bin"
    main(["train", "--dataset", str(data), "--config", str(ini), "--seed", "3", "--artifact", str(art)])
    rows = list(csv.reader(open(data, newline="")))
    j = rows[0].index("Weekday")
    wrong = tmp / "wrong.csv"
    with open(wrong, "w", newline="") as fh:
        csv.writer(fh).writerows([r[:j] + r[j + 1:] for r in rows])
    assert main(["predict", "--dataset", str(wrong), "--artifact", str(art), "--output", str(tmp / "o.csv")]) == 1
    assert "Weekday" in capsys.readouterr().out


def test_predict_corrupt_artifact(files):
    tmp, data, _ = files
    bad = tmp / "bad.bin"
    bad.write_bytes(b"garbage")
    assert main(["predict", "--dataset", str(data), "--artifact", str(bad), "--output", str(tmp / "o.csv")]) == 1


def test_benchmark_twice_identical_and_two_rows(files):
    tmp, data, ini = files
    args = ["benchmark", "--dataset", str(data), "--config", str(ini), "--seed", "7",
            "--families", "mlp,random_forest", "--variants", "onehot"]
    assert main([*args, "--out", str(tmp / "a")]) == 0
    assert main([*args, "--out", str(tmp / "b")]) == 0
    for name in ("report.json", "report.csv", "report.txt"):
        assert (tmp / "a" / name).read_bytes() == (tmp / "b" / name).read_bytes()
    rep = json.loads((tmp / "a" / "report.json").read_text())
    assert [c["family"] for c in rep["cells"]] == ["random_forest", "mlp"]
    assert "runtime" in rep and rep["provenance"]["seed"] == 7
    assert len(list(csv.reader(open(tmp / "a" / "report.csv", newline="")))) == 3


def test_benchmark_exit_code_on_cell_error(files):
    tmp, data, ini = files
    text = ini.read_text() + "\n[params.knn]\nk = 100000\n"
    ini.write_text(text)
    code = main(["benchmark", "--dataset", str(data), "--config", str(ini), "--seed", "1",
                 "--families", "knn,naive_bayes", "--variants", "original", "--out", str(tmp / "e")])
    assert code == 1
    rep = json.loads((tmp / "e" / "report.json").read_text())
    assert [c["status"] for c in rep["cells"]] == ["ok", "error"]


def test_command_line_beats_config(files):
    tmp, data, ini = files
    ini.write_text(ini.read_text().replace("folds = 3", "folds = 3\nseed = 5"))
    assert main(["evaluate", "--dataset", str(data), "--config", str(ini), "--seed", "9",
                 "--variant", "original", "--families", "naive_bayes", "--out", str(tmp)]) == 0
    rep = json.loads((tmp / "evaluate_original.json").read_text())
    assert rep["provenance"]["seed"] == 9 and rep["cells"][0]["folds_requested"] == 3


def test_tune(files, capsys):
    tmp, data, ini = files
    grid = tmp / "grid.ini"
    grid.write_text("[grid]\nk = [3]\n")
    base = ["tune", "--dataset", str(data), "--config", str(ini), "--seed", "2", "--family", "knn",
            "--grid", str(grid), "--out", str(tmp)]
    assert main(base) == 0
    doc = json.loads((tmp / "tune_knn_onehot.json").read_text())
    assert doc["selection"] == {"k": 3}
    assert all("mean_f1" in p for p in doc["points"])
    first = (tmp / "tune_knn_onehot.json").read_bytes()
    assert main(base) == 0
    assert (tmp / "tune_knn_onehot.json").read_bytes() == first


def test_tune_empty_grid(files):
    tmp, data, ini = files
    grid = tmp / "grid.ini"
    grid.write_text("[grid]\n")
    assert main(["tune", "--dataset", str(data), "--config", str(ini), "--seed", "2", "--family", "knn",
                 "--grid", str(grid)]) == 2


def test_encode_and_audit(files, capsys):
    tmp, data, _ = files
    assert main(["encode", "--dataset", str(data), "--out", str(tmp)]) == 0
    assert (tmp / "encoded_onehot.csv").is_file()
    assert main(["audit"]) == 0
    assert "expected width" in capsys.readouterr().out


def test_usage_error_from_argparse():
    with pytest.raises(SystemExit) as info:
        main(["no-such-command"])
    assert info.value.code == 2


def test_inputs_are_not_modified(files):
    tmp, data, ini = files
    before = data.read_bytes(), ini.read_bytes()
    main(["evaluate", "--dataset", str(data), "--config", str(ini), "--seed", "1", "--variant", "onehot",
          "--families", "knn", "--out", str(tmp / "o")])
    assert (data.read_bytes(), ini.read_bytes()) == before
