import csv
import io
import json
import math

import numpy as np
import pytest

from symtree import Expression, mae
from symtree.benchmarks import BENCHMARK_IDS, benchmark, sample, write_dataset_csv
from symtree.cli import REPORT_COLUMNS, format_mae, main
from symtree.it import Dataset
from symtree.rng import derive_seed


def write_csv(path, rows, header=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(header)
        w.writerows(rows)
    return str(path)


@pytest.fixture
def quad_csv(tmp_path):
    x = np.linspace(-3, 3, 81)
    return write_csv(tmp_path / "quad.csv", [[v, v * v + v] for v in x], ["x0", "y"])


def read_report(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestFit:
    def test_quadratic(self, quad_csv, tmp_path, capsys):
        out = tmp_path / "model.json"
        report = tmp_path / "report.csv"
        assert main(["fit", quad_csv, "--out", str(out), "--report", str(report)]) == 0
        model = json.loads(out.read_text())
        assert {tuple(t["exponents"]) for t in model["terms"]} == {(1,), (2,)}
        (row,) = read_report(report)
        assert float(row["test_mae"]) < 1e-6
        assert list(row) == list(REPORT_COLUMNS)
        assert "test_mae=" in capsys.readouterr().out

    def test_missing_file(self, tmp_path):
        out = tmp_path / "model.json"
        assert main(["fit", str(tmp_path / "nope.csv"), "--out", str(out)]) == 2
        assert not out.exists()

    def test_zero_test_fraction(self, quad_csv, tmp_path):
        report = tmp_path / "r.csv"
        assert main(["fit", quad_csv, "--test-fraction", "0", "--report", str(report)]) == 0
        (row,) = read_report(report)
        assert row["test_mae"] == row["train_mae"]

    def test_target_col(self, tmp_path):
        x = np.linspace(0.5, 3, 40)
        path = write_csv(tmp_path / "t.csv", [[3 * v, v] for v in x], ["y", "x"])
        out = tmp_path / "m.json"
        assert main(["fit", path, "--target-col", "y", "--out", str(out)]) == 0
        expr = Expression.from_json(out.read_text())
        assert expr(np.array([2.0])) == pytest.approx(6.0)

    def test_ragged_csv(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x0,y\n1,2\n3\n")
        assert main(["fit", str(path)]) == 2

    def test_non_numeric(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x0,y\n1,2\n3,abc\n")
        assert main(["fit", str(path)]) == 2

    def test_non_finite(self, tmp_path):
        path = tmp_path / "nan.csv"
        path.write_text("x0,y\n1,2\n3,nan\n4,5\n")
        assert main(["fit", str(path)]) == 3

    def test_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("x0,y\n")
        assert main(["fit", str(path)]) == 3

    def test_bad_fraction(self, quad_csv):
        assert main(["fit", quad_csv, "--test-fraction", "1.5"]) == 2

    def test_usage_error(self):
        assert main(["fit"]) == 2
        assert main(["frobnicate"]) == 2


class TestBenchmark:
    def test_f1(self, tmp_path):
        out = tmp_path / "r.csv"
        assert main(["benchmark", "--ids", "F1", "--seed", "1", "--out", str(out)]) == 0
        (row,) = read_report(out)
        assert row["id"] == "F1" and float(row["test_mae"]) < 1e-6
        assert row["wall_ms"] == "0"

    def test_two_rows(self, tmp_path):
        out = tmp_path / "r.csv"
        assert main(["benchmark", "--ids", "F1,F8", "--out", str(out)]) == 0
        assert len(out.read_text().splitlines()) == 3

    def test_unknown_id(self, capsys):
        assert main(["benchmark", "--ids", "F1,F42"]) == 2
        assert "F17" in capsys.readouterr().err

    def test_byte_reproducible(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for p in (a, b):
            assert main(["benchmark", "--ids", "F1,F6", "--seed", "5", "--max-leaves", "4",
                         "--max-terms", "32", "--out", str(p)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_timing_flag(self, tmp_path):
        out = tmp_path / "r.csv"
        assert main(["benchmark", "--ids", "F8", "--timing", "--out", str(out)]) == 0
        assert int(read_report(out)[0]["wall_ms"]) >= 0

    def test_report_round_trip(self, tmp_path):
        out, models = tmp_path / "r.csv", tmp_path / "models"
        assert main(["benchmark", "--ids", "F6,F8", "--seed", "2", "--max-leaves", "4", "--max-terms", "32",
                     "--out", str(out), "--models-dir", str(models)]) == 0
        for row in read_report(out):
            expr = Expression.from_json((models / f"{row['id']}.json").read_text())
            seed = derive_seed(2, BENCHMARK_IDS.index(row["id"]))
            _, test = sample(benchmark(row["id"]), seed)
            assert row["test_mae"] == format_mae(mae(expr, test))


class TestPolyrec:
    def test_single_cell(self, tmp_path):
        out = tmp_path / "t.csv"
        assert main(["polyrec", "--dims", "1", "--orders", "1", "--bases", "1", "--trials", "5",
                     "--out", str(out)]) == 0
        assert out.read_text() == "dim,order,base_1\n1,1,5/5\n"

    def test_zero_trials(self, capsys):
        assert main(["polyrec", "--dims", "1,2", "--orders", "1,2", "--bases", "1,2", "--trials", "0"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "dim,order,base_1,base_2"
        assert all(line.endswith(",,") for line in lines[1:]) and len(lines) == 5

    def test_invalid_cells_blank(self, capsys):
        assert main(["polyrec", "--dims", "1", "--orders", "1", "--bases", "1,2", "--trials", "1"]) == 0
        assert capsys.readouterr().out.splitlines()[1] == "1,1,1/1,"

    @pytest.mark.parametrize("flags", [["--orders", "9"], ["--dims", "4"], ["--bases", "0"],
                                       ["--trials", "-1"], ["--orders", "x"]])
    def test_validation(self, flags):
        assert main(["polyrec", *flags]) == 2


class TestPredict:
    def model(self, tmp_path, doc):
        path = tmp_path / "m.json"
        path.write_text(json.dumps(doc))
        return str(path)

    def test_linear(self, tmp_path, capsys):
        m = self.model(tmp_path, {"dim": 1, "intercept": 0.0,
                                  "terms": [{"exponents": [1], "transform": "id", "weight": 3.0}]})
        data = write_csv(tmp_path / "x.csv", [[2.0]], ["x0"])
        assert main(["predict", m, data]) == 0
        assert capsys.readouterr().out == "prediction\n6\n"

    def test_nan(self, tmp_path, capsys):
        m = self.model(tmp_path, {"dim": 2, "intercept": 1.0,
                                  "terms": [{"exponents": [0, -1], "transform": "id", "weight": 1.0}]})
        data = write_csv(tmp_path / "x.csv", [[1.0, 0.0], [1.0, 2.0]], ["x0", "x1"])
        assert main(["predict", m, data]) == 0
        assert capsys.readouterr().out.splitlines()[1:] == ["nan", "1.5"]

    def test_header_only(self, tmp_path, capsys):
        m = self.model(tmp_path, {"dim": 1, "intercept": 2.0, "terms": []})
        data = tmp_path / "x.csv"
        data.write_text("x0\n")
        assert main(["predict", m, str(data)]) == 0
        assert capsys.readouterr().out == "prediction\n"

    def test_target_column_ignored(self, tmp_path, capsys):
        m = self.model(tmp_path, {"dim": 1, "intercept": 0.0,
                                  "terms": [{"exponents": [2], "transform": "id", "weight": 1.0}]})
        data = write_csv(tmp_path / "x.csv", [[3.0, 9.0]], ["x0", "y"])
        assert main(["predict", m, data]) == 0
        assert capsys.readouterr().out == "prediction\n9\n"

    def test_dimension_mismatch(self, tmp_path):
        m = self.model(tmp_path, {"dim": 1, "intercept": 0.0, "terms": []})
        data = write_csv(tmp_path / "x.csv", [[1.0, 2.0, 3.0]], ["a", "b", "c"])
        assert main(["predict", m, data]) == 2

    def test_bad_model(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text("{not json")
        data = write_csv(tmp_path / "x.csv", [[1.0]], ["x0"])
        assert main(["predict", str(path), data]) == 2

    def test_fit_then_predict(self, tmp_path, capsys):
        train, _ = sample(benchmark("F8"), 0)
        path = tmp_path / "f8.csv"
        with open(path, "w") as fh:
            write_dataset_csv(train, fh)
        out = tmp_path / "m.json"
        assert main(["fit", str(path), "--out", str(out)]) == 0
        capsys.readouterr()
        assert main(["predict", str(out), str(path)]) == 0
        preds = [float(v) for v in capsys.readouterr().out.splitlines()[1:]]
        np.testing.assert_allclose(preds, train.y, atol=1e-9)
