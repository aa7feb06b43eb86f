"""CLI contract: ingestion errors, exit codes, JSON schema, determinism."""

import json

import numpy as np
import pytest

from empbridge import Dataset
from empbridge.cli import ingest_csv, main, write_csv
from empbridge.errors import DuplicateColumn, InputError, NonNumericField, ParseError


@pytest.fixture
def slope_csv(tmp_path):
    path = tmp_path / "data.csv"
    rng = np.random.default_rng(0)
    x = np.sort(rng.random(30))
    y = 2.0 * x + 1.0 + rng.standard_normal(30) * 0.5
    lines = ["x,y"] + [f"{float(xi)!r},{float(yi)!r}" for xi, yi in zip(x, y)]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


class TestIngestCsv:
    def test_smoke_order_by_covariate(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("x,y\n1,2\n3,4\n2,5\n")
        dataset, order_mode = ingest_csv(str(path), response="y", order_by="x")
        assert dataset.n == 3 and dataset.m == 1
        assert order_mode == 0  # x is a covariate and the ordering column
        np.testing.assert_array_equal(dataset.x[:, 0], [1.0, 3.0, 2.0])  # file order kept

    def test_external_key_mode(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("k,x,y\n0.3,1,2\n0.1,3,4\n0.2,2,5\n")
        dataset, order_mode = ingest_csv(str(path), response="y", order_by="k",
                                         covariates=["x"])
        assert order_mode == "key"
        assert dataset.m == 1
        np.testing.assert_array_equal(dataset.order_key, [0.3, 0.1, 0.2])

    def test_nan_field_names_location(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("x,y\n1,2\nNaN,4\n")
        with pytest.raises(NonNumericField, match="line 3.*'x'"):
            ingest_csv(str(path), response="y")

    def test_text_field_rejected(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("x,y\n1,2\noops,4\n")
        with pytest.raises(NonNumericField, match="oops"):
            ingest_csv(str(path), response="y")

    def test_duplicate_header(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("x,x,y\n1,2,3\n")
        with pytest.raises(DuplicateColumn):
            ingest_csv(str(path), response="y")

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("x,y\n1,2\n3\n")
        with pytest.raises(ParseError, match="line 3"):
            ingest_csv(str(path), response="y")

    def test_unknown_response(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("x,y\n1,2\n3,4\n")
        with pytest.raises(InputError):
            ingest_csv(str(path), response="z")

    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        original = Dataset(x=rng.standard_normal((8, 2)), y=rng.standard_normal(8),
                           order_key=rng.random(8))
        path = tmp_path / "rt.csv"
        write_csv(original, str(path), key_name="k",
                  covariate_names=["a", "b"], response_name="resp")
        dataset, order_mode = ingest_csv(str(path), response="resp", order_by="k",
                                         covariates=["a", "b"])
        assert order_mode == "key"
        np.testing.assert_array_equal(dataset.x, original.x)
        np.testing.assert_array_equal(dataset.y, original.y)
        np.testing.assert_array_equal(dataset.order_key, original.order_key)


class TestCmdTest:
    def test_json_output_schema(self, slope_csv, capsys):
        code = main(["test", "--input", slope_csv, "--response", "y",
                     "--order-by", "x"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) == {"n", "m", "d", "grid", "q", "Q", "statistic",
                                "p_value", "sigma_hat2", "theta_hat"}
        assert payload["n"] == 30 and payload["m"] == 2 and payload["d"] == 3
        assert len(payload["Q"]) == 9

    def test_worked_intercept_only_example(self, tmp_path, capsys):
        path = tmp_path / "two.csv"
        path.write_text("y\n0\n2\n")
        code = main(["test", "--input", str(path), "--response", "y",
                     "--covariates", "none", "--d", "1"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["statistic"] == pytest.approx(2.0, rel=1e-12)

    def test_text_output(self, slope_csv, capsys):
        code = main(["test", "--input", slope_csv, "--response", "y",
                     "--order-by", "x", "--output", "text"])
        assert code == 0
        out = capsys.readouterr().out
        assert "statistic" in out and "p_value" in out and "decision" in out

    def test_missing_file_exit_2(self, capsys):
        code = main(["test", "--input", "/nonexistent.csv", "--response", "y"])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_nan_field_exit_2(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("x,y\n1,2\nNaN,4\n3,5\n")
        code = main(["test", "--input", str(path), "--response", "y"])
        assert code == 2
        assert "'x'" in capsys.readouterr().err

    def test_degenerate_residuals_exit_1(self, tmp_path, capsys):
        path = tmp_path / "exact.csv"
        rows = "\n".join(f"{v},{3 * v}" for v in range(1, 8))
        path.write_text("x,y\n" + rows + "\n")
        code = main(["test", "--input", str(path), "--response", "y",
                     "--order-by", "x"])
        assert code == 1
        assert "residuals" in capsys.readouterr().err

    def test_d_too_large_exit_2(self, tmp_path, capsys):
        path = tmp_path / "small.csv"
        path.write_text("x,y\n1,2\n2,3\n3,5\n")
        code = main(["test", "--input", str(path), "--response", "y",
                     "--order-by", "x", "--d", "5"])
        assert code == 2

    def test_bad_alpha_exit_2(self, slope_csv):
        assert main(["test", "--input", slope_csv, "--response", "y",
                     "--alpha", "1.5"]) == 2

    def test_emit_bridge_tsv(self, slope_csv, tmp_path, capsys):
        out = tmp_path / "bridge.tsv"
        code = main(["test", "--input", slope_csv, "--response", "y",
                     "--order-by", "x", "--emit-bridge", str(out)])
        assert code == 0
        capsys.readouterr()
        lines = out.read_text().splitlines()
        assert lines[0] == "t\tz0"
        assert len(lines) == 32  # header + n+1 nodes
        first = lines[1].split("\t")
        assert float(first[0]) == 0.0 and float(first[1]) == 0.0


class TestCmdSimulate:
    def test_level_boundary_alpha(self, capsys):
        code = main(["simulate", "level", "--n", "40", "--reps", "10",
                     "--alpha", "0", "--seed", "3"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["rejection_rate"] == 0.0
        assert set(payload) == {"spec", "n", "reps", "d", "alpha",
                                "rejection_rate", "standard_error", "failures"}

    def test_level_byte_identical(self, capsys):
        argv = ["simulate", "level", "--n", "50", "--reps", "20", "--seed", "9"]
        assert main(argv) == 0
        first = capsys.readouterr().out
        assert main(argv) == 0
        assert capsys.readouterr().out == first

    def test_covariance_report(self, capsys):
        code = main(["simulate", "covariance", "--n", "60", "--reps", "30",
                     "--grid", "0.5", "--seed", "4"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) == {"spec", "n", "reps", "grid", "empirical",
                                "theoretical", "max_abs_deviation", "failures"}
        assert payload["theoretical"][0][0] == pytest.approx(0.0625, abs=1e-12)

    def test_power_requires_mean_shift(self, capsys):
        code = main(["simulate", "power", "--n", "40", "--reps", "5", "--seed", "1"])
        assert code == 2

    def test_power_with_shift(self, capsys):
        code = main(["simulate", "power", "--n", "200", "--reps", "30", "--seed", "1",
                     "--mean-shift", "quadratic:3"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["rejection_rate"] > 0.2

    def test_external_order_flags(self, capsys):
        code = main(["simulate", "level", "--n", "50", "--reps", "10", "--seed", "2",
                     "--kind", "external-order", "--h", "0,1", "--theta", "1,1"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["spec"]["kind"] == "external-order"

    def test_bad_spec_exit_2(self, capsys):
        code = main(["simulate", "level", "--n", "50", "--reps", "10",
                     "--theta", "1", "--seed", "0"])  # slope missing
        assert code == 2
