import csv
import hashlib
import io
import json
import math
import subprocess
import sys

import pytest
from hypothesis import given, strategies as st

from pdpart.cli import Table, emit, main, to_csv, to_json


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestExamples:
    def test_rate(self, capsys):
        code, out, _ = run(["rate", "--alpha", "0.5", "--x", "1", "--mode", "K"], capsys)
        assert code == 0 and out.strip() == "0.25"

    def test_rate_variants(self, capsys):
        code, out, _ = run(["rate", "--what", "critical", "--x", "4"], capsys)
        assert code == 0 and float(out) == pytest.approx(0.25, abs=1e-6)
        code, out, _ = run(["rate", "--alpha", "0.5", "--x", "1", "--mode", "M", "--l", "2"], capsys)
        assert float(out) == pytest.approx(2.0)
        code, out, _ = run(["rate", "--alpha", "0.5", "--x", "1", "--what", "entropy"], capsys)
        rows = list(csv.reader(io.StringIO(out)))
        assert rows[0] == ["quantity", "value"] and float(rows[2][1]) == pytest.approx(0.25)

    def test_exact_law(self, capsys):
        code, out, _ = run(["exact-law", "--alpha", "0.5", "--theta", "0.5", "--n", "2"], capsys)
        rows = list(csv.reader(io.StringIO(out)))
        assert code == 0 and rows[0] == ["k", "prob"]
        assert [int(r[0]) for r in rows[1:]] == [1, 2]
        assert float(rows[1][1]) == pytest.approx(1 / 3, rel=1e-15)
        assert float(rows[2][1]) == pytest.approx(2 / 3, rel=1e-15)

    def test_exact_law_multiplicities(self, capsys):
        code, out, _ = run(["exact-law", "--alpha", "0.5", "--theta", "0.5", "--n", "3", "--mode",
                            "multiplicities"], capsys)
        assert code == 0 and len(out.strip().splitlines()) == 4

    def test_moments_and_mgf(self, capsys):
        code, out, _ = run(["moments", "--alpha", "0.5", "--theta", "1", "--n", "8", "--j", "3", "--m", "10",
                            "--r", "3", "--l", "2"], capsys)
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and len(rows) == 3
        for row in rows:
            assert float(row["posterior_k"]) == pytest.approx(float(row["compound_k"]), rel=1e-9)
        code, out, _ = run(["mgf", "--alpha", "0.5", "--n", "20", "--y", "0.1,0.3"], capsys)
        for row in csv.DictReader(io.StringIO(out)):
            assert float(row["log_mgf_series"]) == pytest.approx(float(row["log_mgf_exact"]), rel=1e-8)

    def test_mdp_scan_schema(self, capsys):
        code, out, _ = run(["mdp-scan", "--alpha", "0.5", "--n-grid", "1000,10000", "--lambda", "1"], capsys)
        header = out.splitlines()[0]
        assert code == 0 and header == "n,lambda,beta_n,scaled_logmgf,method,stderr"

    def test_help_documents_schema(self, capsys):
        with pytest.raises(SystemExit):
            main(["mdp-scan", "--help"])
        assert "n,lambda,beta_n,scaled_logmgf,method,stderr" in capsys.readouterr().out


class TestExitCodes:
    def test_missing_alpha(self, capsys):
        code, _, err = run(["rate", "--x", "1"], capsys)
        assert code == 1 and "usage" in err

    def test_unknown_subcommand_and_flag(self):
        with pytest.raises(SystemExit) as e:
            main(["frobnicate"])
        assert e.value.code == 1
        with pytest.raises(SystemExit) as e:
            main(["rate", "--bogus", "1"])
        assert e.value.code == 1

    def test_invalid_value(self, capsys):
        assert run(["exact-law", "--alpha", "1.5", "--n", "3"], capsys)[0] == 1

    def test_seed_required(self, capsys):
        assert run(["sample", "--alpha", "0.5", "--n", "10"], capsys)[0] == 1

    def test_resource_guard(self, capsys):
        assert run(["exact-law", "--alpha", "0.5", "--n", "20001"], capsys)[0] == 2

    def test_flagged_report(self, capsys):
        # M_1/K is far from alpha at n = 10
        code, _, _ = run(["limits", "--alpha", "0.5", "--theta", "1", "--n", "10", "--reps", "50",
                          "--seed", "1"], capsys)
        assert code == 3

    def test_io_error(self, capsys, tmp_path):
        bad = tmp_path / "missing-dir" / "x.csv"
        assert run(["exact-law", "--alpha", "0.5", "--n", "3", "--out", str(bad)], capsys)[0] == 2

    def test_console_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "pdpart", "rate", "--alpha", "0.5", "--x", "2"],
                             capture_output=True, text=True)
        assert res.returncode == 0 and float(res.stdout) == pytest.approx(1.0)


class TestEmit:
    def test_empty_table_header_only(self, tmp_path):
        path = tmp_path / "t.csv"
        emit(Table(["a", "b"]), "csv", str(path))
        assert path.read_bytes() == b"a,b\n"

    def test_csv_round_trip_precision(self):
        x = 0.1 + 0.2
        text = to_csv(Table(["v"], [[x]]))
        assert float(text.splitlines()[1]) == x

    @given(rows=st.lists(st.tuples(st.integers(-10**12, 10**12),
                                   st.floats(allow_nan=False, allow_infinity=False),
                                   st.text(max_size=8)), max_size=20))
    def test_json_round_trip(self, rows):
        t = Table(["i", "x", "s"], [list(r) for r in rows])
        back = json.loads(to_json(t, {"k": 1}))
        assert back["columns"] == t.columns and back["rows"] == t.rows and back["manifest"] == {"k": 1}

    def test_json_format_from_cli(self, capsys):
        code, out, _ = run(["exact-law", "--alpha", "0.5", "--theta", "0.5", "--n", "2", "--format", "json"],
                           capsys)
        doc = json.loads(out)
        assert doc["columns"] == ["k", "prob"] and doc["manifest"]["subcommand"] == "exact-law"


class TestManifestAndDeterminism:
    SAMPLE = ["sample", "--alpha", "0.5", "--theta", "1", "--n-grid", "10,1000", "--reps", "40", "--seed", "9"]

    def test_manifest_written(self, tmp_path, capsys):
        out = tmp_path / "s.csv"
        assert run(self.SAMPLE + ["--out", str(out)], capsys)[0] == 0
        manifest = json.loads((tmp_path / "s.csv.manifest.json").read_text())
        assert manifest["subcommand"] == "sample" and manifest["master_seed"] == 9
        assert manifest["outputs"][str(out)] == hashlib.sha256(out.read_bytes()).hexdigest()
        assert "started" in manifest and "finished" in manifest
        assert manifest["parameters"]["alpha"] == 0.5

    @pytest.mark.parametrize("fmt", ["csv", "json"])
    def test_workers_do_not_change_data(self, tmp_path, capsys, fmt):
        a, b = tmp_path / f"a.{fmt}", tmp_path / f"b.{fmt}"
        run(self.SAMPLE + ["--workers", "1", "--format", fmt, "--out", str(a)], capsys)
        run(self.SAMPLE + ["--workers", "4", "--format", fmt, "--out", str(b)], capsys)
        assert a.read_bytes() == b.read_bytes()

    def test_grid_file(self, tmp_path, capsys):
        grid = tmp_path / "g.json"
        grid.write_text(json.dumps({"n_grid": [1000, 2000], "lambda_grid": [0.5]}))
        code, out, _ = run(["mdp-scan", "--alpha", "0.5", "--grid-file", str(grid)], capsys)
        rows = list(csv.DictReader(io.StringIO(out)))
        assert [(int(r["n"]), float(r["lambda"])) for r in rows] == [(1000, 0.5), (2000, 0.5)]
        assert all(math.isfinite(float(r["scaled_logmgf"])) for r in rows)
