import csv
import io
import subprocess
import sys

import pytest

from liftedve.cli import main
from test_modelio import WORKSHOP


@pytest.fixture
def files(tmp_path):
    m = tmp_path / "w.model"
    m.write_text(WORKSHOP)
    e = tmp_path / "w.ev"
    e.write_text("Attends(p1) = true\n")
    return m, e


def test_query_with_oracle(files, capsys):
    m, e = files
    assert main(["query", "--model", str(m), "--evidence", str(e), "--query", "Series", "--oracle", "--trace"]) == 0
    out = capsys.readouterr().out
    assert "P(Series | e) = {true: " in out
    assert "opCount=" in out
    err = float(out.split("maxRelError=")[1].split()[0])
    assert err <= 1e-7


def test_query_log_space(files, capsys):
    m, _ = files
    assert main(["query", "--model", str(m), "--query", "Attends(p2)", "--log-space"]) == 0
    assert "P(Attends(p2) | e)" in capsys.readouterr().out


@pytest.mark.parametrize(
    "argv, code, category",
    [
        (["--query", "Nope(p1)"], 2, "input"),
        (["--query", "Attends(p9)"], 2, "input"),
        (["--query", "Series", "--evidence", "/nonexistent/e"], 2, "input"),
    ],
)
def test_query_errors(files, capsys, argv, code, category):
    m, _ = files
    assert main(["query", "--model", str(m)] + argv) == code
    assert f"error [{category}]" in capsys.readouterr().err


def test_parse_error_exit(tmp_path, capsys):
    m = tmp_path / "bad.model"
    m.write_text(WORKSHOP.replace("  true true 1\n", "  true maybe 1\n"))
    assert main(["query", "--model", str(m), "--query", "Series"]) == 2
    assert "line 12" in capsys.readouterr().err


def test_oracle_size_cap_from_env(files, capsys, monkeypatch):
    m, _ = files
    monkeypatch.setenv("LIFTEDVE_GROUND_CAP", "1")
    assert main(["query", "--model", str(m), "--query", "Series", "--oracle"]) == 0
    assert "skipped:size-cap" in capsys.readouterr().out


def test_bench_rows(capsys):
    assert main(["bench", "--family", "workshop-attrs", "--n", "6", "--repeat", "2", "--oracle"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert [r["seed"] for r in rows] == ["0", "1"]
    assert all(float(r["maxRelError"]) <= 1e-7 for r in rows)


def test_bench_bad_fraction(capsys):
    assert main(["bench", "--family", "social", "--n", "4", "--evidence-frac", "2"]) == 2
    assert "error [input]" in capsys.readouterr().err


def test_plot_data_csv(tmp_path):
    p = tmp_path / "plot.csv"
    assert main(["plot-data", "--family", "competing", "--sizes", "4,8", "--csv", str(p)]) == 0
    rows = list(csv.DictReader(io.StringIO(p.read_text())))
    assert [r["N"] for r in rows] == ["4", "8"]


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "liftedve", "bench", "--family", "social", "--n", "3", "--evidence-frac", "0.5"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("family,N,evidenceFrac,seed,runtimeMs,opCount,rowsCreated,marginal")
    bad = subprocess.run([sys.executable, "-m", "liftedve", "query"], capture_output=True, text=True)
    assert bad.returncode != 0
