import json
import subprocess
import sys

import pytest

from recbound.cli import EXIT_ERROR, EXIT_FAILURE, EXIT_OK, main

from .conftest import BINARY_SEARCH


@pytest.fixture
def bs_file(tmp_path):
    p = tmp_path / "bs.rec"
    p.write_text(BINARY_SEARCH)
    return str(p)


def test_analyze_text(bs_file, capsys):
    assert main(["analyze", bs_file, "-d", "1", "--op", "log", "--skip-sanity"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("SUCCESS") and "f@1:" in out and "ln(n)" in out


def test_analyze_json_fields(bs_file, capsys):
    assert main(["analyze", bs_file, "--op", "log", "--format", "json"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert set(data) >= {"status", "bounds", "certificate", "stats"}
    assert data["status"] == "success"
    assert data["bounds"][0] == {"function": "f", "label": 1, "expression": data["bounds"][0]["expression"]}


def test_analyze_failure_exit_code(capsys):
    code = main(["analyze", "strassen", "-d", "2", "--op", "none", "-k", "2", "--skip-sanity"])
    assert code == EXIT_FAILURE
    assert "FAILURE (infeasible)" in capsys.readouterr().out


def test_errors_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.rec"
    bad.write_text("f(n) { skip")
    assert main(["analyze", str(bad)]) == EXIT_ERROR
    assert main(["analyze", str(tmp_path / "missing.rec")]) == EXIT_ERROR
    assert main(["analyze", "strassen", "-d", "2", "--op", "exp", "-r", "1"]) == EXIT_ERROR
    assert "error:" in capsys.readouterr().err


def test_dumps(bs_file, capsys):
    main(["analyze", bs_file, "--op", "log", "--dump-expansion", "--dump-triples", "--dump-gamma", "--skip-sanity"])
    out = capsys.readouterr().out
    assert "== expansion" in out and "== triples" in out and "== gamma" in out
    assert "u[ln(n)]" in out


def test_verify_pass_and_fail(tmp_path, capsys):
    good = tmp_path / "good.txt"
    good.write_text("c1 = 0\nc2 = 2/ln(2)\nc3 = 2\n")
    assert main(["verify", "binary_search", "--solution", str(good), "--op", "log"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("PASS")
    bad = tmp_path / "bad.json"
    bad.write_text('{"c1": "0", "c2": "1", "c3": "0"}')
    assert main(["verify", "binary_search", "--solution", str(bad), "--op", "log", "--format", "json"]) == EXIT_FAILURE
    data = json.loads(capsys.readouterr().out)
    assert data["status"] == "fail" and data["violations"]


def test_oracle_command(capsys):
    assert main(["oracle", "binary_search", "--args", "n=64"]) == EXIT_OK
    assert "14" in capsys.readouterr().out


def test_search_flag(capsys):
    code = main(["analyze", "karatsuba", "-k", "2", "--search-exponent", "8/5:2:1/20", "--skip-sanity"])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "probe r=2: feasible" in out and "probe r=8/5: feasible" in out


def test_check_oracle_flag(capsys):
    assert main(["analyze", "binary_search", "--op", "log", "--check-oracle"]) == EXIT_OK
    assert "oracle: ok on 64 points" in capsys.readouterr().out


def test_console_script_entry():
    proc = subprocess.run([sys.executable, "-m", "recbound.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "analyze" in proc.stdout
