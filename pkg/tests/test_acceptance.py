"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""

from __future__ import annotations

import subprocess
import sys
import time
from fractions import Fraction
from pathlib import Path

import pytest

from recbound.driver import (
    ORACLE_GRIDS,
    Failure,
    MeasureSolution,
    analyze,
    corpus_config,
    karatsuba_micro,
    oracle_check,
    verify,
)
from recbound.symbolic import Lin, Log, Pow, Var

F = Fraction
LEN_LOG = Log(Lin.var("j") - Lin.var("i") + 1)


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[acceptance {n}] {'PASS' if ok else 'FAIL'}: {detail}")

    return emit


def timed(cfg):
    t0 = time.perf_counter()
    out = analyze(cfg)
    return out, time.perf_counter() - t0


def coeff(sol: MeasureSolution, *factors) -> Fraction:
    key = tuple(sorted(factors, key=lambda f: f.key()))
    for m, a in sol.entry.poly.terms.items():
        if tuple(sorted(m, key=lambda f: f.key())) == key:
            return a.const
    return F(0)


def test_binary_search(report):
    out, secs = timed(corpus_config("binary_search"))
    feasible = isinstance(out, MeasureSolution)
    chk = oracle_check(out, ORACLE_GRIDS["binary_search"]) if feasible else None
    rep = verify("binary_search", {"c1": "0", "c2": "2/ln(2)", "c3": "2"}, 1, "log")
    mult = rep.certificate.multipliers[0] if rep.certificate else {}
    labels = {rep.certificate.blocks[0].basis.label(i): v for i, v in mult.items()} if rep.certificate else {}
    recovered = labels == {"1": 2, "(u[ln(n)])": rep.assignment["c2"]}
    ok = feasible and chk.ok and chk.checked == 64 and rep.passed and recovered and secs < 1
    report(1, ok, f"Binary-Search bound {out.entry.expression if feasible else out.reason}; "
           f"verify(0, 2/ln 2, 2) {'PASS' if rep.passed else 'FAIL'}; oracle n=1..64 exact; {secs:.2f}s")
    assert ok


def test_merge_sort(report):
    out, secs = timed(corpus_config("merge_sort", objective="leading"))
    feasible = isinstance(out, MeasureSolution)
    a = coeff(out, Var("j"), LEN_LOG) if feasible else None
    shape = feasible and coeff(out, Var("i"), LEN_LOG) == -a
    chk = oracle_check(out, ORACLE_GRIDS["merge_sort"]) if feasible else None
    ok = feasible and shape and a <= 50 and chk.ok and secs <= 60
    report(2, ok, f"Merge-Sort (j-i+1)ln(j-i+1) coefficient {a} (ceiling 50); "
           f"oracle {chk.checked if chk else 0} points; {secs:.2f}s")
    assert ok


def test_karatsuba(report):
    out, secs = timed(corpus_config("karatsuba"))
    feasible = isinstance(out, MeasureSolution)
    lead = coeff(out, Pow(Lin.var("n"))) if feasible else F(0)
    micro = karatsuba_micro(F(1000))
    chk = oracle_check(out, ORACLE_GRIDS["karatsuba"]) if feasible else None
    ok = feasible and lead > 0 and micro.passed and chk.ok and secs <= 30
    report(3, ok, f"Karatsuba bound {out.entry.expression if feasible else out.reason}; "
           f"micro-instance c=1000 {'PASS' if micro.passed else 'FAIL'}; {secs:.2f}s")
    if micro.passed:
        print(micro.text())
    assert ok


def test_strassen(report):
    out, secs = timed(corpus_config("strassen"))
    feasible = isinstance(out, MeasureSolution)
    lead = coeff(out, Var("n"), Pow(Lin.var("n"))) if feasible else F(0)
    chk = oracle_check(out, ORACLE_GRIDS["strassen"]) if feasible else None
    degree2 = analyze(corpus_config("strassen", d=2, op="none", r=None, skip_sanity=True))
    single = analyze(corpus_config("strassen", d=1, op="exp", r=F(2), skip_sanity=True))
    probes_fail = isinstance(degree2, Failure) and isinstance(single, Failure)
    ok = feasible and lead > 0 and chk.ok and probes_fail and secs <= 60
    report(4, ok, f"Strassen (2, exp, 1.9, 2) {'feasible' if feasible else 'FAILURE'} with n*n^1.9 coefficient "
           f"{float(lead):.4g}; degree-2 probe {degree2.status}, (1, exp, 2, 2) probe {single.status}; {secs:.2f}s")
    assert ok


def test_closest_pair(report):
    out, secs = timed(corpus_config("closest_pair"))
    feasible = isinstance(out, MeasureSolution)
    a = coeff(out, Var("j"), LEN_LOG) if feasible else F(0)
    shape = feasible and a > 0 and coeff(out, Var("i"), LEN_LOG) == -a
    chk = oracle_check(out, ORACLE_GRIDS["closest_pair"]) if feasible else None
    ok = shape and chk.ok and secs <= 120
    report(5, ok, f"Closest-Pair n*ln n coefficient {float(a):.4g}; oracle {chk.checked if chk else 0} points; {secs:.2f}s")
    assert ok


def test_termination_examples(report):
    rw = analyze(corpus_config("randwalk"))
    nl = analyze(corpus_config("nestedloop"))
    ok = isinstance(rw, MeasureSolution) and isinstance(nl, MeasureSolution)
    details = []
    if ok:
        rw_deg, nl_deg = rw.entry.poly.degree(), nl.entry.poly.degree()
        c1 = oracle_check(rw, ORACLE_GRIDS["randwalk"])
        c2 = oracle_check(nl, ORACLE_GRIDS["nestedloop"])
        ok = rw_deg == 1 and nl_deg == 2 and c1.ok and c2.ok and c1.checked == c2.checked == 100
        details = [f"randwalk degree {rw_deg}: {rw.entry.expression}", f"nestedloop degree {nl_deg}: {nl.entry.expression}"]
    report(6, ok, "; ".join(details) or "synthesis failed")
    assert ok


def test_property_suites(report):
    root = Path(__file__).resolve().parent.parent
    targets = ["tests/test_properties.py", "tests/test_expansion.py", "tests/test_frontend.py::test_round_trip"]
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *targets],
        cwd=root,
        capture_output=True,
        text=True,
    )
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()
    ok = proc.returncode == 0 and "failed" not in summary
    report(7, ok, f"property suites: {summary}")
    assert ok, proc.stdout[-3000:]
