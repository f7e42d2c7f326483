import json
from fractions import Fraction

import pytest

from recbound.driver import (
    AnalysisConfig,
    Failure,
    MeasureSolution,
    analyze,
    corpus_config,
    corpus_names,
    karatsuba_micro,
    load_source,
    oracle_check,
    parse_coefficient,
    read_coefficients,
    search_exponent,
    verify,
)
from recbound.template import TemplateError

from .conftest import BINARY_SEARCH, analysis

F = Fraction


def test_config_validation():
    with pytest.raises(ValueError):
        AnalysisConfig(BINARY_SEARCH, k=0)
    with pytest.raises(ValueError):
        AnalysisConfig(BINARY_SEARCH, d=0)
    with pytest.raises(ValueError):
        AnalysisConfig(BINARY_SEARCH, search=(F(1), F(2), F(1, 20)))
    with pytest.raises(ValueError):
        AnalysisConfig(BINARY_SEARCH, search=(F(2), F(3, 2), F(1, 20)))


def test_exponent_one_is_a_precondition_error():
    with pytest.raises(TemplateError):
        analyze(corpus_config("strassen", r=F(1), skip_sanity=True))


def test_binary_search_shape():
    sol = analysis(BINARY_SEARCH, 1, "log")
    assert isinstance(sol, MeasureSolution)
    a = sol.certificate.assignment
    assert a["c1"] == 0
    assert a["c2"] * F(34657, 50000) >= 2  # forced by the constant row of the step triple at n >= 2
    data = sol.to_json()
    assert set(data) == {"status", "bounds", "certificate", "stats"}
    json.dumps(data)


def test_determinism():
    a = analyze(AnalysisConfig(BINARY_SEARCH, 1, "log", skip_sanity=True))
    b = analyze(AnalysisConfig(BINARY_SEARCH, 1, "log", skip_sanity=True))
    assert a.certificate.assignment == b.certificate.assignment
    assert [x.expression for x in a.bounds] == [x.expression for x in b.bounds]


def test_failure_result():
    out = analyze(corpus_config("strassen", d=2, op="none", r=None, skip_sanity=True))
    assert isinstance(out, Failure) and out.reason == "infeasible"
    assert out.to_json()["bounds"] == []


def test_verify_reference_assignment():
    rep = verify("binary_search", {"c1": "0", "c2": "2/ln(2)", "c3": "2"}, 1, "log")
    assert rep.passed, rep.lines()
    assert rep.rounded == ["c2"]
    assert 0 < rep.assignment["c2"] - F(2) / F(0.6931471805599453) < F(1, 10**9)
    nonneg = rep.certificate.multipliers[0]
    labels = {rep.certificate.blocks[0].basis.label(i): v for i, v in nonneg.items()}
    assert labels == {"1": 2, "(u[ln(n)])": rep.assignment["c2"]}
    assert rep.oracle.ok and rep.oracle.checked == 64


def test_verify_rejects_weak_assignment():
    rep = verify("binary_search", {"c1": "0", "c2": "1", "c3": "0"}, 1, "log")
    assert not rep.passed
    assert any("step" in f for f in rep.failures)
    assert rep.oracle.counterexamples


def test_verify_key_mismatch():
    with pytest.raises(ValueError, match="missing"):
        verify(BINARY_SEARCH, {"c1": "0", "c2": "1"}, 1, "log")


def test_coefficients():
    assert parse_coefficient("3/4") == (F(3, 4), True)
    v, exact = parse_coefficient("2/ln(2)")
    assert not exact and v > 2 / 0.6931471805599453
    with pytest.raises(ValueError):
        parse_coefficient("__import__('os')")


def test_read_coefficients(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("c1 = 0\n# comment\nc2: 1/2\n")
    assert read_coefficients(p) == {"c1": "0", "c2": "1/2"}
    q = tmp_path / "c.json"
    q.write_text('{"c1": "1/3"}')
    assert read_coefficients(q) == {"c1": "1/3"}


def test_karatsuba_micro():
    rep = karatsuba_micro(F(1000))
    assert rep.passed and rep.decomposition
    assert not karatsuba_micro(F(1)).passed


def test_search_returns_lo_when_feasible():
    res = search_exponent(corpus_config("karatsuba", r=None, search=(F(8, 5), F(2), F(1, 20)), skip_sanity=True))
    assert res.r == F(8, 5)
    assert res.probes == [(F(2), True), (F(8, 5), True)]


def test_search_all_infeasible():
    res = search_exponent(corpus_config("strassen", d=1, r=None, search=(F(3, 2), F(2), F(1, 20)), skip_sanity=True))
    assert res.r is None and res.outcome.reason == "all-infeasible"
    assert res.probes == [(F(2), False)]


def test_corpus_loading():
    names = corpus_names()
    assert {"binary_search", "merge_sort", "karatsuba", "strassen", "closest_pair", "randwalk", "nestedloop"} <= set(names)
    assert "mergesort" in load_source("merge_sort")
    with pytest.raises(FileNotFoundError):
        load_source("no_such_program")


def test_oracle_check_catches_bad_bound():
    rep = verify("binary_search", {"c1": "0", "c2": "0", "c3": "1"}, 1, "log")
    assert not rep.oracle.ok


def test_karatsuba_search_bisection_is_consistent():
    res = search_exponent(corpus_config("karatsuba", r=None, search=(F(3, 2), F(2), F(1, 20)), skip_sanity=True))
    assert res.r is not None and F(3, 2) < res.r <= F(8, 5)
    feasible = [r for r, ok in res.probes if ok]
    infeasible = [r for r, ok in res.probes if not ok]
    assert max(infeasible) < min(feasible)
    assert res.r - max(infeasible) <= F(1, 20)
