"""Command-line entry point ``recbound``."""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import Optional, Sequence

from . import driver
from .frontend import ParseError, ValidationError
from .template import TemplateError

EXIT_OK, EXIT_ERROR, EXIT_FAILURE = 0, 1, 2


def _rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from e


def _search(text: str) -> tuple[Fraction, Fraction, Fraction]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected LO:HI:EPS")
    return tuple(_rational(p) for p in parts)  # type: ignore[return-value]


def _quadruple(p: argparse.ArgumentParser) -> None:
    p.add_argument("--degree", "-d", type=int, default=1)
    p.add_argument("--op", choices=["log", "exp", "none"], default="none")
    p.add_argument("--exponent", "-r", type=_rational, default=None)
    p.add_argument("--k", "-k", type=int, default=1)
    p.add_argument("--restrict", help="JSON file mapping function[@label] to lists of shape strings")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="recbound", description="Worst-case bounds for recursive programs.")
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="synthesize a measure function")
    a.add_argument("file")
    _quadruple(a)
    a.add_argument("--search-exponent", type=_search, metavar="LO:HI:EPS")
    a.add_argument("--objective", choices=["leading", "none"], default="leading")
    a.add_argument("--dump-expansion", action="store_true")
    a.add_argument("--dump-triples", action="store_true")
    a.add_argument("--dump-gamma", action="store_true")
    a.add_argument("--skip-sanity", action="store_true", help="skip sampled invariant checking")
    a.add_argument("--check-oracle", action="store_true", help="compare against the exact oracle on the default grid")
    a.add_argument("--format", choices=["text", "json"], default="text")

    v = sub.add_parser("verify", help="check a supplied coefficient assignment")
    v.add_argument("file")
    v.add_argument("--solution", required=True, help="flat map variable -> p/q (JSON or name = value lines)")
    _quadruple(v)
    v.add_argument("--format", choices=["text", "json"], default="text")

    o = sub.add_parser("oracle", help="exact worst-case running time")
    o.add_argument("file")
    o.add_argument("--entry", default=None)
    o.add_argument("--args", nargs="*", default=[], help="name=value pairs")

    c = sub.add_parser("corpus", help="analyze all bundled programs with their default quadruples")
    c.add_argument("--workers", type=int, default=None)
    c.add_argument("names", nargs="*")
    return ap


def _restrict(path: Optional[str]):
    if not path:
        return None
    with open(path) as fh:
        return json.load(fh)


def _print_outcome(out: driver.Outcome, fmt: str, probes=None) -> None:
    if fmt == "json":
        data = out.to_json()
        if probes is not None:
            data["probes"] = [{"r": str(r), "feasible": ok} for r, ok in probes]
        print(json.dumps(data, indent=2))
        return
    for name, text in out.dumps.items():
        print(f"== {name}")
        print(text)
    if probes is not None:
        for r, ok in probes:
            print(f"probe r={r}: {'feasible' if ok else 'infeasible'}")
    if isinstance(out, driver.MeasureSolution):
        print("SUCCESS")
        for b in out.bounds:
            print(f"  {b.function}@{b.label}: {b.expression}")
    else:
        print(f"FAILURE ({out.reason})")
    print("stats: " + ", ".join(f"{k}={v}" for k, v in out.stats.items()))


def cmd_analyze(ns) -> int:
    dumps = {n for n in ("expansion", "triples", "gamma") if getattr(ns, f"dump_{n}")}
    cfg = driver.AnalysisConfig(
        ns.file,
        ns.degree,
        "exp" if ns.search_exponent else ns.op,
        ns.exponent,
        ns.k,
        search=ns.search_exponent,
        objective=ns.objective,
        restrict=_restrict(ns.restrict),
        dumps=frozenset(dumps),
        skip_sanity=ns.skip_sanity,
    )
    probes = None
    if cfg.search is not None:
        res = driver.search_exponent(cfg)
        out, probes = res.outcome, res.probes
    else:
        out = driver.analyze(cfg)
    _print_outcome(out, ns.format, probes)
    if isinstance(out, driver.MeasureSolution) and ns.check_oracle:
        grid = driver.default_grid(ns.file)
        if grid is None:
            print("no default oracle grid for this program", file=sys.stderr)
        else:
            chk = driver.oracle_check(out, grid)
            print(f"oracle: {'ok' if chk.ok else 'VIOLATED'} on {chk.checked} points")
            if not chk.ok:
                return EXIT_FAILURE
    return EXIT_OK if isinstance(out, driver.MeasureSolution) else EXIT_FAILURE


def cmd_verify(ns) -> int:
    rep = driver.verify(
        ns.file, ns.solution, ns.degree, ns.op, ns.exponent, ns.k, restrict=_restrict(ns.restrict)
    )
    if ns.format == "json":
        print(
            json.dumps(
                {
                    "status": "pass" if rep.passed else "fail",
                    "assignment": {t: str(v) for t, v in rep.assignment.items()},
                    "violations": rep.failures,
                    "certificate": rep.certificate.to_json() if rep.certificate and rep.passed else None,
                },
                indent=2,
            )
        )
    else:
        print("\n".join(rep.lines()))
    return EXIT_OK if rep.passed else EXIT_FAILURE


def cmd_oracle(ns) -> int:
    from .semantics import Oracle

    c = driver.load_cfg(ns.file)
    entry = ns.entry or c.program.entry
    env = {}
    for item in ns.args:
        k, _, v = item.partition("=")
        env[k.strip()] = int(v)
    print(Oracle(c).entry_time(entry, env))
    return EXIT_OK


def cmd_corpus(ns) -> int:
    rows = driver.run_corpus(ns.names or None, ns.workers)
    bad = False
    for name, row in rows.items():
        extra = row.get("bound", row.get("reason", ""))
        oracle = "" if "oracle_ok" not in row else (" oracle ok" if row["oracle_ok"] else " ORACLE VIOLATED")
        print(f"{name:14s} {row['status']:8s} {row['seconds']:8.2f}s{oracle}  {extra}")
        bad = bad or row["status"] != "success" or row.get("oracle_ok") is False
    return EXIT_FAILURE if bad else EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    handlers = {"analyze": cmd_analyze, "verify": cmd_verify, "oracle": cmd_oracle, "corpus": cmd_corpus}
    try:
        return handlers[ns.command](ns)
    except (
        ParseError,
        ValidationError,
        TemplateError,
        driver.InvariantError,
        FileNotFoundError,
        ValueError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
