"""Shared fixtures: corpus programs and cached end-to-end analyses."""

from __future__ import annotations

from functools import lru_cache
from fractions import Fraction

import pytest

from recbound.cfg import build_cfg
from recbound.driver import AnalysisConfig, analyze, corpus_config, load_source
from recbound.frontend import parse
from recbound.invariant import invariant_map

BINARY_SEARCH = """
f(n) {
  [n >= 1]
  if n >= 2 then
    f(floor(n / 2))
  else
    skip
  fi
}
"""


def cfg_of(src: str):
    return build_cfg(parse(src))


@lru_cache(maxsize=None)
def corpus_cfg(name: str):
    return build_cfg(parse(load_source(name)))


@lru_cache(maxsize=None)
def corpus_analysis(name: str, **overrides):
    return analyze(corpus_config(name, skip_sanity=True, **overrides))


@lru_cache(maxsize=None)
def analysis(program: str, d: int, op: str, r=None, k: int = 1, objective: str = "leading"):
    return analyze(AnalysisConfig(program, d, op, None if r is None else Fraction(r), k, objective=objective, skip_sanity=True))


@pytest.fixture
def bs_cfg():
    return cfg_of(BINARY_SEARCH)


@pytest.fixture
def bs_inv(bs_cfg):
    return invariant_map(bs_cfg)
