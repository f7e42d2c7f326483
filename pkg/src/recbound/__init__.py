"""Synthesis of worst-case running-time bounds for recursive programs with log and fractional-power templates."""

from .driver import AnalysisConfig, Failure, MeasureSolution, analyze, search_exponent, verify

__all__ = ["AnalysisConfig", "Failure", "MeasureSolution", "analyze", "search_exponent", "verify"]
__version__ = "0.1.0"
