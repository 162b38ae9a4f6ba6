"""Experiment runner and CLI emitting CSV/JSON plot data."""

from .experiments import (
    DEMO_GMM,
    compare_timing,
    coverage_suite,
    demo_distributions,
    run,
    sensitivity_curve,
    thomas_suite,
)
from .io import emit, load_schema
from .spec import KINDS, ExperimentSpec, ResultRow

__all__ = [
    "DEMO_GMM",
    "KINDS",
    "ExperimentSpec",
    "ResultRow",
    "compare_timing",
    "coverage_suite",
    "demo_distributions",
    "emit",
    "load_schema",
    "run",
    "sensitivity_curve",
    "thomas_suite",
]
