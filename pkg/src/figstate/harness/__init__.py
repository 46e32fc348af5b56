"""Mapping-fidelity evaluation: paired question/interaction cases scored
against a reference evaluator with three metrics."""

from figstate.harness.cases import (
    CaseResult,
    GestureSpec,
    MetricCell,
    PhaseResult,
    SuiteMetrics,
    TestCase,
    load_suite,
    save_suite,
)
from figstate.harness.generator import BUNDLED_STRATA, discover_shape, generate_suite
from figstate.harness.reference import compare_results, comparison_digest, reference_execute, reference_tables
from figstate.harness.runner import resolve_gesture, run_case, run_suite

__all__ = [
    "BUNDLED_STRATA",
    "CaseResult",
    "GestureSpec",
    "MetricCell",
    "PhaseResult",
    "SuiteMetrics",
    "TestCase",
    "compare_results",
    "comparison_digest",
    "discover_shape",
    "generate_suite",
    "load_suite",
    "reference_execute",
    "reference_tables",
    "resolve_gesture",
    "run_case",
    "run_suite",
    "save_suite",
]
