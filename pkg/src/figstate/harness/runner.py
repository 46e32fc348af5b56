"""Suite execution: drive each case through the loop, gesture, and
coordination machinery, scoring against the frozen reference digests."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

from figstate.agent.backends import IntentBackend
from figstate.agent.context import DataContext
from figstate.agent.loop import LoopConfig, run_loop
from figstate.compiler.interactions import GestureKind, InteractionEvent
from figstate.coordination import propagate, record_schema
from figstate.engine.catalog import TableCatalog
from figstate.errors import FigstateError, ValidationFailed
from figstate.harness.cases import CaseResult, GestureSpec, PhaseResult, SuiteMetrics, TestCase
from figstate.harness.reference import compare_results
from figstate.model.charts import Channel
from figstate.model.figures import FigureState


def resolve_gesture(spec: GestureSpec, figure: FigureState) -> InteractionEvent:
    """Turn scripted gesture parameters into a real event against the
    produced figure. Clicks resolve by channel values, first matching mark."""
    if spec.kind == "click":
        mark_ids: list[str] = []
        for wanted in spec.click_values:
            resolved = None
            for mark in figure.visualization.marks:
                if all(mark.channel_values.get(Channel(ch)) == v for ch, v in wanted.items()):
                    resolved = mark.mark_id
                    break
            if resolved is None:
                raise ValidationFailed(f"no mark matches {dict(wanted)!r}")
            if resolved not in mark_ids:
                mark_ids.append(resolved)
        return InteractionEvent(figure.figure_id, GestureKind.CLICK, mark_ids=tuple(mark_ids))
    if spec.kind == "brush1d":
        return InteractionEvent(
            figure.figure_id, GestureKind.BRUSH_1D,
            channel=Channel(spec.channel), lo=spec.lo, hi=spec.hi,
        )
    if spec.kind == "brush2d":
        return InteractionEvent(
            figure.figure_id, GestureKind.BRUSH_2D,
            x_lo=spec.x_lo, x_hi=spec.x_hi, y_lo=spec.y_lo, y_hi=spec.y_hi,
        )
    raise ValidationFailed(f"unknown gesture kind {spec.kind!r}")


def run_case(
    case: TestCase,
    backend: IntentBackend,
    catalog: TableCatalog,
    config: LoopConfig = LoopConfig(),
) -> CaseResult:
    phases: dict[str, PhaseResult] = {}

    def finish() -> CaseResult:
        return CaseResult(case.case_id, case.tier, case.figure_type, case.interaction_type, phases)

    context = DataContext()
    try:
        outcome = run_loop(
            case.initial_question, None, context, catalog, backend, config,
            artifact_id=case.case_id,
        )
        source = outcome.figures[0]
        phases["initial"] = PhaseResult(True, compare_results(source.data, case.initial_oracle_digest))
    except FigstateError as exc:
        phases["initial"] = PhaseResult(False, False, str(exc))
        return finish()

    try:
        ev = resolve_gesture(case.followup_gesture, source)
        followup = run_loop(
            case.followup_question, ev, outcome.context, catalog, backend, config,
            artifact_id=case.case_id, figures={source.figure_id: source},
        )
        target = followup.figures[0]
        phases["followup"] = PhaseResult(True, compare_results(target.data, case.followup_oracle_digest))
    except FigstateError as exc:
        phases["followup"] = PhaseResult(False, False, str(exc))
        return finish()

    if case.coordination_gesture is not None:
        try:
            schema = record_schema(source, target, ev, catalog)
            ev2 = resolve_gesture(case.coordination_gesture, source)
            result = propagate(schema, ev2, source, target, catalog)
            phases["coordination"] = PhaseResult(
                True, compare_results(result.figure.data, case.coordination_oracle_digest),
            )
        except FigstateError as exc:
            phases["coordination"] = PhaseResult(False, False, str(exc))
    return finish()


def run_suite(
    cases: Sequence[TestCase],
    backend: IntentBackend,
    catalog: TableCatalog,
    config: LoopConfig = LoopConfig(),
    workers: int = 0,
) -> tuple[SuiteMetrics, list[CaseResult]]:
    """Cases are independent; `workers` > 1 runs them in a thread pool (the
    catalog is read-only during evaluation)."""
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: run_case(c, backend, catalog, config), cases))
    else:
        results = [run_case(case, backend, catalog, config) for case in cases]
    return SuiteMetrics.from_results(results), results
