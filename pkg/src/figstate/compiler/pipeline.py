"""Compilation pipeline: action sequences to query plans, charts, and figures.

Everything here is deterministic and append-only. Manipulations and
extensions never rewrite existing action records; they extend the program
and recompile the whole thing, so every figure replays standalone.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from figstate.compiler import predicates as pr
from figstate.compiler.actions import (
    Action,
    ActionKind,
    ActionRecord,
    CatalogSchema,
    FilterRows,
    MANIPULATION_KINDS,
    ProvenanceProgram,
    QUERY_KINDS,
    SelectTable,
    append_records,
    demote_selection,
    validate_sequence,
)
from figstate.compiler.interactions import InteractionEvent, TRIGGER_KINDS, interaction_to_predicate
from figstate.engine import plans as qp
from figstate.engine.catalog import TableCatalog
from figstate.engine.executor import execute_plan
from figstate.errors import (
    CompileError,
    DisallowedAction,
    EmptySelection,
    MissingChartType,
    MissingSourceTable,
    StepExecutionFailed,
)
from figstate.model.charts import ChartDoc, ChartType, InteractionKind, materialize_marks, summarize_insight
from figstate.model.figures import (
    FigureState,
    Operation,
    make_figure,
    mark_map_for,
)
from figstate.model.slices import DataSlice


def compile_to_query(steps: Sequence[Action], catalog_schema: CatalogSchema) -> qp.PlanNode:
    """Compile the data-facing prefix of an action sequence to a query plan.

    Raises CompileError (with the offending step index) if the prefix does
    not validate; compilation itself is pure and deterministic.
    """
    data_steps = [(i, a) for i, a in enumerate(steps) if a.kind in QUERY_KINDS or a.kind is ActionKind.ADD_DATA]
    report = validate_sequence([a for _, a in data_steps], catalog_schema)
    if not report.ok():
        v = report.violations[0]
        original = data_steps[v.step_index][0] if v.step_index < len(data_steps) else v.step_index
        raise CompileError(original, v.message)

    plan: qp.PlanNode | None = None
    for i, action in data_steps:
        plan = _extend_plan(plan, action, i)
    if plan is None:
        raise CompileError(0, "no data-facing steps to compile")
    return plan


def _extend_plan(plan: qp.PlanNode | None, action: Action, index: int) -> qp.PlanNode | None:
    kind = action.kind
    if kind is ActionKind.SELECT_TABLE:
        return qp.Scan(action.table)
    if kind is ActionKind.ADD_DATA:
        if action.table is not None and plan is None:
            return qp.Scan(action.table)
        return plan
    if plan is None:
        raise CompileError(index, f"{kind.value} before any table is selected")
    if kind is ActionKind.SELECT_COLUMNS:
        return qp.Project(plan, action.columns)
    if kind is ActionKind.FILTER_ROWS:
        return qp.Filter(plan, action.predicate)
    if kind is ActionKind.JOIN_TABLES:
        return qp.Join(plan, action.table, action.left_key, action.right_key)
    if kind is ActionKind.DERIVE_COLUMN:
        return qp.Derive(plan, action.column, action.expression)
    if kind is ActionKind.AGGREGATE:
        return qp.GroupAggregate(plan, action.group_by, action.aggs)
    if kind is ActionKind.SORT_LIMIT:
        return qp.TakeSortLimit(plan, action.keys, action.limit)
    if kind is ActionKind.ANALYZE:
        return qp.AnalyzeStep(plan, action.op, action.column, action.k, action.bins, action.out)
    return plan


def compile_to_chart(steps: Sequence[Action], data: DataSlice) -> ChartDoc:
    """Fold the chart-facing steps over a data slice and materialize marks."""
    chart_type: ChartType | None = None
    encodings: dict = {}
    params: list = []
    for action in steps:
        kind = action.kind
        if kind is ActionKind.ADD_CHART_TYPE:
            chart_type = action.chart_type
        elif kind in (ActionKind.ADD_ENCODING, ActionKind.UPDATE_ENCODING):
            encodings[action.channel] = action.spec
        elif kind is ActionKind.ADD_PARAMS:
            params.append(action.decl)
    if chart_type is None:
        raise MissingChartType("sequence has no add_chart_type step")
    bare = ChartDoc(chart_type=chart_type, encodings=encodings, params=tuple(params))
    marks, _ = materialize_marks(bare, data)
    chart = ChartDoc(
        chart_type=chart_type,
        encodings=encodings,
        params=tuple(params),
        marks=marks,
    )
    return replace(chart, insight_text=summarize_insight(chart, data))


@dataclass(frozen=True)
class CompiledFigure:
    data: DataSlice
    chart: ChartDoc
    records: tuple[ActionRecord, ...]


def compile_actions(actions: Sequence[Action], catalog: TableCatalog) -> CompiledFigure:
    """Validate, execute, and materialize one action sequence.

    Each data-facing record carries the cumulative dialect text of the plan
    up to that step and the digest of its intermediate result, so failures
    and replays attribute to exact steps.
    """
    schema_map = catalog.schema_map()
    report = validate_sequence(actions, schema_map)
    if not report.ok():
        v = report.violations[0]
        raise CompileError(v.step_index, v.message)

    plan: qp.PlanNode | None = None
    records: list[ActionRecord] = []
    data: DataSlice | None = None
    for i, action in enumerate(actions):
        query_text = None
        result_digest = None
        if action.kind in QUERY_KINDS or (action.kind is ActionKind.ADD_DATA and action.table is not None):
            plan = _extend_plan(plan, action, i)
            query_text = qp.to_sql_text(plan)
            try:
                data = execute_plan(plan, catalog)
            except Exception as exc:
                raise StepExecutionFailed(i, exc) from exc
            result_digest = data.digest
        elif action.kind in (ActionKind.ADD_DATA, ActionKind.UPDATE_DATA):
            if data is not None:
                result_digest = data.digest
                query_text = qp.to_sql_text(plan) if plan is not None else None
        records.append(ActionRecord(
            index=i,
            action=action,
            generated_query_text=query_text,
            status="ok",
            result_digest=result_digest,
        ))

    if data is None:
        raise CompileError(len(actions), "sequence binds no data (no select_table or add_data)")

    try:
        chart = compile_to_chart(actions, data)
    except Exception as exc:
        chart_steps = [i for i, a in enumerate(actions) if a.kind is ActionKind.ADD_CHART_TYPE]
        raise StepExecutionFailed(chart_steps[0] if chart_steps else len(actions), exc) from exc
    return CompiledFigure(data=data, chart=chart, records=tuple(records))


def build_figure(
    actions: Sequence[Action],
    catalog: TableCatalog,
    figure_id: str,
    artifact_id: str,
    description: str,
    operation: Operation = Operation.GENERATE,
    parent_version: str | None = None,
) -> FigureState:
    compiled = compile_actions(actions, catalog)
    return make_figure(
        figure_id=figure_id,
        chart=compiled.chart,
        code=ProvenanceProgram(compiled.records),
        data=compiled.data,
        artifact_id=artifact_id,
        operation=operation,
        description=description,
        parent_version=parent_version,
    )


# --- replay -------------------------------------------------------------------------


@dataclass(frozen=True)
class ReplayOutcome:
    figure: FigureState
    reproduced: bool
    declared_nondeterministic: bool
    notes: tuple[str, ...] = ()


def replay_figure(fig: FigureState, catalog: TableCatalog) -> ReplayOutcome:
    """Re-execute a figure's program and compare against its stored state.

    A digest or chart mismatch on a program with declared-nondeterministic
    steps is reported, not failed; an unexpected mismatch is also reported
    (the verifier decides what it means).
    """
    for table_id in fig.data.lineage.source_tables:
        if not catalog.has_table(table_id):
            raise MissingSourceTable(table_id)

    compiled = compile_actions(fig.code.actions(), catalog)
    replayed = make_figure(
        figure_id=fig.figure_id,
        chart=compiled.chart,
        code=ProvenanceProgram(compiled.records),
        data=compiled.data,
        artifact_id=fig.meta.artifact_id,
        operation=fig.meta.operation,
        description=fig.meta.operation_description,
        parent_version=fig.meta.parent_version,
    )

    notes: list[str] = []
    declared = any(step.nondeterministic for step in fig.code.steps)
    if compiled.data.digest != fig.data.digest:
        notes.append(f"data digest mismatch: stored {fig.data.digest[:12]}, replayed {compiled.data.digest[:12]}")
    if compiled.chart != fig.visualization:
        notes.append("chart document differs from stored visualization")
    for stored, fresh in zip(fig.code.steps, compiled.records):
        if stored.result_digest and fresh.result_digest and stored.result_digest != fresh.result_digest:
            notes.append(f"step {stored.index} result diverges")
            break
    if notes and declared:
        notes.append("program declares nondeterministic step(s); mismatch is expected")
    return ReplayOutcome(
        figure=replayed,
        reproduced=not notes,
        declared_nondeterministic=declared,
        notes=tuple(notes),
    )


# --- manipulation and extension ------------------------------------------------------


def apply_manipulation(
    fig: FigureState,
    steps: Sequence[Action],
    catalog: TableCatalog,
    description: str = "",
) -> FigureState:
    """Append refinement steps to an existing figure and recompile.

    Only manipulation kinds are allowed; the old figure is untouched and its
    records are reused verbatim (append-only programs).
    """
    for action in steps:
        if action.kind not in MANIPULATION_KINDS:
            raise DisallowedAction(f"{action.kind.value} is a generation-only action")
    actions = list(fig.code.actions()) + list(steps)
    compiled = compile_actions(actions, catalog)
    program = append_records(
        ProvenanceProgram(fig.code.steps),
        compiled.records[len(fig.code.steps):],
    )
    return make_figure(
        figure_id=fig.figure_id,
        chart=compiled.chart,
        code=program,
        data=compiled.data,
        artifact_id=fig.meta.artifact_id,
        operation=Operation.MANIPULATE,
        description=description or f"manipulate: {len(steps)} step(s)",
        parent_version=fig.meta.version_id,
    )


@dataclass(frozen=True)
class CoordinationSeed:
    """Everything record_schema needs to persist the link created by an
    extension: who, what gesture, and where the predicate hole sits."""

    source_figure: str
    target_figure: str
    trigger: InteractionKind
    predicate: pr.Predicate
    hole_index: int


def selection_row_count(fig: FigureState, predicate: pr.Predicate) -> int:
    return sum(1 for env in fig.data.iter_envs() if predicate.matches(env))


def extend_from_selection(
    fig: FigureState,
    ev: InteractionEvent,
    steps: Sequence[Action],
    catalog: TableCatalog,
    new_figure_id: str,
    description: str = "",
) -> tuple[FigureState, CoordinationSeed]:
    """Create a new coordinated figure from a gesture on an existing one.

    The new program always begins with the materialized selection predicate
    as a filter_rows step so the figure replays standalone. If the new steps
    start with select_table the filter lands right after that scan (catalog
    mode); otherwise the source figure's data-facing prefix is inherited and
    the filter applies to it (slice mode).
    """
    predicate = interaction_to_predicate(ev, mark_map_for(fig), fig.visualization)
    if selection_row_count(fig, predicate) == 0:
        raise EmptySelection("gesture selects no rows")

    selection_step = FilterRows(predicate, selection=True)
    steps = list(steps)
    if steps and steps[0].kind is ActionKind.SELECT_TABLE:
        # Catalog mode: splice the selection filter after the data-prep steps
        # (scan/joins/derives/filters) so predicates over joined or derived
        # columns resolve, but before any aggregation collapses the rows.
        prep = {ActionKind.SELECT_TABLE, ActionKind.SELECT_COLUMNS,
                ActionKind.JOIN_TABLES, ActionKind.DERIVE_COLUMN, ActionKind.FILTER_ROWS}
        hole_index = 1
        for i, action in enumerate(steps):
            if action.kind in prep:
                hole_index = i + 1
            else:
                break
        actions = [*steps[:hole_index], selection_step, *steps[hole_index:]]
    else:
        prefix = [demote_selection(a) for a in fig.code.actions() if a.kind in QUERY_KINDS]
        if not prefix:
            root = next(
                (a for a in fig.code.actions() if a.kind is ActionKind.ADD_DATA and a.table is not None),
                None,
            )
            if root is not None:
                prefix = [SelectTable(root.table)]
        actions = [*prefix, selection_step, *steps]
        hole_index = len(prefix)

    target = build_figure(
        actions,
        catalog,
        figure_id=new_figure_id,
        artifact_id=fig.meta.artifact_id,
        description=description or f"extend from {ev.kind.value} on {fig.figure_id}",
        operation=Operation.EXTEND,
    )
    seed = CoordinationSeed(
        source_figure=fig.figure_id,
        target_figure=new_figure_id,
        trigger=TRIGGER_KINDS[ev.kind],
        predicate=predicate,
        hole_index=hole_index,
    )
    return target, seed
