"""Persistent cross-figure linkage.

When a figure is extended from a selection, the executed workflow is stored
as a template with exactly one predicate hole. Re-selecting on the source
fills the hole with the new predicate and re-executes the stored workflow,
so the linked figure updates without re-planning.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from figstate.compiler import predicates as pr
from figstate.compiler.actions import (
    Action,
    ActionKind,
    FilterRows,
    ProvenanceProgram,
    QUERY_KINDS,
    demote_selection,
    program_from_jsonable,
    program_to_jsonable,
)
from figstate.compiler.interactions import GestureKind, InteractionEvent, interaction_to_predicate
from figstate.compiler.pipeline import build_figure, selection_row_count
from figstate.engine.catalog import TableCatalog
from figstate.errors import (
    CycleDetected,
    EmptySelection,
    KindMismatch,
    PropagationError,
    TemplateExtractionFailed,
)
from figstate.model.charts import InteractionKind
from figstate.model.figures import FigureState, Operation, figure_content_id, mark_map_for


@dataclass(frozen=True)
class CoordinationSchema:
    """A stored, re-executable workflow binding a source selection to a
    target figure. The template is the target's full program; the hole is
    the selection filter at hole_index. When source_coupled, the part of the
    template before the hole is the source's data prefix and follows the
    source's current program on propagation (keeps A -> B -> C chains
    consistent); catalog-rooted templates keep their own scan."""

    schema_id: str
    source_figure: str
    target_figure: str
    trigger: InteractionKind
    template: ProvenanceProgram
    hole_index: int
    hole_binding: tuple[str, ...]
    source_coupled: bool = False


def schema_to_jsonable(schema: CoordinationSchema) -> dict[str, Any]:
    return {
        "schema_id": schema.schema_id,
        "source_figure": schema.source_figure,
        "target_figure": schema.target_figure,
        "trigger": schema.trigger.value,
        "template": program_to_jsonable(schema.template),
        "hole_index": schema.hole_index,
        "hole_binding": list(schema.hole_binding),
        "source_coupled": schema.source_coupled,
    }


def schema_from_jsonable(payload: dict[str, Any]) -> CoordinationSchema:
    return CoordinationSchema(
        schema_id=payload["schema_id"],
        source_figure=payload["source_figure"],
        target_figure=payload["target_figure"],
        trigger=InteractionKind(payload["trigger"]),
        template=program_from_jsonable(payload["template"]),
        hole_index=int(payload["hole_index"]),
        hole_binding=tuple(payload["hole_binding"]),
        source_coupled=bool(payload.get("source_coupled", False)),
    )


def _schema_id(source: str, target: str, template: ProvenanceProgram, hole_index: int) -> str:
    body = {
        "source": source,
        "target": target,
        "template": program_to_jsonable(template),
        "hole_index": hole_index,
    }
    digest = hashlib.sha256(json.dumps(body, sort_keys=True, separators=(",", ":")).encode()).hexdigest()
    return "cs-" + digest[:16]


def record_schema(
    source: FigureState,
    target: FigureState,
    ev: InteractionEvent,
    catalog: TableCatalog,
    existing: Sequence[CoordinationSchema] = (),
) -> CoordinationSchema:
    """Extract and self-check the coordination schema for an extension.

    The target must have been produced by extend_from_selection with `ev` on
    `source`: its program carries exactly one selection-derived filter step,
    which becomes the hole. Filling the hole with the recorded predicate must
    reproduce the target's digest; anything else is an extraction failure.
    """
    selection_steps = [
        s.index for s in target.code.steps
        if s.action.kind is ActionKind.FILTER_ROWS and s.action.selection
    ]
    if len(selection_steps) != 1:
        raise TemplateExtractionFailed(
            f"target program has {len(selection_steps)} selection-derived filter steps, need exactly 1"
        )
    hole_index = selection_steps[0]
    recorded: FilterRows = target.code.steps[hole_index].action

    source_prefix = [demote_selection(a) for a in source.code.actions() if a.kind in QUERY_KINDS]
    template_prefix = [demote_selection(a) for a in list(target.code.actions())[:hole_index]]
    source_coupled = template_prefix == source_prefix

    schema = CoordinationSchema(
        schema_id=_schema_id(source.figure_id, target.figure_id, target.code, hole_index),
        source_figure=source.figure_id,
        target_figure=target.figure_id,
        trigger=_trigger_kind(ev),
        template=target.code,
        hole_index=hole_index,
        hole_binding=recorded.predicate.columns(),
        source_coupled=source_coupled,
    )

    if _would_cycle(existing, source.figure_id, target.figure_id):
        raise CycleDetected(f"coordination edge {source.figure_id} -> {target.figure_id} closes a cycle")

    # Self-check: replay the template with the recorded predicate.
    check = build_figure(
        fill_template(schema, recorded.predicate, source),
        catalog,
        figure_id=target.figure_id,
        artifact_id=target.meta.artifact_id,
        description="schema self-check",
        operation=target.meta.operation,
    )
    if check.data.digest != target.data.digest:
        raise TemplateExtractionFailed("template replay does not reproduce the target's data digest")
    return schema


def _trigger_kind(ev: InteractionEvent) -> InteractionKind:
    from figstate.compiler.interactions import TRIGGER_KINDS

    return TRIGGER_KINDS[ev.kind]


def fill_template(
    schema: CoordinationSchema,
    predicate: pr.Predicate,
    source: FigureState | None = None,
) -> list[Action]:
    """The template's actions with the hole filled by `predicate`.

    For source-coupled templates the pre-hole prefix is replaced by the
    source figure's current data-facing actions, so downstream figures see
    manipulations and upstream propagations applied to the source since the
    schema was recorded.
    """
    actions = list(schema.template.actions())
    hole = actions[schema.hole_index]
    if hole.kind is not ActionKind.FILTER_ROWS:
        raise TemplateExtractionFailed(f"hole step {schema.hole_index} is {hole.kind.value}, not filter_rows")
    tail = actions[schema.hole_index + 1:]
    if schema.source_coupled and source is not None:
        prefix = [demote_selection(a) for a in source.code.actions() if a.kind in QUERY_KINDS]
    else:
        prefix = actions[: schema.hole_index]
    return [*prefix, FilterRows(predicate, selection=True), *tail]


@dataclass(frozen=True)
class PropagationResult:
    figure: FigureState
    changed: bool
    predicate: pr.Predicate


def propagate(
    schema: CoordinationSchema,
    new_ev: InteractionEvent,
    source: FigureState,
    target: FigureState,
    catalog: TableCatalog,
) -> PropagationResult:
    """Re-execute the stored workflow for a new selection on the source.

    Any selection gesture that produces a predicate over the schema's bound
    columns fills the hole (a brush-recorded schema accepts clicks over the
    same columns, and vice versa); hover and column-incompatible gestures are
    rejected. The result digest must equal a fresh extension with the same
    gesture, which is exactly what re-running the template guarantees.
    """
    if new_ev.kind is GestureKind.HOVER:
        raise KindMismatch("hover gestures do not drive coordination")
    predicate = interaction_to_predicate(new_ev, mark_map_for(source), source.visualization)
    if set(predicate.columns()) != set(schema.hole_binding):
        raise PropagationError(
            f"gesture binds columns {predicate.columns()}, schema expects {schema.hole_binding}"
        )
    if selection_row_count(source, predicate) == 0:
        raise EmptySelection("new selection matches zero rows")

    fresh = build_figure(
        fill_template(schema, predicate, source),
        catalog,
        figure_id=target.figure_id,
        artifact_id=target.meta.artifact_id,
        description=f"coordinate update from {new_ev.kind.value} on {source.figure_id}",
        operation=Operation.COORDINATE_UPDATE,
        parent_version=target.meta.version_id,
    )
    if figure_content_id(fresh) == figure_content_id(target):
        return PropagationResult(figure=target, changed=False, predicate=predicate)
    return PropagationResult(figure=fresh, changed=True, predicate=predicate)


def refresh_target(
    schema: CoordinationSchema,
    source: FigureState,
    target: FigureState,
    catalog: TableCatalog,
) -> PropagationResult:
    """Re-execute a schema with its recorded predicate over the source's
    current state. Used for the downstream edges of a chain: when A's gesture
    updates B, every B -> C schema refreshes C without a new gesture on B."""
    recorded: FilterRows = schema.template.actions()[schema.hole_index]
    if selection_row_count(source, recorded.predicate) == 0:
        raise EmptySelection("recorded selection matches zero rows in the updated source")
    fresh = build_figure(
        fill_template(schema, recorded.predicate, source),
        catalog,
        figure_id=target.figure_id,
        artifact_id=target.meta.artifact_id,
        description=f"coordinate update following {source.figure_id}",
        operation=Operation.COORDINATE_UPDATE,
        parent_version=target.meta.version_id,
    )
    if figure_content_id(fresh) == figure_content_id(target):
        return PropagationResult(figure=target, changed=False, predicate=recorded.predicate)
    return PropagationResult(figure=fresh, changed=True, predicate=recorded.predicate)


def propagation_order(schemas: Iterable[CoordinationSchema]) -> list[CoordinationSchema]:
    """Topological order over the coordination graph, source-first; ties
    break by ascending schema id so chains and diamonds propagate the same
    way on every run."""
    schemas = sorted(schemas, key=lambda s: s.schema_id)
    incoming: dict[str, int] = {}
    for s in schemas:
        incoming.setdefault(s.source_figure, 0)
        incoming[s.target_figure] = incoming.get(s.target_figure, 0) + 1

    ready = sorted({f for f, n in incoming.items() if n == 0})
    ordered: list[CoordinationSchema] = []
    emitted: set[str] = set()
    while ready:
        fig = ready.pop(0)
        for s in schemas:
            if s.source_figure == fig and s.schema_id not in emitted:
                ordered.append(s)
                emitted.add(s.schema_id)
                incoming[s.target_figure] -= 1
                if incoming[s.target_figure] == 0:
                    ready.append(s.target_figure)
                    ready.sort()
    if len(ordered) != len(schemas):
        raise CycleDetected("coordination graph contains a cycle")
    return ordered


def _would_cycle(existing: Sequence[CoordinationSchema], source: str, target: str) -> bool:
    edges: dict[str, list[str]] = {}
    for s in existing:
        edges.setdefault(s.source_figure, []).append(s.target_figure)
    edges.setdefault(source, []).append(target)
    # DFS from target looking for source
    stack, seen = [target], set()
    while stack:
        node = stack.pop()
        if node == source:
            return True
        if node in seen:
            continue
        seen.add(node)
        stack.extend(edges.get(node, ()))
    return False
