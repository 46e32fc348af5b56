"""The plan-action-observation loop.

One round: the backend proposes ranked candidate action sequences, the loop
validates and executes a beam of them, the evaluator scores each outcome,
and the best either terminates the loop (score >= tau) or feeds back into
the context for the next round. Failures retry up to a bound, then replan
along the next branch. Everything is budgeted, so termination is structural.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Mapping, Sequence

from figstate.agent.backends import IntentBackend, Proposal, QueryClass, RequestFacts
from figstate.agent.context import DataContext, StepRecord
from figstate.compiler.actions import action_to_jsonable, validate_sequence
from figstate.compiler.interactions import InteractionEvent
from figstate.compiler.pipeline import (
    CoordinationSeed,
    apply_manipulation,
    build_figure,
    extend_from_selection,
)
from figstate.engine.catalog import TableCatalog
from figstate.errors import AllBranchesFailed, BudgetExhausted, FigstateError
from figstate.model.figures import FigureState


class Route(str, Enum):
    DECOMPOSE = "decompose"
    RECOMMEND = "recommend"
    EXECUTE = "execute"


@dataclass(frozen=True)
class TriageResult:
    route: Route
    sub_questions: tuple[str, ...] = ()
    suggestions: tuple[str, ...] = ()


def triage(
    text: str | None,
    context: DataContext,
    backend: IntentBackend,
    catalog_schema: Mapping[str, Any],
    has_interaction: bool = False,
) -> TriageResult:
    """Route a request: decompose it, recommend next steps, or execute."""
    if not text:
        # interaction-only input: nothing to classify, just execute
        return TriageResult(Route.EXECUTE)
    klass = backend.classify(text)
    if klass is QueryClass.HIGH_LEVEL:
        return TriageResult(Route.DECOMPOSE, sub_questions=backend.decompose(text))
    if klass is QueryClass.RECOMMENDATION_REQUEST:
        return TriageResult(Route.RECOMMEND, suggestions=backend.recommend(context, catalog_schema))
    return TriageResult(Route.EXECUTE)


@dataclass(frozen=True)
class Evaluation:
    score: float
    rationale: str
    remaining_plan: str | None = None


@dataclass(frozen=True)
class TraceEvent:
    kind: str  # proposal | action_selected | action_result | evaluation | round
    payload: Mapping[str, Any]

    def to_jsonable(self) -> dict[str, Any]:
        return {"kind": self.kind, "payload": dict(self.payload)}


@dataclass
class TreeNode:
    node_id: int
    parent_id: int | None
    rank: int
    actions_digest: str
    status: str = "pending"  # ok | failed | pending
    score: float = 0.0
    figure_id: str | None = None


@dataclass
class SearchTree:
    max_depth: int
    beam_width: int
    nodes: list[TreeNode] = field(default_factory=list)

    def add(self, parent_id: int | None, rank: int, actions_digest: str) -> TreeNode:
        node = TreeNode(node_id=len(self.nodes), parent_id=parent_id, rank=rank, actions_digest=actions_digest)
        self.nodes.append(node)
        return node


@dataclass(frozen=True)
class LoopConfig:
    tau: float = 0.7
    retries: int = 2
    max_depth: int = 8
    beam_width: int = 3
    budget: int = 16


@dataclass(frozen=True)
class ExecutedCandidate:
    proposal: Proposal
    rank: int
    node: TreeNode
    figure: FigureState | None
    seed: CoordinationSeed | None
    evaluation: Evaluation
    failure: str | None = None


@dataclass
class LoopOutcome:
    figures: tuple[FigureState, ...]
    seeds: tuple[CoordinationSeed, ...]
    context: DataContext
    trace: tuple[TraceEvent, ...]
    evaluation: Evaluation
    tree: SearchTree


def actions_digest(proposal: Proposal) -> str:
    payload = json.dumps([action_to_jsonable(a) for a in proposal.actions], sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def select_action(tree: SearchTree, executed: Sequence[ExecutedCandidate]) -> ExecutedCandidate:
    """Keep the best-scoring expanded candidate; ties break by candidate rank,
    then by the serialization hash of the action sequence."""
    if not executed:
        raise ValueError("select_action needs at least one executed candidate")
    return min(
        executed,
        key=lambda c: (-c.evaluation.score, c.rank, c.node.actions_digest),
    )


def evaluate_outcome(
    figure: FigureState | None,
    facts: RequestFacts | None,
    backend: IntentBackend,
    failure: str | None = None,
) -> Evaluation:
    """Deterministic rubric mapping to {0, 0.5, 1.0}; a backend-provided
    score (LLM path) takes precedence, clamped to [0, 1]."""
    summary = {
        "failed": failure is not None,
        "failure": failure,
        "chart_type": figure.visualization.chart_type.value if figure else None,
        "columns": list(figure.data.column_names()) if figure else [],
        "rows": len(figure.data.rows) if figure else 0,
    }
    model_score = backend.score(summary)
    if model_score is not None:
        return Evaluation(max(0.0, min(1.0, model_score)), "backend-scored")

    if failure is not None:
        return Evaluation(0.0, f"execution failed: {failure}", "replan with a different branch")
    is_filter = bool(facts and facts.is_filter)
    if not figure.data.rows and not is_filter:
        return Evaluation(0.0, "empty result for a non-filter question", "loosen the filters")
    score = 1.0
    reasons = []
    if facts and facts.chart_type is not None and figure.visualization.chart_type is not facts.chart_type:
        score -= 0.5
        reasons.append(f"chart type {figure.visualization.chart_type.value} != requested {facts.chart_type.value}")
    if facts and facts.columns:
        present = set(figure.data.column_names())
        for ch_spec in figure.visualization.encodings.values():
            present.add(ch_spec.field)
        missing = [c for c in facts.columns if c not in present]
        if missing:
            score -= 0.5
            reasons.append(f"requested column(s) missing: {missing}")
    score = max(score, 0.0)
    return Evaluation(score, "; ".join(reasons) or "request satisfied")


def run_loop(
    text: str | None,
    interaction: InteractionEvent | None,
    context: DataContext,
    catalog: TableCatalog,
    backend: IntentBackend,
    config: LoopConfig,
    *,
    artifact_id: str,
    figures: Mapping[str, FigureState] | None = None,
    target_figure: str | None = None,
    figure_id_factory: Callable[[], str] | None = None,
    on_event: Callable[[TraceEvent], None] | None = None,
) -> LoopOutcome:
    """Propose -> select -> execute -> evaluate until the score clears tau or
    the budget runs out. Raises BudgetExhausted (with the best partial trace)
    or AllBranchesFailed; never commits anything to a ledger itself."""
    figures = dict(figures or {})
    trace: list[TraceEvent] = []
    tree = SearchTree(max_depth=config.max_depth, beam_width=config.beam_width)

    def emit(kind: str, **payload: Any) -> TraceEvent:
        event = TraceEvent(kind, payload)
        trace.append(event)
        if on_event is not None:
            on_event(event)
        return event

    budget = config.budget
    if budget <= 0:
        raise BudgetExhausted("budget exhausted before any action", tuple(trace))

    counter = [0]

    def default_factory() -> str:
        counter[0] += 1
        return f"{artifact_id}/f{len(figures) + counter[0]}"

    make_figure_id = figure_id_factory or default_factory
    schema_map = catalog.schema_map()
    best: ExecutedCandidate | None = None
    parent_node: int | None = None

    for depth in range(config.max_depth):
        proposals = backend.propose(text or "", context, schema_map, has_interaction=interaction is not None)
        emit("proposal", depth=depth, count=len(proposals),
             rationales=[p.rationale for p in proposals])
        if not proposals:
            break

        executed: list[ExecutedCandidate] = []
        for rank, proposal in enumerate(proposals[: config.beam_width]):
            node = tree.add(parent_node, rank, actions_digest(proposal))
            report = validate_sequence(
                proposal.actions if proposal.mode == "generate" else [],
                schema_map,
            )
            if proposal.mode == "generate" and not report.ok():
                v = report.violations[0]
                node.status = "failed"
                emit("action_result", rank=rank, status="failed",
                     error=f"rejected by validation: {v.message}")
                executed.append(ExecutedCandidate(
                    proposal, rank, node, None, None,
                    evaluate_outcome(None, proposal.facts, backend, failure=v.message),
                    failure=v.message,
                ))
                continue

            for i, action in enumerate(proposal.actions):
                emit("action_selected", rank=rank, index=i, action=action_to_jsonable(action))

            attempt = 0
            figure: FigureState | None = None
            seed: CoordinationSeed | None = None
            failure: str | None = None
            while attempt <= config.retries:
                if budget <= 0:
                    if best is not None or executed:
                        raise BudgetExhausted("action budget exhausted", tuple(trace))
                    raise BudgetExhausted("action budget exhausted with no result", tuple(trace))
                budget -= 1
                attempt += 1
                try:
                    figure, seed = _execute_candidate(
                        proposal, text, interaction, catalog, figures,
                        target_figure, artifact_id, make_figure_id, context,
                    )
                    failure = None
                    break
                except FigstateError as exc:
                    failure = str(exc)
                    emit("action_result", rank=rank, status="failed", attempt=attempt, error=failure)

            if failure is None and figure is not None:
                node.status = "ok"
                node.figure_id = figure.figure_id
                n_new = len(proposal.actions) if proposal.mode == "manipulate" else len(figure.code.steps)
                for record in figure.code.steps[len(figure.code.steps) - n_new:]:
                    emit("action_result", rank=rank, index=record.index,
                         status=record.status, digest=record.result_digest)
                emit("action_result", rank=rank, status="ok",
                     figure_id=figure.figure_id, rows=len(figure.data.rows),
                     digest=figure.data.digest)
            else:
                node.status = "failed"

            evaluation = evaluate_outcome(figure, proposal.facts, backend, failure=failure)
            node.score = evaluation.score
            emit("evaluation", rank=rank, score=evaluation.score, rationale=evaluation.rationale)
            executed.append(ExecutedCandidate(proposal, rank, node, figure, seed, evaluation, failure))

        chosen = select_action(tree, executed)
        parent_node = chosen.node.node_id
        if best is None or chosen.evaluation.score > best.evaluation.score:
            best = chosen

        summary = StepRecord(
            figure_id=chosen.figure.figure_id if chosen.figure else "",
            step_index=depth,
            objective=text or (interaction.kind.value if interaction else ""),
            status="ok" if chosen.failure is None else "failed",
            result_summary=(
                f"{chosen.figure.visualization.chart_type.value} over {len(chosen.figure.data.rows)} rows"
                if chosen.figure else (chosen.failure or "no result")
            ),
            score=chosen.evaluation.score,
            rationale=chosen.evaluation.rationale,
            remaining=chosen.evaluation.remaining_plan or "",
        )
        context = context.with_record(summary)
        emit("round", depth=depth, chosen_rank=chosen.rank, score=chosen.evaluation.score)

        if chosen.evaluation.score >= config.tau and chosen.figure is not None:
            if chosen.figure is not None:
                context = context.with_focus(chosen.figure, artifact_id)
            return LoopOutcome(
                figures=(chosen.figure,),
                seeds=(chosen.seed,) if chosen.seed else (),
                context=context,
                trace=tuple(trace),
                evaluation=chosen.evaluation,
                tree=tree,
            )

    if best is None or best.figure is None:
        raise AllBranchesFailed("no proposal executed successfully", tuple(trace))
    raise BudgetExhausted(
        f"no outcome reached tau={config.tau}; best score {best.evaluation.score}",
        tuple(trace),
    )


def _execute_candidate(
    proposal: Proposal,
    text: str | None,
    interaction: InteractionEvent | None,
    catalog: TableCatalog,
    figures: Mapping[str, FigureState],
    target_figure: str | None,
    artifact_id: str,
    make_figure_id: Callable[[], str],
    context: DataContext,
) -> tuple[FigureState, CoordinationSeed | None]:
    description = text or "interaction follow-up"
    if proposal.mode == "extend":
        if interaction is None:
            raise AllBranchesFailed("extension proposal without a gesture")
        source = figures.get(interaction.figure_id)
        if source is None:
            raise AllBranchesFailed(f"unknown source figure {interaction.figure_id!r}")
        return extend_from_selection(
            source, interaction, proposal.actions, catalog, make_figure_id(), description,
        )
    if proposal.mode == "manipulate":
        fid = target_figure or (context.focus.figure_id if context.focus else None)
        target = figures.get(fid) if fid else None
        if target is None:
            raise AllBranchesFailed("manipulation proposal without a target figure")
        return apply_manipulation(target, proposal.actions, catalog, description), None
    figure = build_figure(
        proposal.actions, catalog, make_figure_id(), artifact_id, description,
    )
    return figure, None
