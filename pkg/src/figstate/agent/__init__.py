"""Plan-action-observation loop with pluggable intent backends."""

from figstate.agent.backends import (
    HttpChatBackend,
    IntentBackend,
    Proposal,
    QueryClass,
    RequestFacts,
    ScriptedBackend,
    TemplateBackend,
    literature_search,
    make_backend,
)
from figstate.agent.context import DataContext, FigureSummary, StepRecord
from figstate.agent.loop import (
    Evaluation,
    LoopConfig,
    LoopOutcome,
    Route,
    SearchTree,
    TraceEvent,
    TriageResult,
    evaluate_outcome,
    run_loop,
    select_action,
    triage,
)

__all__ = [
    "DataContext",
    "Evaluation",
    "FigureSummary",
    "HttpChatBackend",
    "IntentBackend",
    "LoopConfig",
    "LoopOutcome",
    "Proposal",
    "QueryClass",
    "RequestFacts",
    "Route",
    "ScriptedBackend",
    "SearchTree",
    "StepRecord",
    "TemplateBackend",
    "TraceEvent",
    "TriageResult",
    "evaluate_outcome",
    "literature_search",
    "make_backend",
    "run_loop",
    "select_action",
    "triage",
]
