"""figstate: interactive figures as first-class, provenance-carrying objects.

Every figure bundles four legs: the chart document, the action program that
produced it, the exact data slice it renders, and version metadata. Gestures
on marks translate to predicates, extensions create coordinated figures, and
the whole exploration lives in a replayable version DAG.
"""

from figstate.compiler.actions import (
    Action,
    ActionKind,
    ActionRecord,
    ProvenanceProgram,
    validate_sequence,
)
from figstate.compiler.interactions import GestureKind, InteractionEvent, interaction_to_predicate
from figstate.compiler.pipeline import (
    apply_manipulation,
    build_figure,
    compile_to_chart,
    compile_to_query,
    extend_from_selection,
    replay_figure,
)
from figstate.compiler.predicates import Comparison, Membership, Predicate, RangeAtom
from figstate.engine.catalog import TableCatalog
from figstate.engine.executor import evaluate_expression, execute_plan
from figstate.model.charts import (
    Aggregate,
    Channel,
    ChartDoc,
    ChartType,
    EncodingSpec,
    InteractionDecl,
    InteractionKind,
    MarkMap,
    MarkRecord,
    Scale,
    materialize_marks,
    summarize_insight,
    to_chart_grammar,
)
from figstate.model.figures import FigureMeta, FigureState, Operation, mark_map_for, validate_figure
from figstate.model.slices import Column, DataSlice, Lineage, Row, SemanticType, compute_digest

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ActionKind",
    "ActionRecord",
    "Aggregate",
    "Channel",
    "ChartDoc",
    "ChartType",
    "Column",
    "Comparison",
    "DataSlice",
    "EncodingSpec",
    "FigureMeta",
    "FigureState",
    "GestureKind",
    "InteractionDecl",
    "InteractionEvent",
    "InteractionKind",
    "Lineage",
    "MarkMap",
    "MarkRecord",
    "Membership",
    "Operation",
    "Predicate",
    "ProvenanceProgram",
    "RangeAtom",
    "Row",
    "Scale",
    "SemanticType",
    "TableCatalog",
    "apply_manipulation",
    "build_figure",
    "compile_to_chart",
    "compile_to_query",
    "compute_digest",
    "evaluate_expression",
    "execute_plan",
    "extend_from_selection",
    "interaction_to_predicate",
    "mark_map_for",
    "materialize_marks",
    "replay_figure",
    "summarize_insight",
    "to_chart_grammar",
    "validate_figure",
    "validate_sequence",
]
