"""The compositional action space and the recorded programs built from it.

Actions are the only vocabulary the system executes: a closed set of data
steps (select/filter/join/derive/aggregate/sort/analyze) and chart steps
(chart type, encodings, params, data binding). A ProvenanceProgram is the
ordered, replayable record of the actions that produced a figure.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Mapping, Union

from figstate.compiler import expressions as xp
from figstate.compiler import predicates as pr
from figstate.model.charts import (
    Aggregate,
    Channel,
    ChartType,
    EncodingSpec,
    InteractionDecl,
    InteractionKind,
    REQUIRED_CHANNELS,
    Scale,
)
from figstate.model.slices import Column, SemanticType

#: table id -> (columns, distinct nominal values capped per column); the
#: value lists exist so intent backends can ground phrases like "for florida"
#: without touching the engine.
CatalogSchema = Mapping[str, "TableInfo"]


@dataclass(frozen=True)
class TableInfo:
    columns: tuple[Column, ...]
    nominal_values: Mapping[str, tuple[Any, ...]] = field(default_factory=dict)

    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)


class ActionKind(str, Enum):
    SELECT_TABLE = "select_table"
    SELECT_COLUMNS = "select_columns"
    FILTER_ROWS = "filter_rows"
    JOIN_TABLES = "join_tables"
    DERIVE_COLUMN = "derive_column"
    AGGREGATE = "aggregate"
    SORT_LIMIT = "sort_limit"
    ANALYZE = "analyze"
    ADD_CHART_TYPE = "add_chart_type"
    ADD_PARAMS = "add_params"
    ADD_DATA = "add_data"
    UPDATE_DATA = "update_data"
    ADD_ENCODING = "add_encoding"
    UPDATE_ENCODING = "update_encoding"


class AnalyzeOp(str, Enum):
    TOPK = "topk"
    PERCENTAGE_OF_TOTAL = "percentage_of_total"
    BINNING = "binning"
    ZSCORE = "zscore"


@dataclass(frozen=True)
class AggSpec:
    op: Aggregate
    column: str
    out: str = ""

    def out_name(self) -> str:
        return self.out or f"{self.column}_{self.op.value}"


@dataclass(frozen=True)
class SortKey:
    column: str
    descending: bool = False


@dataclass(frozen=True)
class SelectTable:
    table: str
    kind = ActionKind.SELECT_TABLE


@dataclass(frozen=True)
class SelectColumns:
    columns: tuple[str, ...]
    kind = ActionKind.SELECT_COLUMNS


@dataclass(frozen=True)
class FilterRows:
    predicate: pr.Predicate
    #: set when the filter materializes a gesture selection; coordination
    #: schemas use it to locate their predicate hole
    selection: bool = False
    kind = ActionKind.FILTER_ROWS


@dataclass(frozen=True)
class JoinTables:
    table: str
    left_key: str
    right_key: str
    kind = ActionKind.JOIN_TABLES


@dataclass(frozen=True)
class DeriveColumn:
    column: str
    expression: xp.Expr
    kind = ActionKind.DERIVE_COLUMN


@dataclass(frozen=True)
class AggregateRows:
    group_by: tuple[str, ...]
    aggs: tuple[AggSpec, ...]
    kind = ActionKind.AGGREGATE


@dataclass(frozen=True)
class SortLimit:
    keys: tuple[SortKey, ...]
    limit: int | None = None
    kind = ActionKind.SORT_LIMIT


@dataclass(frozen=True)
class Analyze:
    op: AnalyzeOp
    column: str
    k: int | None = None
    bins: int | None = None
    out: str = ""
    kind = ActionKind.ANALYZE

    def out_name(self) -> str:
        if self.out:
            return self.out
        suffix = {"percentage_of_total": "pct", "binning": "bin", "zscore": "z"}.get(self.op.value, self.op.value)
        return f"{self.column}_{suffix}"


@dataclass(frozen=True)
class AddChartType:
    chart_type: ChartType
    kind = ActionKind.ADD_CHART_TYPE


@dataclass(frozen=True)
class AddParams:
    decl: InteractionDecl
    kind = ActionKind.ADD_PARAMS


@dataclass(frozen=True)
class AddData:
    table: str | None = None  # None binds the current query result
    kind = ActionKind.ADD_DATA


@dataclass(frozen=True)
class UpdateData:
    kind = ActionKind.UPDATE_DATA


@dataclass(frozen=True)
class AddEncoding:
    channel: Channel
    spec: EncodingSpec
    kind = ActionKind.ADD_ENCODING


@dataclass(frozen=True)
class UpdateEncoding:
    channel: Channel
    spec: EncodingSpec
    kind = ActionKind.UPDATE_ENCODING


Action = Union[
    SelectTable, SelectColumns, FilterRows, JoinTables, DeriveColumn,
    AggregateRows, SortLimit, Analyze, AddChartType, AddParams, AddData,
    UpdateData, AddEncoding, UpdateEncoding,
]

QUERY_KINDS = frozenset({
    ActionKind.SELECT_TABLE, ActionKind.SELECT_COLUMNS, ActionKind.FILTER_ROWS,
    ActionKind.JOIN_TABLES, ActionKind.DERIVE_COLUMN, ActionKind.AGGREGATE,
    ActionKind.SORT_LIMIT, ActionKind.ANALYZE,
})
CHART_KINDS = frozenset({
    ActionKind.ADD_CHART_TYPE, ActionKind.ADD_PARAMS,
    ActionKind.ADD_ENCODING, ActionKind.UPDATE_ENCODING,
})
BINDING_KINDS = frozenset({ActionKind.ADD_DATA, ActionKind.UPDATE_DATA})

#: kinds apply_manipulation accepts; generation-only kinds are rejected
MANIPULATION_KINDS = frozenset({
    ActionKind.DERIVE_COLUMN, ActionKind.FILTER_ROWS, ActionKind.ANALYZE,
    ActionKind.UPDATE_DATA, ActionKind.UPDATE_ENCODING, ActionKind.ADD_PARAMS,
})


def is_query_kind(action: Action) -> bool:
    return action.kind in QUERY_KINDS


# --- provenance programs ---------------------------------------------------------


@dataclass(frozen=True)
class ActionRecord:
    index: int
    action: Action
    generated_query_text: str | None = None
    status: str = "ok"  # ok | failed
    result_digest: str | None = None
    nondeterministic: bool = False


@dataclass(frozen=True)
class ProvenanceProgram:
    steps: tuple[ActionRecord, ...] = ()

    def actions(self) -> tuple[Action, ...]:
        return tuple(s.action for s in self.steps)

    def check(self) -> None:
        """Raise ValueError on structural violations."""
        for i, step in enumerate(self.steps):
            if step.index != i:
                raise ValueError(f"record index {step.index} at position {i}; indices must be contiguous from 0")
        chart_types = [s for s in self.steps if s.action.kind is ActionKind.ADD_CHART_TYPE]
        if len(chart_types) > 1:
            raise ValueError("at most one add_chart_type per program")
        added_channels: set[Channel] = set()
        data_bound = False
        for step in self.steps:
            a = step.action
            if a.kind is ActionKind.ADD_ENCODING:
                added_channels.add(a.channel)
            elif a.kind is ActionKind.UPDATE_ENCODING and a.channel not in added_channels:
                raise ValueError(f"update_encoding on {a.channel.value} precedes its add_encoding")
            elif a.kind is ActionKind.ADD_DATA:
                data_bound = True
            elif a.kind is ActionKind.UPDATE_DATA and not data_bound:
                raise ValueError("update_data precedes add_data")


# --- sequence validation -----------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    step_index: int
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    def ok(self) -> bool:
        return not self.violations


def _agg_output(columns: list[Column], action: AggregateRows) -> list[Column]:
    by_name = {c.name: c for c in columns}
    out = [by_name[g] for g in action.group_by if g in by_name]
    for spec in action.aggs:
        if spec.op in (Aggregate.MIN, Aggregate.MAX) and spec.column in by_name:
            stype = by_name[spec.column].stype
        else:
            stype = SemanticType.QUANTITATIVE
        out.append(Column(spec.out_name(), stype))
    return out


def validate_sequence(
    steps: Iterable[Action],
    catalog_schema: CatalogSchema,
    initial_schema: tuple[Column, ...] | None = None,
) -> ValidationReport:
    """Static checks over an action sequence; an empty report means the
    sequence is compilable. The data schema is threaded through the steps so
    later references see earlier projections, derivations, and aggregations.
    """
    steps = list(steps)
    violations: list[Violation] = []
    columns: list[Column] | None = list(initial_schema) if initial_schema is not None else None
    chart_type: ChartType | None = None
    encoded: dict[Channel, EncodingSpec] = {}
    data_bound = False

    def bad(i: int, code: str, message: str) -> None:
        violations.append(Violation(i, code, message))

    def known(name: str) -> bool:
        return columns is not None and any(c.name == name for c in columns)

    def stype(name: str) -> SemanticType | None:
        if columns is None:
            return None
        for c in columns:
            if c.name == name:
                return c.stype
        return None

    for i, action in enumerate(steps):
        kind = action.kind
        if kind is ActionKind.SELECT_TABLE:
            if columns is not None:
                bad(i, "table_already_selected", "select_table must be the first data step")
            elif action.table not in catalog_schema:
                bad(i, "unknown_table", f"unknown table {action.table!r}")
            else:
                columns = list(catalog_schema[action.table].columns)
        elif kind is ActionKind.SELECT_COLUMNS:
            if columns is None:
                bad(i, "no_data", "select_columns before any table is selected")
            else:
                for name in action.columns:
                    if not known(name):
                        bad(i, "unknown_column", f"unknown column {name!r}")
                columns = [c for n in action.columns for c in columns if c.name == n]
        elif kind is ActionKind.FILTER_ROWS:
            if columns is None:
                bad(i, "no_data", "filter_rows before any table is selected")
            else:
                for msg in pr.validate_predicate(action.predicate, columns):
                    bad(i, "bad_predicate", msg)
        elif kind is ActionKind.JOIN_TABLES:
            if columns is None:
                bad(i, "no_data", "join_tables before any table is selected")
            elif action.table not in catalog_schema:
                bad(i, "unknown_table", f"unknown table {action.table!r}")
            else:
                right = list(catalog_schema[action.table].columns)
                if not known(action.left_key):
                    bad(i, "unknown_column", f"unknown join key {action.left_key!r}")
                if not any(c.name == action.right_key for c in right):
                    bad(i, "unknown_column", f"unknown join key {action.right_key!r} in {action.table!r}")
                else:
                    incoming = [c for c in right if c.name != action.right_key]
                    clashes = {c.name for c in incoming} & {c.name for c in (columns or [])}
                    if clashes:
                        bad(i, "duplicate_column", f"join would duplicate column(s): {sorted(clashes)}")
                    columns = (columns or []) + incoming
        elif kind is ActionKind.DERIVE_COLUMN:
            if columns is None:
                bad(i, "no_data", "derive_column before any table is selected")
            else:
                for msg in xp.validate(action.expression):
                    bad(i, "bad_expression", msg)
                for name in xp.referenced_columns(action.expression):
                    if not known(name):
                        bad(i, "unknown_column", f"unknown column {name!r} in expression")
                    elif stype(name) is not SemanticType.QUANTITATIVE:
                        bad(i, "bad_expression", f"expression references non-quantitative column {name!r}")
                if known(action.column):
                    bad(i, "duplicate_column", f"derived column {action.column!r} already exists")
                else:
                    out_type = SemanticType.QUANTITATIVE if xp.is_numeric(action.expression) else SemanticType.NOMINAL
                    columns = columns + [Column(action.column, out_type)]
        elif kind is ActionKind.AGGREGATE:
            if columns is None:
                bad(i, "no_data", "aggregate before any table is selected")
            else:
                if not action.aggs:
                    bad(i, "bad_aggregate", "aggregate needs at least one agg spec")
                for g in action.group_by:
                    if not known(g):
                        bad(i, "unknown_column", f"unknown group column {g!r}")
                seen_out = set(action.group_by)
                for spec in action.aggs:
                    if not known(spec.column):
                        bad(i, "unknown_column", f"unknown aggregated column {spec.column!r}")
                    elif spec.op in (Aggregate.SUM, Aggregate.MEAN) and stype(spec.column) is not SemanticType.QUANTITATIVE:
                        bad(i, "bad_aggregate", f"{spec.op.value} requires a quantitative column, got {spec.column!r}")
                    if spec.out_name() in seen_out:
                        bad(i, "duplicate_column", f"duplicate aggregate output {spec.out_name()!r}")
                    seen_out.add(spec.out_name())
                columns = _agg_output(columns, action)
        elif kind is ActionKind.SORT_LIMIT:
            if columns is None:
                bad(i, "no_data", "sort_limit before any table is selected")
            else:
                for key in action.keys:
                    if not known(key.column):
                        bad(i, "unknown_column", f"unknown sort column {key.column!r}")
                if action.limit is not None and action.limit < 0:
                    bad(i, "bad_limit", "limit must be >= 0")
        elif kind is ActionKind.ANALYZE:
            if columns is None:
                bad(i, "no_data", "analyze before any table is selected")
            else:
                if not known(action.column):
                    bad(i, "unknown_column", f"unknown column {action.column!r}")
                elif stype(action.column) is not SemanticType.QUANTITATIVE:
                    bad(i, "bad_analyze", f"{action.op.value} requires a quantitative column")
                if action.op is AnalyzeOp.TOPK and (action.k is None or action.k < 1):
                    bad(i, "bad_analyze", "topk requires k >= 1")
                if action.op is AnalyzeOp.BINNING and (action.bins is None or action.bins < 1):
                    bad(i, "bad_analyze", "binning requires bins >= 1")
                if action.op is not AnalyzeOp.TOPK:
                    if known(action.out_name()):
                        bad(i, "duplicate_column", f"analyze output {action.out_name()!r} already exists")
                    else:
                        columns = columns + [Column(action.out_name(), SemanticType.QUANTITATIVE)]
        elif kind is ActionKind.ADD_CHART_TYPE:
            if chart_type is not None:
                bad(i, "chart_type_already_set", "at most one add_chart_type per sequence")
            chart_type = action.chart_type
        elif kind is ActionKind.ADD_ENCODING:
            if chart_type is None:
                bad(i, "encoding_precedes_chart_type", "encoding precedes chart type")
            if action.channel in encoded:
                bad(i, "channel_already_encoded", f"channel {action.channel.value} already encoded; use update_encoding")
            _check_encoding(action.channel, action.spec, columns, bad, i, stype)
            encoded[action.channel] = action.spec
        elif kind is ActionKind.UPDATE_ENCODING:
            if action.channel not in encoded:
                bad(i, "update_without_add", f"update_encoding on {action.channel.value} without prior add_encoding")
            _check_encoding(action.channel, action.spec, columns, bad, i, stype)
            encoded[action.channel] = action.spec
        elif kind is ActionKind.ADD_PARAMS:
            decl = action.decl
            if decl.kind is InteractionKind.INTERVAL_1D:
                if len(decl.channels) != 1 or decl.channels[0] not in (Channel.X, Channel.Y):
                    bad(i, "bad_params", "interval_1d must name exactly one of x|y")
            elif decl.kind is InteractionKind.INTERVAL_2D:
                if set(decl.channels) != {Channel.X, Channel.Y}:
                    bad(i, "bad_params", "interval_2d must bind x and y")
            for ch in decl.channels:
                if ch not in encoded:
                    bad(i, "unencoded_channel", f"interaction binds unencoded channel {ch.value}")
        elif kind is ActionKind.ADD_DATA:
            if action.table is not None:
                if columns is not None:
                    bad(i, "table_already_selected", "add_data table conflicts with earlier data steps")
                elif action.table not in catalog_schema:
                    bad(i, "unknown_table", f"unknown table {action.table!r}")
                else:
                    columns = list(catalog_schema[action.table].columns)
            elif columns is None:
                bad(i, "no_data", "add_data with no query result to bind")
            data_bound = True
        elif kind is ActionKind.UPDATE_DATA:
            if not data_bound:
                bad(i, "update_without_add", "update_data without prior add_data")
        else:  # pragma: no cover - exhaustive
            bad(i, "unknown_kind", f"unknown action kind {kind}")

    if chart_type is not None:
        for ch in sorted(REQUIRED_CHANNELS[chart_type], key=lambda c: c.value):
            if ch not in encoded:
                violations.append(Violation(
                    len(steps), "missing_channel",
                    f"{chart_type.value} chart missing required channel {ch.value}",
                ))

    return ValidationReport(tuple(violations))


def _check_encoding(channel, spec, columns, bad, i, stype) -> None:
    if columns is not None and not any(c.name == spec.field for c in columns):
        bad(i, "unknown_column", f"unknown column {spec.field!r} for channel {channel.value}")
        return
    if spec.scale is Scale.LOG and columns is not None and stype(spec.field) is not SemanticType.QUANTITATIVE:
        bad(i, "log_scale_non_quantitative", f"log scale on non-quantitative field {spec.field!r}")
    if spec.aggregate in (Aggregate.SUM, Aggregate.MEAN) and columns is not None \
            and stype(spec.field) is not SemanticType.QUANTITATIVE:
        bad(i, "bad_aggregate", f"{spec.aggregate.value} requires a quantitative field, got {spec.field!r}")


# --- JSON round-trip ------------------------------------------------------------------


def action_to_jsonable(action: Action) -> dict[str, Any]:
    kind = action.kind.value
    if isinstance(action, SelectTable):
        args: dict[str, Any] = {"table": action.table}
    elif isinstance(action, SelectColumns):
        args = {"columns": list(action.columns)}
    elif isinstance(action, FilterRows):
        args = {"predicate": pr.predicate_to_jsonable(action.predicate), "selection": action.selection}
    elif isinstance(action, JoinTables):
        args = {"table": action.table, "left_key": action.left_key, "right_key": action.right_key}
    elif isinstance(action, DeriveColumn):
        args = {"column": action.column, "expression": xp.to_jsonable(action.expression)}
    elif isinstance(action, AggregateRows):
        args = {
            "group_by": list(action.group_by),
            "aggs": [{"op": s.op.value, "column": s.column, "out": s.out} for s in action.aggs],
        }
    elif isinstance(action, SortLimit):
        args = {
            "keys": [{"column": k.column, "descending": k.descending} for k in action.keys],
            "limit": action.limit,
        }
    elif isinstance(action, Analyze):
        args = {"op": action.op.value, "column": action.column, "k": action.k, "bins": action.bins, "out": action.out}
    elif isinstance(action, AddChartType):
        args = {"chart_type": action.chart_type.value}
    elif isinstance(action, AddParams):
        args = {"kind": action.decl.kind.value, "channels": [c.value for c in action.decl.channels]}
    elif isinstance(action, AddData):
        args = {"table": action.table}
    elif isinstance(action, UpdateData):
        args = {}
    elif isinstance(action, (AddEncoding, UpdateEncoding)):
        args = {
            "channel": action.channel.value,
            "field": action.spec.field,
            "scale": action.spec.scale.value,
            "aggregate": action.spec.aggregate.value if action.spec.aggregate else None,
        }
    else:  # pragma: no cover - exhaustive
        raise TypeError(f"unknown action {action!r}")
    return {"kind": kind, "args": args}


def action_from_jsonable(payload: Mapping[str, Any]) -> Action:
    kind = ActionKind(payload["kind"])
    args = payload.get("args", {})
    if kind is ActionKind.SELECT_TABLE:
        return SelectTable(args["table"])
    if kind is ActionKind.SELECT_COLUMNS:
        return SelectColumns(tuple(args["columns"]))
    if kind is ActionKind.FILTER_ROWS:
        return FilterRows(pr.predicate_from_jsonable(args["predicate"]), bool(args.get("selection", False)))
    if kind is ActionKind.JOIN_TABLES:
        return JoinTables(args["table"], args["left_key"], args["right_key"])
    if kind is ActionKind.DERIVE_COLUMN:
        return DeriveColumn(args["column"], xp.from_jsonable(args["expression"]))
    if kind is ActionKind.AGGREGATE:
        return AggregateRows(
            tuple(args["group_by"]),
            tuple(AggSpec(Aggregate(s["op"]), s["column"], s.get("out", "")) for s in args["aggs"]),
        )
    if kind is ActionKind.SORT_LIMIT:
        return SortLimit(
            tuple(SortKey(k["column"], bool(k.get("descending", False))) for k in args["keys"]),
            args.get("limit"),
        )
    if kind is ActionKind.ANALYZE:
        return Analyze(AnalyzeOp(args["op"]), args["column"], args.get("k"), args.get("bins"), args.get("out", ""))
    if kind is ActionKind.ADD_CHART_TYPE:
        return AddChartType(ChartType(args["chart_type"]))
    if kind is ActionKind.ADD_PARAMS:
        return AddParams(InteractionDecl(InteractionKind(args["kind"]), tuple(Channel(c) for c in args["channels"])))
    if kind is ActionKind.ADD_DATA:
        return AddData(args.get("table"))
    if kind is ActionKind.UPDATE_DATA:
        return UpdateData()
    spec = EncodingSpec(
        field=args["field"],
        scale=Scale(args["scale"]),
        aggregate=Aggregate(args["aggregate"]) if args.get("aggregate") else None,
    )
    if kind is ActionKind.ADD_ENCODING:
        return AddEncoding(Channel(args["channel"]), spec)
    return UpdateEncoding(Channel(args["channel"]), spec)


def record_to_jsonable(record: ActionRecord) -> dict[str, Any]:
    return {
        "index": record.index,
        "action": action_to_jsonable(record.action),
        "generated_query_text": record.generated_query_text,
        "status": record.status,
        "result_digest": record.result_digest,
        "nondeterministic": record.nondeterministic,
    }


def record_from_jsonable(payload: Mapping[str, Any]) -> ActionRecord:
    return ActionRecord(
        index=int(payload["index"]),
        action=action_from_jsonable(payload["action"]),
        generated_query_text=payload.get("generated_query_text"),
        status=payload.get("status", "ok"),
        result_digest=payload.get("result_digest"),
        nondeterministic=bool(payload.get("nondeterministic", False)),
    )


def program_to_jsonable(program: ProvenanceProgram) -> dict[str, Any]:
    return {"steps": [record_to_jsonable(s) for s in program.steps]}


def program_from_jsonable(payload: Mapping[str, Any]) -> ProvenanceProgram:
    return ProvenanceProgram(tuple(record_from_jsonable(s) for s in payload.get("steps", [])))


def demote_selection(action: Action) -> Action:
    """Clear the selection flag on a filter; inherited prefixes keep their
    filtering semantics but only the new extension's filter is a hole."""
    if isinstance(action, FilterRows) and action.selection:
        return FilterRows(action.predicate, selection=False)
    return action


def append_records(program: ProvenanceProgram, records: Iterable[ActionRecord]) -> ProvenanceProgram:
    """Append-only extension; existing records are never rewritten."""
    base = len(program.steps)
    extended = list(program.steps)
    for j, rec in enumerate(records):
        extended.append(replace(rec, index=base + j))
    return ProvenanceProgram(tuple(extended))
