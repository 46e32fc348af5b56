"""Chart documents and deterministic mark materialization.

A ChartDoc is the declarative visualization leg of a figure. Marks are
addressable: every rendered element (bar, point, slice, line vertex, table
row) gets a stable id and the exact set of row keys it was drawn from, which
is what makes gestures translatable back into predicates.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping

from figstate.errors import EmptyData, LogScaleDomainError, UnknownColumn, ValidationFailed
from figstate.model.slices import Column, DataSlice, SemanticType, canonical_cell


class ChartType(str, Enum):
    BAR = "bar"
    LINE = "line"
    SCATTER = "scatter"
    PIE = "pie"
    AREA = "area"
    TABLE = "table"


class Channel(str, Enum):
    X = "x"
    Y = "y"
    COLOR = "color"
    SIZE = "size"
    THETA = "theta"
    TOOLTIP = "tooltip"
    ROW_LABEL = "row_label"


class Scale(str, Enum):
    LINEAR = "linear"
    LOG = "log"
    ORDINAL = "ordinal"
    TEMPORAL = "temporal"


class Aggregate(str, Enum):
    SUM = "sum"
    MEAN = "mean"
    COUNT = "count"
    MIN = "min"
    MAX = "max"


#: channels a chart type cannot render without
REQUIRED_CHANNELS: dict[ChartType, frozenset[Channel]] = {
    ChartType.BAR: frozenset({Channel.X, Channel.Y}),
    ChartType.LINE: frozenset({Channel.X, Channel.Y}),
    ChartType.AREA: frozenset({Channel.X, Channel.Y}),
    ChartType.SCATTER: frozenset({Channel.X, Channel.Y}),
    ChartType.PIE: frozenset({Channel.THETA, Channel.COLOR}),
    ChartType.TABLE: frozenset({Channel.ROW_LABEL}),
}

#: canonical channel order for grouping and mark-id hashing
CHANNEL_ORDER = (
    Channel.X,
    Channel.Y,
    Channel.COLOR,
    Channel.SIZE,
    Channel.THETA,
    Channel.TOOLTIP,
    Channel.ROW_LABEL,
)


def default_scale(stype: SemanticType) -> Scale:
    if stype is SemanticType.QUANTITATIVE:
        return Scale.LINEAR
    if stype is SemanticType.TEMPORAL:
        return Scale.TEMPORAL
    return Scale.ORDINAL


@dataclass(frozen=True)
class EncodingSpec:
    field: str
    scale: Scale
    aggregate: Aggregate | None = None

    def label(self) -> str:
        return f"{self.aggregate.value}({self.field})" if self.aggregate else self.field


class InteractionKind(str, Enum):
    SINGLE_SELECT = "single_select"
    INTERVAL_1D = "interval_1d"
    INTERVAL_2D = "interval_2d"
    HOVER = "hover"


@dataclass(frozen=True)
class InteractionDecl:
    kind: InteractionKind
    channels: tuple[Channel, ...] = ()


@dataclass(frozen=True)
class MarkRecord:
    mark_id: str
    channel_values: Mapping[Channel, Any]
    row_keys: frozenset[str]


@dataclass(frozen=True)
class ChartDoc:
    chart_type: ChartType
    encodings: Mapping[Channel, EncodingSpec]
    params: tuple[InteractionDecl, ...] = ()
    marks: tuple[MarkRecord, ...] = ()
    insight_text: str = ""

    def encoding(self, channel: Channel) -> EncodingSpec | None:
        return self.encodings.get(channel)

    def grouping_channels(self) -> tuple[Channel, ...]:
        """Encoded channels without an aggregate, in canonical order."""
        return tuple(
            ch for ch in CHANNEL_ORDER
            if ch in self.encodings and self.encodings[ch].aggregate is None
        )

    def aggregated(self) -> bool:
        return any(spec.aggregate is not None for spec in self.encodings.values())


@dataclass(frozen=True)
class MarkMap:
    """The chart-side half of the bidirectional bridge: mark ids to row-key
    sets, plus the channel-to-column bindings gestures resolve against."""

    figure_id: str
    entries: Mapping[str, frozenset[str]]
    bindings: Mapping[Channel, tuple[str, Scale]]


def validate_chart_doc(chart: ChartDoc, schema: tuple[Column, ...] | None = None) -> None:
    """Raise ValidationFailed/UnknownColumn on structural violations."""
    missing = REQUIRED_CHANNELS[chart.chart_type] - set(chart.encodings)
    if missing:
        names = ", ".join(sorted(ch.value for ch in missing))
        raise ValidationFailed(f"{chart.chart_type.value} chart missing required channel(s): {names}")
    if schema is not None:
        names = {c.name for c in schema}
        for ch, spec in chart.encodings.items():
            if spec.field not in names:
                raise UnknownColumn(spec.field, f"encoding {ch.value}")
    for decl in chart.params:
        for ch in decl.channels:
            if ch not in chart.encodings:
                raise ValidationFailed(f"interaction {decl.kind.value} binds unencoded channel {ch.value}")
    seen: set[str] = set()
    for mark in chart.marks:
        if mark.mark_id in seen:
            raise ValidationFailed(f"duplicate mark id {mark.mark_id}")
        seen.add(mark.mark_id)


# --- materialization -------------------------------------------------------------


def _aggregate_values(agg: Aggregate, values: list[Any]) -> Any:
    if agg is Aggregate.COUNT:
        return float(len(values))
    if agg is Aggregate.SUM:
        return float(sum(values))
    if agg is Aggregate.MEAN:
        return float(sum(values)) / len(values)
    if agg is Aggregate.MIN:
        return min(values)
    if agg is Aggregate.MAX:
        return max(values)
    raise ValueError(f"unknown aggregate {agg}")


def _mark_id(channel_values: Mapping[Channel, Any]) -> str:
    payload = "|".join(
        f"{ch.value}={canonical_cell(channel_values[ch])}"
        for ch in CHANNEL_ORDER
        if ch in channel_values
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def _sort_key(value: Any) -> tuple[int, Any]:
    # Numbers before strings; keeps mixed-type channels totally ordered.
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (0, value)
    return (1, str(value))


def materialize_marks(chart: ChartDoc, data: DataSlice) -> tuple[tuple[MarkRecord, ...], MarkMap]:
    """Turn encodings + data into addressable marks.

    When encodings declare aggregates, rows are grouped here by all
    non-aggregated encoded fields; otherwise each row is its own mark.
    Mark ids are content hashes of the channel values (canonical channel
    order), with a deterministic occurrence suffix for duplicates.
    """
    encodings = dict(chart.encodings)
    missing = REQUIRED_CHANNELS[chart.chart_type] - set(encodings)
    if missing:
        names = ", ".join(sorted(ch.value for ch in missing))
        raise ValidationFailed(f"{chart.chart_type.value} chart missing required channel(s): {names}")
    for ch, spec in encodings.items():
        if not data.has_column(spec.field):
            raise UnknownColumn(spec.field, f"encoding {ch.value}")

    if not data.rows and chart.chart_type is not ChartType.TABLE:
        raise EmptyData(f"{chart.chart_type.value} chart over zero rows")

    grouping = [ch for ch in CHANNEL_ORDER if ch in encodings and encodings[ch].aggregate is None]
    aggregated = [ch for ch in CHANNEL_ORDER if ch in encodings and encodings[ch].aggregate is not None]

    raw_marks: list[tuple[dict[Channel, Any], frozenset[str]]] = []
    if aggregated:
        groups: dict[tuple[Any, ...], list[Any]] = {}
        order: list[tuple[Any, ...]] = []
        col_idx = {ch: data.column_index(encodings[ch].field) for ch in encodings}
        for row in data.rows:
            key = tuple(row.values[col_idx[ch]] for ch in grouping)
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append(row)
        for key in order:
            members = groups[key]
            channel_values: dict[Channel, Any] = {ch: v for ch, v in zip(grouping, key)}
            for ch in aggregated:
                spec = encodings[ch]
                vals = [r.values[col_idx[ch]] for r in members]
                channel_values[ch] = _aggregate_values(spec.aggregate, vals)
            raw_marks.append((channel_values, frozenset(r.key for r in members)))
    else:
        col_idx = {ch: data.column_index(encodings[ch].field) for ch in encodings}
        for row in data.rows:
            channel_values = {ch: row.values[col_idx[ch]] for ch in encodings}
            raw_marks.append((channel_values, frozenset({row.key})))

    if chart.chart_type in (ChartType.LINE, ChartType.AREA):
        raw_marks.sort(key=lambda m: _sort_key(m[0].get(Channel.X)))

    for ch, spec in encodings.items():
        if spec.scale is Scale.LOG:
            for channel_values, _ in raw_marks:
                v = channel_values[ch]
                if not isinstance(v, (int, float)) or isinstance(v, bool) or v <= 0:
                    raise LogScaleDomainError(ch.value, v)

    marks: list[MarkRecord] = []
    seen: dict[str, int] = {}
    for channel_values, keys in raw_marks:
        base = _mark_id(channel_values)
        n = seen.get(base, 0)
        seen[base] = n + 1
        mark_id = base if n == 0 else f"{base}~{n}"
        marks.append(MarkRecord(mark_id, channel_values, keys))

    bindings = {ch: (spec.field, spec.scale) for ch, spec in encodings.items()}
    mark_map = MarkMap(
        figure_id="",
        entries={m.mark_id: m.row_keys for m in marks},
        bindings=bindings,
    )
    return tuple(marks), mark_map


# --- insight text ------------------------------------------------------------------


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


def summarize_insight(chart: ChartDoc, data: DataSlice) -> str:
    """Deterministic template text: chart type, encoded fields, extremes,
    row count. Identical inputs always give identical text."""
    if not data.rows:
        return "No rows matched the current filters."

    n = len(data.rows)
    if chart.chart_type is ChartType.TABLE:
        label = chart.encodings[Channel.ROW_LABEL].label()
        return f"Table of {n} rows keyed by {label}."

    if chart.chart_type is ChartType.PIE:
        value_ch, label_ch = Channel.THETA, Channel.COLOR
    else:
        value_ch, label_ch = Channel.Y, Channel.X

    value_spec = chart.encodings[value_ch]
    label_spec = chart.encodings[label_ch]
    ranked = sorted(chart.marks, key=lambda m: _sort_key(m.channel_values[value_ch]))
    lo, hi = ranked[0], ranked[-1]
    return (
        f"{chart.chart_type.value.capitalize()} chart of {value_spec.label()} by "
        f"{label_spec.label()} over {n} rows; highest {_fmt(hi.channel_values[label_ch])} "
        f"({_fmt(hi.channel_values[value_ch])}), lowest {_fmt(lo.channel_values[label_ch])} "
        f"({_fmt(lo.channel_values[value_ch])})."
    )


# --- chart-grammar JSON export -----------------------------------------------------

_VEGA_MARKS = {
    ChartType.BAR: "bar",
    ChartType.LINE: "line",
    ChartType.SCATTER: "point",
    ChartType.PIE: "arc",
    ChartType.AREA: "area",
    ChartType.TABLE: "table",  # grammar extension; see docs/chart-grammar.md
}

_VEGA_CHANNELS = {
    Channel.X: "x",
    Channel.Y: "y",
    Channel.COLOR: "color",
    Channel.SIZE: "size",
    Channel.THETA: "theta",
    Channel.TOOLTIP: "tooltip",
    Channel.ROW_LABEL: "text",
}

_VEGA_TYPES = {
    SemanticType.QUANTITATIVE: "quantitative",
    SemanticType.NOMINAL: "nominal",
    SemanticType.ORDINAL: "ordinal",
    SemanticType.TEMPORAL: "temporal",
}


def to_chart_grammar(chart: ChartDoc, data: DataSlice) -> dict[str, Any]:
    """Export as a chart-grammar JSON document (declared Vega-Lite subset).

    Covers the six chart types, the four scales, and selection params; marks
    carry their ids so clients can hit-test against the same addresses the
    server uses.
    """
    encoding: dict[str, Any] = {}
    for ch, spec in chart.encodings.items():
        stype = data.stype_of(spec.field) if data.has_column(spec.field) else SemanticType.NOMINAL
        enc: dict[str, Any] = {"field": spec.field, "type": _VEGA_TYPES[stype]}
        if spec.aggregate is not None:
            enc["aggregate"] = spec.aggregate.value
        if spec.scale in (Scale.LOG,):
            enc["scale"] = {"type": "log"}
        encoding[_VEGA_CHANNELS[ch]] = enc

    params = []
    for i, decl in enumerate(chart.params):
        if decl.kind is InteractionKind.SINGLE_SELECT:
            select: dict[str, Any] = {"type": "point"}
        elif decl.kind is InteractionKind.HOVER:
            select = {"type": "point", "on": "pointerover"}
        else:
            select = {"type": "interval", "encodings": [ch.value for ch in decl.channels]}
        params.append({"name": f"sel{i}", "select": select})

    values = []
    names = data.column_names()
    for row in data.rows:
        record = dict(zip(names, row.values))
        record["__row_key"] = row.key
        values.append(record)

    doc: dict[str, Any] = {
        "mark": _VEGA_MARKS[chart.chart_type],
        "encoding": encoding,
        "data": {"values": values},
        "usermeta": {
            "insight": chart.insight_text,
            "marks": [
                {
                    "mark_id": m.mark_id,
                    "channel_values": {ch.value: v for ch, v in m.channel_values.items()},
                    "row_keys": sorted(m.row_keys),
                }
                for m in chart.marks
            ],
        },
    }
    if params:
        doc["params"] = params
    return doc


# --- (de)serialization ---------------------------------------------------------------


def chart_to_jsonable(chart: ChartDoc) -> dict[str, Any]:
    return {
        "chart_type": chart.chart_type.value,
        "encodings": {
            ch.value: {
                "field": spec.field,
                "scale": spec.scale.value,
                "aggregate": spec.aggregate.value if spec.aggregate else None,
            }
            for ch, spec in sorted(chart.encodings.items(), key=lambda kv: kv[0].value)
        },
        "params": [
            {"kind": d.kind.value, "channels": [c.value for c in d.channels]}
            for d in chart.params
        ],
        "marks": [
            {
                "mark_id": m.mark_id,
                "channel_values": {ch.value: v for ch, v in sorted(m.channel_values.items(), key=lambda kv: kv[0].value)},
                "row_keys": sorted(m.row_keys),
            }
            for m in chart.marks
        ],
        "insight_text": chart.insight_text,
    }


def chart_from_jsonable(payload: dict[str, Any]) -> ChartDoc:
    encodings = {
        Channel(ch): EncodingSpec(
            field=spec["field"],
            scale=Scale(spec["scale"]),
            aggregate=Aggregate(spec["aggregate"]) if spec.get("aggregate") else None,
        )
        for ch, spec in payload["encodings"].items()
    }
    params = tuple(
        InteractionDecl(InteractionKind(d["kind"]), tuple(Channel(c) for c in d["channels"]))
        for d in payload.get("params", [])
    )
    marks = tuple(
        MarkRecord(
            m["mark_id"],
            {Channel(ch): _revive_value(v) for ch, v in m["channel_values"].items()},
            frozenset(m["row_keys"]),
        )
        for m in payload.get("marks", [])
    )
    return ChartDoc(
        chart_type=ChartType(payload["chart_type"]),
        encodings=encodings,
        params=params,
        marks=marks,
        insight_text=payload.get("insight_text", ""),
    )


def _revive_value(v: Any) -> Any:
    if isinstance(v, int) and not isinstance(v, bool):
        return float(v)
    return v
