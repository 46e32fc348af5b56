"""Gesture-to-predicate translation: the visual half of the bridge.

The structural rules make the classic mistranslation impossible: interval
gestures always compile to inclusive range atoms (never membership), and
discrete selections always compile to membership atoms (never ranges).
Interval bounds snap to the extreme data values actually inside the gesture,
so the predicate selects exactly the geometrically covered rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any

from figstate.compiler.predicates import Membership, Predicate, RangeAtom
from figstate.errors import (
    AggregatedChannelBrush,
    AmbiguousSelection,
    NominalBrush,
    UnboundChannel,
    ValidationFailed,
)
from figstate.model.charts import Channel, ChartDoc, InteractionKind, MarkMap, Scale
from figstate.model.slices import ROW_KEY_COLUMN


class GestureKind(str, Enum):
    CLICK = "click"
    BRUSH_1D = "brush1d"
    BRUSH_2D = "brush2d"
    HOVER = "hover"


#: gesture kind -> the interaction declaration it exercises
TRIGGER_KINDS = {
    GestureKind.CLICK: InteractionKind.SINGLE_SELECT,
    GestureKind.BRUSH_1D: InteractionKind.INTERVAL_1D,
    GestureKind.BRUSH_2D: InteractionKind.INTERVAL_2D,
    GestureKind.HOVER: InteractionKind.HOVER,
}


@dataclass(frozen=True)
class InteractionEvent:
    figure_id: str
    kind: GestureKind
    mark_ids: tuple[str, ...] = ()
    channel: Channel | None = None
    lo: Any = None
    hi: Any = None
    x_lo: Any = None
    x_hi: Any = None
    y_lo: Any = None
    y_hi: Any = None
    at: str = ""

    def check(self) -> None:
        """Raise ValidationFailed on malformed gesture parameters."""
        if self.kind in (GestureKind.CLICK, GestureKind.HOVER):
            if not self.mark_ids:
                raise ValidationFailed(f"{self.kind.value} gesture needs mark_ids")
            if self.kind is GestureKind.HOVER and len(self.mark_ids) != 1:
                raise ValidationFailed("hover targets exactly one mark")
        elif self.kind is GestureKind.BRUSH_1D:
            if self.channel is None:
                raise ValidationFailed("brush1d needs a channel")
            _check_bounds(self.lo, self.hi)
        else:
            _check_bounds(self.x_lo, self.x_hi)
            _check_bounds(self.y_lo, self.y_hi)

    def to_jsonable(self) -> dict[str, Any]:
        return {
            "figure_id": self.figure_id,
            "kind": self.kind.value,
            "mark_ids": list(self.mark_ids),
            "channel": self.channel.value if self.channel else None,
            "lo": self.lo,
            "hi": self.hi,
            "x_lo": self.x_lo,
            "x_hi": self.x_hi,
            "y_lo": self.y_lo,
            "y_hi": self.y_hi,
            "at": self.at,
        }

    @staticmethod
    def from_jsonable(payload: dict[str, Any]) -> "InteractionEvent":
        return InteractionEvent(
            figure_id=payload["figure_id"],
            kind=GestureKind(payload["kind"]),
            mark_ids=tuple(payload.get("mark_ids") or ()),
            channel=Channel(payload["channel"]) if payload.get("channel") else None,
            lo=_bound(payload.get("lo")),
            hi=_bound(payload.get("hi")),
            x_lo=_bound(payload.get("x_lo")),
            x_hi=_bound(payload.get("x_hi")),
            y_lo=_bound(payload.get("y_lo")),
            y_hi=_bound(payload.get("y_hi")),
            at=payload.get("at", ""),
        )


def _bound(v: Any) -> Any:
    if isinstance(v, int) and not isinstance(v, bool):
        return float(v)
    return v


def _check_bounds(lo: Any, hi: Any) -> None:
    if lo is None or hi is None:
        raise ValidationFailed("brush needs both bounds")
    for b in (lo, hi):
        if isinstance(b, float) and not math.isfinite(b):
            raise ValidationFailed("brush bounds must be finite")
    try:
        inverted = lo > hi
    except TypeError:
        raise ValidationFailed("brush bounds are not comparable") from None
    if inverted:
        raise ValidationFailed("brush bounds must satisfy lo <= hi")


def _order_key(value: Any) -> tuple[int, Any]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (0, value)
    return (1, str(value))


def interaction_to_predicate(ev: InteractionEvent, mark_map: MarkMap, chart: ChartDoc) -> Predicate:
    """Translate a gesture into a conjunctive predicate whose satisfying rows
    equal the rows geometrically inside the gesture."""
    ev.check()
    if mark_map.figure_id and ev.figure_id != mark_map.figure_id:
        raise ValidationFailed(
            f"gesture targets figure {ev.figure_id!r} but map belongs to {mark_map.figure_id!r}"
        )

    if ev.kind in (GestureKind.CLICK, GestureKind.HOVER):
        return _selection_predicate(ev.mark_ids, chart, mark_map)
    if ev.kind is GestureKind.BRUSH_1D:
        return Predicate((_range_atom(ev.channel, ev.lo, ev.hi, chart),))
    return Predicate((
        _range_atom(Channel.X, ev.x_lo, ev.x_hi, chart),
        _range_atom(Channel.Y, ev.y_lo, ev.y_hi, chart),
    ))


def _selection_predicate(mark_ids: tuple[str, ...], chart: ChartDoc, mark_map: MarkMap) -> Predicate:
    by_id = {m.mark_id: m for m in chart.marks}
    selected = []
    for mid in mark_ids:
        mark = by_id.get(mid)
        if mark is None:
            raise ValidationFailed(f"mark {mid!r} does not exist in the figure")
        selected.append(mark)

    if not chart.aggregated():
        keys: set[str] = set()
        for mark in selected:
            keys |= mark.row_keys
        return Predicate((Membership(ROW_KEY_COLUMN, tuple(sorted(keys))),))

    # Aggregated marks: membership over the grouping columns' values, so the
    # selection survives re-execution against refreshed data.
    grouping = chart.grouping_channels()
    atoms = []
    value_sets: dict[Channel, tuple[Any, ...]] = {}
    for ch in grouping:
        column = chart.encodings[ch].field
        values: list[Any] = []
        for mark in selected:
            v = mark.channel_values[ch]
            if v not in values:
                values.append(v)
        values.sort(key=_order_key)
        value_sets[ch] = tuple(values)
        atoms.append(Membership(column, tuple(values)))

    # A conjunction of per-column memberships describes the full cross
    # product; reject selections it would overmatch.
    selected_ids = {m.mark_id for m in selected}
    for mark in chart.marks:
        if mark.mark_id in selected_ids:
            continue
        if all(mark.channel_values[ch] in value_sets[ch] for ch in grouping):
            raise AmbiguousSelection(
                "selection is not a cross product of grouping values; select marks "
                "sharing a grouping value or extend per mark"
            )
    return Predicate(tuple(atoms))


def _range_atom(channel: Channel | None, lo: Any, hi: Any, chart: ChartDoc) -> RangeAtom:
    if channel is None or channel not in chart.encodings:
        raise UnboundChannel(channel.value if channel else "?")
    spec = chart.encodings[channel]
    if spec.aggregate is not None:
        raise AggregatedChannelBrush(
            f"channel {channel.value} carries {spec.aggregate.value}({spec.field}); "
            "no slice column holds those values"
        )
    if spec.scale is Scale.ORDINAL:
        raise NominalBrush(f"interval brush on non-quantitative channel {channel.value}; use click selection")

    _check_bounds(lo, hi)
    if spec.scale is Scale.TEMPORAL:
        if not isinstance(lo, str) or not isinstance(hi, str):
            raise ValidationFailed("temporal brush bounds must be ISO-8601 strings")
    else:
        if not isinstance(lo, (int, float)) or not isinstance(hi, (int, float)):
            raise ValidationFailed("quantitative brush bounds must be numbers")

    values = sorted(
        {m.channel_values[channel] for m in chart.marks},
        key=_order_key,
    )
    inside = [v for v in values if lo <= v <= hi]
    if inside:
        return RangeAtom(spec.field, inside[0], inside[-1])
    # Empty cover: keep the raw bounds; the predicate selects nothing, which
    # is exactly what the gesture covered.
    return RangeAtom(spec.field, lo, hi)


def geometric_selection(ev: InteractionEvent, chart: ChartDoc) -> frozenset[str]:
    """Brute-force reference: row keys of marks geometrically inside the
    gesture. Test oracle for round-trip soundness; not used by translation."""
    ev.check()
    if ev.kind in (GestureKind.CLICK, GestureKind.HOVER):
        wanted = set(ev.mark_ids)
        keys: set[str] = set()
        for m in chart.marks:
            if m.mark_id in wanted:
                keys |= m.row_keys
        return frozenset(keys)
    keys = set()
    for m in chart.marks:
        if ev.kind is GestureKind.BRUSH_1D:
            v = m.channel_values.get(ev.channel)
            if v is not None and ev.lo <= v <= ev.hi:
                keys |= m.row_keys
        else:
            x = m.channel_values.get(Channel.X)
            y = m.channel_values.get(Channel.Y)
            if x is not None and y is not None and ev.x_lo <= x <= ev.x_hi and ev.y_lo <= y <= ev.y_hi:
                keys |= m.row_keys
    return frozenset(keys)
