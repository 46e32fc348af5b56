from __future__ import annotations

import math
import random

import pytest

from figstate.compiler.interactions import (
    GestureKind,
    InteractionEvent,
    geometric_selection,
    interaction_to_predicate,
)
from figstate.compiler.predicates import Membership, RangeAtom
from figstate.errors import (
    AggregatedChannelBrush,
    AmbiguousSelection,
    NominalBrush,
    UnboundChannel,
    ValidationFailed,
)
from figstate.model.charts import (
    Aggregate,
    Channel,
    ChartDoc,
    ChartType,
    EncodingSpec,
    MarkMap,
    Scale,
    materialize_marks,
)
from figstate.model.slices import Column, DataSlice, Lineage, Row, SemanticType


def finish(chart: ChartDoc, data: DataSlice) -> tuple[ChartDoc, MarkMap]:
    marks, mark_map = materialize_marks(chart, data)
    full = ChartDoc(chart.chart_type, chart.encodings, chart.params, marks)
    return full, mark_map


def month_line():
    schema = (
        Column("month", SemanticType.QUANTITATIVE),
        Column("temp", SemanticType.QUANTITATIVE),
    )
    rows = []
    for year in (2023, 2024):
        for month in range(1, 13):
            rows.append(Row(f"t:{year}-{month}", (float(month), 50.0 + month + 0.1 * (year - 2023))))
    data = DataSlice.build(schema, rows, Lineage(("t",)))
    chart = ChartDoc(
        chart_type=ChartType.LINE,
        encodings={
            Channel.X: EncodingSpec("month", Scale.LINEAR),
            Channel.Y: EncodingSpec("temp", Scale.LINEAR, Aggregate.MEAN),
        },
    )
    full, mark_map = finish(chart, data)
    return full, mark_map, data


def rows_matching(predicate, data):
    return frozenset(env["__row_key"] for env in data.iter_envs() if predicate.matches(env))


class TestBrush1d:
    def test_summer_brush_snaps_to_month_values(self):
        chart, mark_map, data = month_line()
        ev = InteractionEvent("f", GestureKind.BRUSH_1D, channel=Channel.X, lo=5.6, hi=8.4)
        pred = interaction_to_predicate(ev, mark_map, chart)
        assert pred.atoms == (RangeAtom("month", 6.0, 8.0),)
        assert rows_matching(pred, data) == geometric_selection(ev, chart)

    def test_empty_cover_keeps_raw_bounds_and_selects_nothing(self):
        chart, mark_map, data = month_line()
        ev = InteractionEvent("f", GestureKind.BRUSH_1D, channel=Channel.X, lo=6.1, hi=6.9)
        pred = interaction_to_predicate(ev, mark_map, chart)
        assert pred.atoms == (RangeAtom("month", 6.1, 6.9),)
        assert rows_matching(pred, data) == frozenset()

    def test_brush_on_aggregated_channel_rejected(self):
        chart, mark_map, _ = month_line()
        ev = InteractionEvent("f", GestureKind.BRUSH_1D, channel=Channel.Y, lo=50.0, hi=60.0)
        with pytest.raises(AggregatedChannelBrush):
            interaction_to_predicate(ev, mark_map, chart)

    def test_nominal_brush_rejected(self):
        schema = (Column("state", SemanticType.NOMINAL), Column("temp", SemanticType.QUANTITATIVE))
        data = DataSlice.build(schema, [Row("t:0", ("FL", 1.0))], Lineage(("t",)))
        chart = ChartDoc(
            chart_type=ChartType.BAR,
            encodings={
                Channel.X: EncodingSpec("state", Scale.ORDINAL),
                Channel.Y: EncodingSpec("temp", Scale.LINEAR),
            },
        )
        full, mark_map = finish(chart, data)
        ev = InteractionEvent("f", GestureKind.BRUSH_1D, channel=Channel.X, lo=0.0, hi=1.0)
        with pytest.raises(NominalBrush):
            interaction_to_predicate(ev, mark_map, full)

    def test_unbound_channel(self):
        chart, mark_map, _ = month_line()
        ev = InteractionEvent("f", GestureKind.BRUSH_1D, channel=Channel.SIZE, lo=0.0, hi=1.0)
        with pytest.raises(UnboundChannel):
            interaction_to_predicate(ev, mark_map, chart)

    def test_inverted_bounds_rejected(self):
        chart, mark_map, _ = month_line()
        ev = InteractionEvent("f", GestureKind.BRUSH_1D, channel=Channel.X, lo=9.0, hi=2.0)
        with pytest.raises(ValidationFailed):
            interaction_to_predicate(ev, mark_map, chart)


class TestClickAndHover:
    def test_click_scatter_point_is_row_key_singleton(self):
        schema = (Column("x", SemanticType.QUANTITATIVE), Column("y", SemanticType.QUANTITATIVE))
        rows = [Row(f"t:{i}", (float(i), float(i * i))) for i in range(10)]
        data = DataSlice.build(schema, rows, Lineage(("t",)))
        chart = ChartDoc(
            chart_type=ChartType.SCATTER,
            encodings={Channel.X: EncodingSpec("x", Scale.LINEAR), Channel.Y: EncodingSpec("y", Scale.LINEAR)},
        )
        full, mark_map = finish(chart, data)
        target = full.marks[4]
        ev = InteractionEvent("f", GestureKind.CLICK, mark_ids=(target.mark_id,))
        pred = interaction_to_predicate(ev, mark_map, full)
        assert pred.atoms == (Membership("__row_key", ("t:4",)),)
        assert rows_matching(pred, data) == frozenset({"t:4"})

    def test_click_on_aggregated_bar_uses_grouping_column(self):
        chart, mark_map, data = month_line()
        december = [m for m in chart.marks if m.channel_values[Channel.X] == 12.0][0]
        jan = [m for m in chart.marks if m.channel_values[Channel.X] == 1.0][0]
        feb = [m for m in chart.marks if m.channel_values[Channel.X] == 2.0][0]
        ev = InteractionEvent("f", GestureKind.CLICK, mark_ids=(december.mark_id, jan.mark_id, feb.mark_id))
        pred = interaction_to_predicate(ev, mark_map, chart)
        assert pred.atoms == (Membership("month", (1.0, 2.0, 12.0)),)
        assert rows_matching(pred, data) == geometric_selection(ev, chart)

    def test_hover_selects_exactly_one_marks_rows(self):
        chart, mark_map, data = month_line()
        mark = chart.marks[3]
        ev = InteractionEvent("f", GestureKind.HOVER, mark_ids=(mark.mark_id,))
        pred = interaction_to_predicate(ev, mark_map, chart)
        assert rows_matching(pred, data) == mark.row_keys

    def test_unknown_mark_rejected(self):
        chart, mark_map, _ = month_line()
        ev = InteractionEvent("f", GestureKind.CLICK, mark_ids=("nope",))
        with pytest.raises(ValidationFailed):
            interaction_to_predicate(ev, mark_map, chart)

    def test_non_rectangular_multi_column_selection_rejected(self):
        schema = (
            Column("state", SemanticType.NOMINAL),
            Column("region", SemanticType.NOMINAL),
            Column("temp", SemanticType.QUANTITATIVE),
        )
        rows = [
            Row("t:0", ("FL", "south", 80.0)),
            Row("t:1", ("GA", "south", 70.0)),
            Row("t:2", ("FL", "north", 60.0)),  # makes (FL, south)+(GA, south)+... ambiguous
            Row("t:3", ("GA", "north", 50.0)),
        ]
        data = DataSlice.build(schema, rows, Lineage(("t",)))
        chart = ChartDoc(
            chart_type=ChartType.BAR,
            encodings={
                Channel.X: EncodingSpec("state", Scale.ORDINAL),
                Channel.COLOR: EncodingSpec("region", Scale.ORDINAL),
                Channel.Y: EncodingSpec("temp", Scale.LINEAR, Aggregate.MEAN),
            },
        )
        full, mark_map = finish(chart, data)
        fl_south = [m for m in full.marks if m.channel_values[Channel.X] == "FL" and m.channel_values[Channel.COLOR] == "south"][0]
        ga_north = [m for m in full.marks if m.channel_values[Channel.X] == "GA" and m.channel_values[Channel.COLOR] == "north"][0]
        ev = InteractionEvent("f", GestureKind.CLICK, mark_ids=(fl_south.mark_id, ga_north.mark_id))
        with pytest.raises(AmbiguousSelection):
            interaction_to_predicate(ev, mark_map, full)

        # A rectangular selection over the same chart is fine.
        fl_north = [m for m in full.marks if m.channel_values[Channel.X] == "FL" and m.channel_values[Channel.COLOR] == "north"][0]
        ev_ok = InteractionEvent("f", GestureKind.CLICK, mark_ids=(fl_south.mark_id, fl_north.mark_id))
        pred = interaction_to_predicate(ev_ok, mark_map, full)
        assert rows_matching(pred, data) == geometric_selection(ev_ok, full)


class TestBrush2d:
    def test_log_derived_scatter_band(self):
        # The case-study shape: log1p-derived axes, brush the y == 0 band
        # with x > 0, i.e. cited-but-no-disclosure researchers.
        schema = (
            Column("papers", SemanticType.QUANTITATIVE),
            Column("disclosures", SemanticType.QUANTITATIVE),
            Column("log_papers", SemanticType.QUANTITATIVE),
            Column("log_disclosures", SemanticType.QUANTITATIVE),
        )
        rng = random.Random(5)
        rows = []
        for i in range(200):
            papers = float(rng.randrange(0, 40))
            disclosures = float(rng.randrange(0, 6)) if rng.random() < 0.6 else 0.0
            rows.append(Row(
                f"t:{i}",
                (papers, disclosures, math.log(papers + 1.0), math.log(disclosures + 1.0)),
            ))
        data = DataSlice.build(schema, rows, Lineage(("t",)))
        chart = ChartDoc(
            chart_type=ChartType.SCATTER,
            encodings={
                Channel.X: EncodingSpec("log_papers", Scale.LINEAR),
                Channel.Y: EncodingSpec("log_disclosures", Scale.LINEAR),
            },
        )
        full, mark_map = finish(chart, data)
        ev = InteractionEvent(
            "f", GestureKind.BRUSH_2D,
            x_lo=0.1, x_hi=10.0, y_lo=0.0, y_hi=0.0,
        )
        pred = interaction_to_predicate(ev, mark_map, full)
        assert len(pred.atoms) == 2
        assert all(isinstance(a, RangeAtom) for a in pred.atoms)
        selected = rows_matching(pred, data)
        assert selected == geometric_selection(ev, full)
        # sanity: the band is the no-disclosure, cited group
        envs = {env["__row_key"]: env for env in data.iter_envs()}
        assert selected and all(
            envs[k]["disclosures"] == 0.0 and envs[k]["papers"] > 0.0 for k in selected
        )


class TestRoundTripProperty:
    def test_randomized_scatter_gestures(self):
        rng = random.Random(99)
        schema = (Column("x", SemanticType.QUANTITATIVE), Column("y", SemanticType.QUANTITATIVE))
        for trial in range(60):
            n = rng.randrange(1, 60)
            rows = [
                Row(f"t:{i}", (float(rng.randrange(-20, 20)), float(rng.randrange(-20, 20))))
                for i in range(n)
            ]
            data = DataSlice.build(schema, rows, Lineage(("t",)))
            chart = ChartDoc(
                chart_type=ChartType.SCATTER,
                encodings={Channel.X: EncodingSpec("x", Scale.LINEAR), Channel.Y: EncodingSpec("y", Scale.LINEAR)},
            )
            full, mark_map = finish(chart, data)
            kind = rng.choice([GestureKind.CLICK, GestureKind.BRUSH_1D, GestureKind.BRUSH_2D])
            if kind is GestureKind.CLICK:
                count = rng.randrange(1, min(5, len(full.marks)) + 1)
                ids = tuple(m.mark_id for m in rng.sample(list(full.marks), count))
                ev = InteractionEvent("f", kind, mark_ids=ids)
            elif kind is GestureKind.BRUSH_1D:
                lo, hi = sorted((rng.uniform(-25, 25), rng.uniform(-25, 25)))
                ev = InteractionEvent("f", kind, channel=rng.choice([Channel.X, Channel.Y]), lo=lo, hi=hi)
            else:
                x_lo, x_hi = sorted((rng.uniform(-25, 25), rng.uniform(-25, 25)))
                y_lo, y_hi = sorted((rng.uniform(-25, 25), rng.uniform(-25, 25)))
                ev = InteractionEvent("f", kind, x_lo=x_lo, x_hi=x_hi, y_lo=y_lo, y_hi=y_hi)
            pred = interaction_to_predicate(ev, mark_map, full)
            assert rows_matching(pred, data) == geometric_selection(ev, full), (trial, ev)
