from __future__ import annotations

import pytest

from conftest import brute_force_group_mean
from figstate.compiler.actions import (
    AddChartType,
    AddData,
    AddEncoding,
    AddParams,
    AggregateRows,
    AggSpec,
    FilterRows,
    SelectTable,
    SortKey,
    SortLimit,
    UpdateEncoding,
)
from figstate.compiler.interactions import GestureKind, InteractionEvent
from figstate.compiler.pipeline import apply_manipulation, build_figure, extend_from_selection
from figstate.compiler.predicates import Membership, Predicate, RangeAtom
from figstate.coordination import (
    CoordinationSchema,
    fill_template,
    propagate,
    propagation_order,
    record_schema,
    refresh_target,
    schema_from_jsonable,
    schema_to_jsonable,
)
from figstate.demo import make_climate_rows
from figstate.errors import CycleDetected, EmptySelection, KindMismatch, PropagationError, TemplateExtractionFailed
from figstate.model.charts import Aggregate, Channel, ChartType, EncodingSpec, InteractionDecl, InteractionKind, Scale
from figstate.model.figures import Operation


def florida_line(catalog, figure_id="f1", artifact_id="a1"):
    return build_figure(
        [
            SelectTable("temps"),
            FilterRows(Predicate((
                Membership("state", ("Florida",)),
                RangeAtom("year", 2014.0, 2024.0),
            ))),
            AddChartType(ChartType.LINE),
            AddData(),
            AddEncoding(Channel.X, EncodingSpec("month", Scale.LINEAR)),
            AddEncoding(Channel.Y, EncodingSpec("temp", Scale.LINEAR, Aggregate.MEAN)),
            AddParams(InteractionDecl(InteractionKind.INTERVAL_1D, (Channel.X,))),
        ],
        catalog, figure_id, artifact_id, "florida line",
    )


def ranking_steps():
    return [
        SelectTable("temps"),
        AggregateRows(("state",), (AggSpec(Aggregate.MEAN, "temp"),)),
        SortLimit((SortKey("temp_mean", descending=True),)),
        AddChartType(ChartType.BAR),
        AddData(),
        AddEncoding(Channel.X, EncodingSpec("state", Scale.ORDINAL)),
        AddEncoding(Channel.Y, EncodingSpec("temp_mean", Scale.LINEAR)),
    ]


def summer_extension(catalog):
    source = florida_line(catalog)
    ev = InteractionEvent("f1", GestureKind.BRUSH_1D, channel=Channel.X, lo=5.6, hi=8.4)
    target, seed = extend_from_selection(source, ev, ranking_steps(), catalog, "f2", "summer ranking")
    return source, target, ev, seed


def month_click(source, months):
    marks = [m for m in source.visualization.marks if m.channel_values[Channel.X] in months]
    return InteractionEvent(source.figure_id, GestureKind.CLICK, mark_ids=tuple(m.mark_id for m in marks))


class TestRecordSchema:
    def test_summer_schema_has_month_range_hole(self, demo):
        source, target, ev, _ = summer_extension(demo)
        schema = record_schema(source, target, ev, demo)
        assert schema.trigger is InteractionKind.INTERVAL_1D
        assert schema.hole_binding == ("month",)
        assert schema.hole_index == 1
        assert not schema.source_coupled  # ranking re-queries the catalog

    def test_click_extension_gets_membership_hole_and_coupling(self, demo):
        source = florida_line(demo)
        ev = month_click(source, {6.0})
        target, _ = extend_from_selection(
            source, ev,
            [AddChartType(ChartType.TABLE), AddData(),
             AddEncoding(Channel.ROW_LABEL, EncodingSpec("year", Scale.LINEAR))],
            demo, "f2",
        )
        schema = record_schema(source, target, ev, demo)
        assert schema.trigger is InteractionKind.SINGLE_SELECT
        assert schema.hole_binding == ("month",)
        assert schema.source_coupled  # inherits the source's data prefix

    def test_template_refill_reproduces_target_digest(self, demo):
        source, target, ev, _ = summer_extension(demo)
        schema = record_schema(source, target, ev, demo)
        recorded = schema.template.actions()[schema.hole_index]
        refilled = build_figure(
            fill_template(schema, recorded.predicate, source),
            demo, target.figure_id, "a1", "refill check",
        )
        assert refilled.data.digest == target.data.digest

    def test_no_selection_step_fails_extraction(self, demo):
        source = florida_line(demo)
        plain = build_figure(ranking_steps(), demo, "f2", "a1", "no selection")
        ev = InteractionEvent("f1", GestureKind.BRUSH_1D, channel=Channel.X, lo=5.6, hi=8.4)
        with pytest.raises(TemplateExtractionFailed):
            record_schema(source, plain, ev, demo)

    def test_cycle_rejected_at_record_time(self, demo):
        source, target, ev, _ = summer_extension(demo)
        schema = record_schema(source, target, ev, demo)
        back_ev = InteractionEvent("f2", GestureKind.CLICK,
                                   mark_ids=(target.visualization.marks[0].mark_id,))
        # extend f2 back onto the id of the original source figure
        back_target, _ = extend_from_selection(
            target, back_ev,
            [AddChartType(ChartType.TABLE), AddData(),
             AddEncoding(Channel.ROW_LABEL, EncodingSpec("state", Scale.ORDINAL))],
            demo, "f1",
        )
        with pytest.raises(CycleDetected):
            record_schema(target, back_target, back_ev, demo, existing=(schema,))


class TestPropagate:
    def test_winter_selection_updates_ranking(self, demo):
        source, target, ev, _ = summer_extension(demo)
        schema = record_schema(source, target, ev, demo)
        winter = month_click(source, {12.0, 1.0, 2.0})
        result = propagate(schema, winter, source, target, demo)
        assert result.changed
        updated = result.figure
        assert updated.meta.operation is Operation.COORDINATE_UPDATE
        assert updated.meta.parent_version == target.meta.version_id

        raw = [r for r in make_climate_rows() if r[2] in (12.0, 1.0, 2.0)]
        oracle = brute_force_group_mean(raw, group_idx=0, value_idx=3)
        ranking = sorted(oracle, key=lambda s: -oracle[s])
        bars = [m.channel_values[Channel.X] for m in updated.visualization.marks]
        assert bars == ranking

    def test_propagation_digest_equals_fresh_extension(self, demo):
        source, target, ev, _ = summer_extension(demo)
        schema = record_schema(source, target, ev, demo)
        winter = month_click(source, {12.0, 1.0, 2.0})
        result = propagate(schema, winter, source, target, demo)
        fresh, _ = extend_from_selection(source, winter, ranking_steps(), demo, "f2", "fresh winter")
        assert result.figure.data.digest == fresh.data.digest
        assert result.figure.visualization == fresh.visualization

    def test_identical_rebrush_dedupes(self, demo):
        source, target, ev, _ = summer_extension(demo)
        schema = record_schema(source, target, ev, demo)
        again = InteractionEvent("f1", GestureKind.BRUSH_1D, channel=Channel.X, lo=5.6, hi=8.4)
        result = propagate(schema, again, source, target, demo)
        assert not result.changed
        assert result.figure is target

    def test_zero_row_selection_surfaces_empty(self, demo):
        source, target, ev, _ = summer_extension(demo)
        schema = record_schema(source, target, ev, demo)
        empty = InteractionEvent("f1", GestureKind.BRUSH_1D, channel=Channel.X, lo=6.2, hi=6.8)
        with pytest.raises(EmptySelection):
            propagate(schema, empty, source, target, demo)

    def test_hover_is_kind_mismatch(self, demo):
        source, target, ev, _ = summer_extension(demo)
        schema = record_schema(source, target, ev, demo)
        hover = InteractionEvent("f1", GestureKind.HOVER,
                                 mark_ids=(source.visualization.marks[0].mark_id,))
        with pytest.raises(KindMismatch):
            propagate(schema, hover, source, target, demo)

    def test_stale_source_column_change_errors(self, demo):
        source, target, ev, _ = summer_extension(demo)
        schema = record_schema(source, target, ev, demo)
        rebound = apply_manipulation(
            source,
            [UpdateEncoding(Channel.X, EncodingSpec("year", Scale.LINEAR))],
            demo, "x now binds year",
        )
        brush = InteractionEvent("f1", GestureKind.BRUSH_1D, channel=Channel.X, lo=2014.0, hi=2016.0)
        with pytest.raises(PropagationError):
            propagate(schema, brush, rebound, target, demo)

    def test_chain_refresh_follows_updated_source(self, demo):
        # A (month line) -> B (per-year bars for the clicked month)
        # -> C (table of three clicked years). Year clicks are grouping-value
        # selections, so they survive B's data being re-focused by A.
        a = florida_line(demo)
        ev_ab = month_click(a, {6.0})
        b, _ = extend_from_selection(
            a, ev_ab,
            [AddChartType(ChartType.BAR), AddData(),
             AddEncoding(Channel.X, EncodingSpec("year", Scale.LINEAR)),
             AddEncoding(Channel.Y, EncodingSpec("temp", Scale.LINEAR, Aggregate.MEAN))],
            demo, "fB",
        )
        schema_ab = record_schema(a, b, ev_ab, demo)

        wanted_years = {2014.0, 2015.0, 2016.0}
        year_marks = [m for m in b.visualization.marks if m.channel_values[Channel.X] in wanted_years]
        ev_bc = InteractionEvent("fB", GestureKind.CLICK,
                                 mark_ids=tuple(m.mark_id for m in year_marks))
        c, _ = extend_from_selection(
            b, ev_bc,
            [AddChartType(ChartType.TABLE), AddData(),
             AddEncoding(Channel.ROW_LABEL, EncodingSpec("year", Scale.LINEAR))],
            demo, "fC",
        )
        schema_bc = record_schema(b, c, ev_bc, demo, existing=(schema_ab,))
        assert schema_bc.source_coupled
        assert schema_bc.hole_binding == ("year",)

        # New gesture on A: switch the focus month to December.
        december = month_click(a, {12.0})
        result_b = propagate(schema_ab, december, a, b, demo)
        assert result_b.changed
        new_b = result_b.figure
        result_c = refresh_target(schema_bc, new_b, c, demo)
        assert result_c.changed
        # C now holds December rows for the originally selected years.
        assert set(result_c.figure.data.row_keys()) <= set(new_b.data.row_keys())
        assert {env["month"] for env in result_c.figure.data.iter_envs()} == {12.0}
        assert {env["year"] for env in result_c.figure.data.iter_envs()} == wanted_years


class TestPropagationOrder:
    def _schema(self, sid, src, dst):
        from figstate.compiler.actions import ProvenanceProgram
        return CoordinationSchema(sid, src, dst, InteractionKind.SINGLE_SELECT,
                                  ProvenanceProgram(()), 0, ("k",))

    def test_singleton(self):
        s = self._schema("cs-1", "a", "b")
        assert propagation_order([s]) == [s]

    def test_chain_is_source_first(self):
        s1 = self._schema("cs-2", "b", "c")
        s2 = self._schema("cs-1", "a", "b")
        assert [s.schema_id for s in propagation_order([s1, s2])] == ["cs-1", "cs-2"]

    def test_diamond_breaks_ties_by_schema_id(self):
        s1 = self._schema("cs-b", "a", "b")
        s2 = self._schema("cs-a", "a", "c")
        order1 = [s.schema_id for s in propagation_order([s1, s2])]
        order2 = [s.schema_id for s in propagation_order([s2, s1])]
        assert order1 == order2 == ["cs-a", "cs-b"]

    def test_cycle_detected(self):
        s1 = self._schema("cs-1", "a", "b")
        s2 = self._schema("cs-2", "b", "a")
        with pytest.raises(CycleDetected):
            propagation_order([s1, s2])


def test_schema_json_round_trip(demo):
    source, target, ev, _ = summer_extension(demo)
    schema = record_schema(source, target, ev, demo)
    assert schema_from_jsonable(schema_to_jsonable(schema)) == schema
