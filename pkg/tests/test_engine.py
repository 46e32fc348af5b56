from __future__ import annotations

import math

import pytest

from conftest import brute_force_group_mean
from figstate.compiler import expressions as xp
from figstate.compiler.actions import AggSpec, AnalyzeOp, SortKey
from figstate.compiler.predicates import Comparison, Membership, Predicate, RangeAtom
from figstate.demo import make_climate_rows
from figstate.engine import plans as qp
from figstate.engine.catalog import TableCatalog
from figstate.engine.executor import evaluate_expression, execute_plan
from figstate.errors import DivisionByZero, DuplicateTable, MissingSourceTable, SchemaMismatch
from figstate.model.charts import Aggregate
from figstate.model.slices import Column, SemanticType


class TestCatalog:
    def test_register_and_count(self, mini_catalog):
        table = mini_catalog.get_table("temps_small")
        assert len(table.rows) == 3 * 2 * 12
        assert table.rows[0].key == "temps_small:0"

    def test_duplicate_id_rejected(self, mini_catalog):
        with pytest.raises(DuplicateTable):
            mini_catalog.register_table("temps_small", (Column("a", SemanticType.NOMINAL),), [("x",)])

    def test_missing_cell_rejected(self):
        catalog = TableCatalog()
        with pytest.raises(SchemaMismatch):
            catalog.register_table(
                "t", (Column("a", SemanticType.NOMINAL), Column("b", SemanticType.QUANTITATIVE)),
                [("x", 1.0), ("y", None)],
            )

    def test_csv_ingest_row_count_matches_line_count(self, tmp_path):
        text = "state,temp\nFL,80.5\nGA,70\nMN,40.25\n"
        catalog = TableCatalog()
        catalog.ingest_csv("t", text)
        table = catalog.get_table("t")
        assert len(table.rows) == len(text.strip().splitlines()) - 1
        assert table.schema[1].stype is SemanticType.QUANTITATIVE
        assert table.rows[1].values == ("GA", 70.0)

    def test_temporal_ingest_derives_year_and_month(self):
        catalog = TableCatalog()
        catalog.ingest_csv("t", "id,when\na,2021-03-05\nb,2024-12-31\n")
        table = catalog.get_table("t")
        names = [c.name for c in table.schema]
        assert names == ["id", "when", "when_year", "when_month"]
        assert table.rows[0].values == ("a", "2021-03-05", 2021.0, 3.0)

    def test_generation_increments(self):
        catalog = TableCatalog()
        g1 = catalog.register_table("a", (Column("x", SemanticType.QUANTITATIVE),), [(1.0,)])
        g2 = catalog.register_table("b", (Column("x", SemanticType.QUANTITATIVE),), [(2.0,)])
        assert g2 == g1 + 1

    def test_save_and_load_dir_round_trip(self, mini_catalog, tmp_path):
        mini_catalog.save_dir(tmp_path)
        reloaded = TableCatalog.load_dir(tmp_path)
        for table_id in mini_catalog.table_ids():
            assert reloaded.get_table(table_id).rows == mini_catalog.get_table(table_id).rows

    def test_access_listener(self, mini_catalog):
        seen = []
        unsubscribe = mini_catalog.listen(seen.append)
        mini_catalog.get_table("temps_small")
        unsubscribe()
        mini_catalog.get_table("faculty_small")
        assert seen == ["temps_small"]


class TestExecution:
    def test_filter_aggregate_matches_brute_force_oracle(self, demo):
        # Oracle first: independent group-by over the raw generated tuples.
        raw = [r for r in make_climate_rows() if r[0] == "Florida"]
        oracle = brute_force_group_mean(raw, group_idx=2, value_idx=3)

        plan = qp.GroupAggregate(
            qp.Filter(qp.Scan("temps"), Predicate((Membership("state", ("Florida",)),))),
            group_by=("month",),
            aggs=(AggSpec(Aggregate.MEAN, "temp"),),
        )
        result = execute_plan(plan, demo)
        assert len(result.rows) == 12
        month_i = result.column_index("month")
        mean_i = result.column_index("temp_mean")
        for row in result.rows:
            assert row.values[mean_i] == pytest.approx(oracle[row.values[month_i]], rel=1e-12)
        assert result.lineage.source_tables == ("temps",)
        assert "state IN ('Florida')" in result.lineage.predicate_text

    def test_unsatisfiable_filter_keeps_schema(self, mini_catalog):
        plan = qp.Filter(qp.Scan("temps_small"), Predicate((Comparison("temp", ">", 1e9),)))
        result = execute_plan(plan, mini_catalog)
        assert result.rows == ()
        assert result.column_names() == ("state", "year", "month", "temp")

    def test_join_with_no_matches_is_empty(self, mini_catalog):
        plan = qp.Join(
            qp.Filter(qp.Scan("faculty_small"), Predicate((Membership("person_id", ("p4",)),))),
            "disclosures_small", "person_id", "person_id",
        )
        result = execute_plan(plan, mini_catalog)
        assert result.rows == ()

    def test_join_count_matches_hand_oracle(self, mini_catalog):
        # Hand-computed on the 5-row fixture: p1 has 2 disclosures, p2 has 1
        # (both chemistry), p3 (physics) has 1; d5 dangles and drops out.
        plan = qp.GroupAggregate(
            qp.Join(qp.Scan("faculty_small"), "disclosures_small", "person_id", "person_id"),
            group_by=("department",),
            aggs=(AggSpec(Aggregate.COUNT, "disclosure_id"),),
        )
        result = execute_plan(plan, mini_catalog)
        counts = {r.values[0]: r.values[1] for r in result.rows}
        assert counts == {"chemistry": 3.0, "physics": 1.0}

    def test_sort_limit_deterministic_tie_break(self, mini_catalog):
        plan = qp.TakeSortLimit(qp.Scan("faculty_small"), (SortKey("papers", descending=True),), limit=3)
        result = execute_plan(plan, mini_catalog)
        assert [r.values[0] for r in result.rows] == ["p3", "p1", "p2"]
        again = execute_plan(plan, mini_catalog)
        assert again.digest == result.digest

    def test_derive_division_by_zero_surfaces(self, mini_catalog):
        plan = qp.Derive(
            qp.Scan("faculty_small"),
            "ratio",
            xp.Arith("div", xp.Literal(1.0), xp.ColumnRef("papers")),
        )
        with pytest.raises(DivisionByZero):
            execute_plan(plan, mini_catalog)

    def test_missing_table(self, mini_catalog):
        with pytest.raises(MissingSourceTable):
            execute_plan(qp.Scan("nope"), mini_catalog)

    def test_repeated_execution_identical_digest(self, demo):
        plan = qp.GroupAggregate(qp.Scan("temps"), ("state",), (AggSpec(Aggregate.MEAN, "temp"),))
        assert execute_plan(plan, demo).digest == execute_plan(plan, demo).digest


class TestAnalyze:
    def test_zscore_matches_hand_oracle(self, mini_catalog):
        # papers column: [5, 2, 7, 1, 0]; mean 3, population sigma sqrt(6.8)
        plan = qp.AnalyzeStep(qp.Scan("faculty_small"), AnalyzeOp.ZSCORE, "papers", None, None, "")
        result = execute_plan(plan, mini_catalog)
        sigma = math.sqrt(6.8)
        expected = [(5 - 3) / sigma, (2 - 3) / sigma, (7 - 3) / sigma, (1 - 3) / sigma, (0 - 3) / sigma]
        z_i = result.column_index("papers_z")
        assert [r.values[z_i] for r in result.rows] == pytest.approx(expected)

    def test_percentage_of_total(self, mini_catalog):
        plan = qp.AnalyzeStep(qp.Scan("faculty_small"), AnalyzeOp.PERCENTAGE_OF_TOTAL, "papers", None, None, "")
        result = execute_plan(plan, mini_catalog)
        pct_i = result.column_index("papers_pct")
        assert sum(r.values[pct_i] for r in result.rows) == pytest.approx(100.0)

    def test_topk(self, mini_catalog):
        plan = qp.AnalyzeStep(qp.Scan("faculty_small"), AnalyzeOp.TOPK, "papers", 2, None, "")
        result = execute_plan(plan, mini_catalog)
        assert [r.values[0] for r in result.rows] == ["p3", "p1"]

    def test_binning_assigns_bin_starts(self, mini_catalog):
        plan = qp.AnalyzeStep(qp.Scan("faculty_small"), AnalyzeOp.BINNING, "papers", None, 2, "")
        result = execute_plan(plan, mini_catalog)
        b_i = result.column_index("papers_bin")
        starts = {r.values[0]: r.values[b_i] for r in result.rows}
        # width (7-0)/2 = 3.5: [0, 3.5) and [3.5, 7]
        assert starts == {"p1": 3.5, "p2": 0.0, "p3": 3.5, "p4": 0.0, "p5": 0.0}


class TestExpressionsOverRows:
    def test_log_transform_on_row(self):
        assert evaluate_expression(xp.Log(xp.ColumnRef("x"), 1.0), {"x": 0.0}) == 0.0

    def test_query_text_for_filter_aggregate(self):
        plan = qp.GroupAggregate(
            qp.Filter(
                qp.Scan("temps"),
                Predicate((Membership("state", ("Florida",)), RangeAtom("year", 2014.0, 2024.0))),
            ),
            ("month",),
            (AggSpec(Aggregate.MEAN, "temp"),),
        )
        assert qp.to_sql_text(plan) == (
            "SELECT month, AVG(temp) AS temp_mean FROM temps "
            "WHERE state IN ('Florida') AND year BETWEEN 2014.0 AND 2024.0 GROUP BY month"
        )

    def test_query_text_wraps_filter_after_aggregate(self):
        plan = qp.Filter(
            qp.GroupAggregate(qp.Scan("t"), ("a",), (AggSpec(Aggregate.COUNT, "a", "n"),)),
            Predicate((Comparison("n", ">", 1.0),)),
        )
        assert qp.to_sql_text(plan) == (
            "SELECT * FROM (SELECT a, COUNT(a) AS n FROM t GROUP BY a) WHERE n > 1.0"
        )
