"""Deterministic plan execution: row-at-a-time over the in-memory catalog.

Row keys are derived, never random: scans keep registration keys, joins
concatenate, aggregations hash the group values. The same plan over the same
catalog always yields the same DataSlice, digest included.
"""

from __future__ import annotations

from typing import Any, Mapping

from figstate.compiler import expressions as xp
from figstate.compiler.actions import AggSpec, AnalyzeOp
from figstate.engine import plans as qp
from figstate.engine.catalog import TableCatalog
from figstate.errors import DivisionByZero, ExecError, UnknownColumn
from figstate.model.charts import Aggregate
from figstate.model.slices import (
    ROW_KEY_COLUMN,
    Column,
    DataSlice,
    Lineage,
    Row,
    SemanticType,
    canonical_cell,
)


def evaluate_expression(expr: xp.Expr, row: Mapping[str, Any]) -> Any:
    """Evaluate one closed-grammar expression against a row environment."""
    return xp.evaluate(expr, row)


def execute_plan(plan: qp.PlanNode, catalog: TableCatalog) -> DataSlice:
    schema, rows = _execute(plan, catalog)
    lineage = Lineage(
        source_tables=qp.scanned_tables(plan),
        predicate_text=" AND ".join(qp.filter_texts(plan)),
        transforms=qp.describe(plan),
    )
    return DataSlice.build(schema, rows, lineage)


def _execute(plan: qp.PlanNode, catalog: TableCatalog) -> tuple[tuple[Column, ...], list[Row]]:
    if isinstance(plan, qp.Scan):
        table = catalog.get_table(plan.table)
        return table.schema, list(table.rows)

    schema, rows = _execute(plan.input, catalog)
    names = tuple(c.name for c in schema)

    if isinstance(plan, qp.Filter):
        kept = []
        for row in rows:
            env = dict(zip(names, row.values))
            env[ROW_KEY_COLUMN] = row.key
            if plan.predicate.matches(env):
                kept.append(row)
        return schema, kept

    if isinstance(plan, qp.Project):
        idx = []
        for name in plan.columns:
            if name not in names:
                raise UnknownColumn(name, "project")
            idx.append(names.index(name))
        out_schema = tuple(schema[i] for i in idx)
        return out_schema, [Row(r.key, tuple(r.values[i] for i in idx)) for r in rows]

    if isinstance(plan, qp.Derive):
        out = []
        numeric = xp.is_numeric(plan.expression)
        out_schema = schema + (Column(plan.column, SemanticType.QUANTITATIVE if numeric else SemanticType.NOMINAL),)
        for row in rows:
            env = dict(zip(names, row.values))
            value = xp.evaluate(plan.expression, env)
            out.append(Row(row.key, row.values + (value,)))
        return out_schema, out

    if isinstance(plan, qp.Join):
        right = catalog.get_table(plan.table)
        right_names = tuple(c.name for c in right.schema)
        if plan.left_key not in names:
            raise UnknownColumn(plan.left_key, "join")
        if plan.right_key not in right_names:
            raise UnknownColumn(plan.right_key, f"join table {plan.table}")
        li = names.index(plan.left_key)
        ri = right_names.index(plan.right_key)
        keep = [j for j, c in enumerate(right.schema) if c.name != plan.right_key]
        clashes = {right.schema[j].name for j in keep} & set(names)
        if clashes:
            raise ExecError("join", f"duplicate column(s) {sorted(clashes)}")
        out_schema = schema + tuple(right.schema[j] for j in keep)
        by_key: dict[Any, list[Row]] = {}
        for rrow in right.rows:
            by_key.setdefault(rrow.values[ri], []).append(rrow)
        out = []
        for lrow in rows:
            for rrow in by_key.get(lrow.values[li], ()):
                out.append(Row(
                    f"{lrow.key}|{rrow.key}",
                    lrow.values + tuple(rrow.values[j] for j in keep),
                ))
        return out_schema, out

    if isinstance(plan, qp.GroupAggregate):
        for g in plan.group_by:
            if g not in names:
                raise UnknownColumn(g, "aggregate")
        gidx = [names.index(g) for g in plan.group_by]
        groups: dict[tuple[Any, ...], list[Row]] = {}
        for row in rows:
            groups.setdefault(tuple(row.values[i] for i in gidx), []).append(row)
        out_schema = tuple(schema[i] for i in gidx) + tuple(
            _agg_column(schema, names, spec) for spec in plan.aggs
        )
        out = []
        for key in sorted(groups, key=lambda k: tuple(canonical_cell(v) for v in k)):
            members = groups[key]
            cells = list(key)
            for spec in plan.aggs:
                cells.append(_aggregate(spec, names, members))
            row_key = "g|" + "|".join(canonical_cell(v) for v in key)
            out.append(Row(row_key, tuple(cells)))
        return out_schema, out

    if isinstance(plan, qp.TakeSortLimit):
        out = sorted(rows, key=lambda r: r.key)
        for key in reversed(plan.keys):
            if key.column not in names:
                raise UnknownColumn(key.column, "sort_limit")
            i = names.index(key.column)
            out.sort(key=lambda r: _order_key(r.values[i]), reverse=key.descending)
        if plan.limit is not None:
            out = out[: plan.limit]
        return schema, out

    if isinstance(plan, qp.AnalyzeStep):
        return _analyze(plan, schema, names, rows)

    raise ExecError("plan", f"unknown node {type(plan).__name__}")


def _agg_column(schema: tuple[Column, ...], names: tuple[str, ...], spec: AggSpec) -> Column:
    if spec.column not in names:
        raise UnknownColumn(spec.column, "aggregate")
    if spec.op in (Aggregate.MIN, Aggregate.MAX):
        stype = schema[names.index(spec.column)].stype
    else:
        stype = SemanticType.QUANTITATIVE
    return Column(spec.out_name(), stype)


def _aggregate(spec: AggSpec, names: tuple[str, ...], members: list[Row]) -> Any:
    i = names.index(spec.column)
    values = [r.values[i] for r in members]
    if spec.op is Aggregate.COUNT:
        return float(len(values))
    if spec.op is Aggregate.SUM:
        return float(sum(values))
    if spec.op is Aggregate.MEAN:
        return float(sum(values)) / len(values)
    if spec.op is Aggregate.MIN:
        return min(values)
    return max(values)


def _order_key(value: Any) -> tuple[int, Any]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (0, value)
    return (1, str(value))


def _analyze(
    plan: qp.AnalyzeStep,
    schema: tuple[Column, ...],
    names: tuple[str, ...],
    rows: list[Row],
) -> tuple[tuple[Column, ...], list[Row]]:
    if plan.column not in names:
        raise UnknownColumn(plan.column, "analyze")
    i = names.index(plan.column)
    if plan.op is AnalyzeOp.TOPK:
        out = sorted(rows, key=lambda r: r.key)
        out.sort(key=lambda r: _order_key(r.values[i]), reverse=True)
        return schema, out[: plan.k]

    out_name = plan.out or qp._default_analyze_out(plan)
    out_schema = schema + (Column(out_name, SemanticType.QUANTITATIVE),)
    values = [float(r.values[i]) for r in rows]

    if plan.op is AnalyzeOp.PERCENTAGE_OF_TOTAL:
        total = sum(values)
        if rows and total == 0.0:
            raise DivisionByZero("percentage_of_total over a zero-sum column")
        return out_schema, [
            Row(r.key, r.values + (v / total * 100.0,)) for r, v in zip(rows, values)
        ]

    if plan.op is AnalyzeOp.BINNING:
        if not rows:
            return out_schema, []
        lo, hi = min(values), max(values)
        bins = plan.bins or 1
        width = (hi - lo) / bins
        out = []
        for r, v in zip(rows, values):
            if width == 0.0:
                start = lo
            else:
                slot = min(int((v - lo) / width), bins - 1)
                start = lo + slot * width
            out.append(Row(r.key, r.values + (start,)))
        return out_schema, out

    if plan.op is AnalyzeOp.ZSCORE:
        if not rows:
            return out_schema, []
        mean = sum(values) / len(values)
        variance = sum((v - mean) ** 2 for v in values) / len(values)
        sigma = variance ** 0.5
        return out_schema, [
            Row(r.key, r.values + ((v - mean) / sigma if sigma else 0.0,))
            for r, v in zip(rows, values)
        ]

    raise ExecError("analyze", f"unknown operator {plan.op}")
