"""Query plans: linear operator pipelines plus joins, and their dialect text.

The serialized text follows the documented SQL subset (docs/sql-dialect.md):
SELECT / WHERE / JOIN / GROUP BY / ORDER BY / LIMIT with BETWEEN and IN
predicates; whole-column analyze steps render as ANALYZE pseudo-clauses,
a declared dialect extension.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from figstate.compiler import expressions as xp
from figstate.compiler import predicates as pr
from figstate.compiler.actions import AggSpec, AnalyzeOp, SortKey
from figstate.model.charts import Aggregate


@dataclass(frozen=True)
class Scan:
    table: str


@dataclass(frozen=True)
class Filter:
    input: "PlanNode"
    predicate: pr.Predicate


@dataclass(frozen=True)
class Project:
    input: "PlanNode"
    columns: tuple[str, ...]


@dataclass(frozen=True)
class Derive:
    input: "PlanNode"
    column: str
    expression: xp.Expr


@dataclass(frozen=True)
class Join:
    input: "PlanNode"
    table: str
    left_key: str
    right_key: str


@dataclass(frozen=True)
class GroupAggregate:
    input: "PlanNode"
    group_by: tuple[str, ...]
    aggs: tuple[AggSpec, ...]


@dataclass(frozen=True)
class TakeSortLimit:
    input: "PlanNode"
    keys: tuple[SortKey, ...]
    limit: int | None


@dataclass(frozen=True)
class AnalyzeStep:
    input: "PlanNode"
    op: AnalyzeOp
    column: str
    k: int | None
    bins: int | None
    out: str


PlanNode = Union[Scan, Filter, Project, Derive, Join, GroupAggregate, TakeSortLimit, AnalyzeStep]


def scanned_tables(plan: PlanNode) -> tuple[str, ...]:
    if isinstance(plan, Scan):
        return (plan.table,)
    tables = scanned_tables(plan.input)
    if isinstance(plan, Join):
        tables = tables + (plan.table,)
    return tables


_AGG_SQL = {
    Aggregate.MEAN: "AVG",
    Aggregate.SUM: "SUM",
    Aggregate.COUNT: "COUNT",
    Aggregate.MIN: "MIN",
    Aggregate.MAX: "MAX",
}


class _SelectBuilder:
    """Accumulates clauses for one SELECT; wraps into a subquery when an
    operator cannot extend the current statement."""

    def __init__(self, from_clause: str):
        self.select: list[str] | None = None  # None renders as *
        self.extra_select: list[str] = []  # derived expressions appended to *
        self.from_clause = from_clause
        self.joins: list[str] = []
        self.where: list[str] = []
        self.group: list[str] | None = None
        self.order: list[str] | None = None
        self.limit: int | None = None
        self.analyze: list[str] = []

    def render(self) -> str:
        if self.select is not None:
            select = ", ".join(self.select)
        elif self.extra_select:
            select = ", ".join(["*", *self.extra_select])
        else:
            select = "*"
        text = f"SELECT {select} FROM {self.from_clause}"
        for j in self.joins:
            text += f" {j}"
        if self.where:
            text += " WHERE " + " AND ".join(self.where)
        if self.group:
            text += " GROUP BY " + ", ".join(self.group)
        if self.order:
            text += " ORDER BY " + ", ".join(self.order)
        if self.limit is not None:
            text += f" LIMIT {self.limit}"
        for a in self.analyze:
            text += f" {a}"
        return text

    def wrapped(self) -> "_SelectBuilder":
        return _SelectBuilder(f"({self.render()})")

    def has_shape(self) -> bool:
        return bool(self.select is not None or self.group or self.order or self.limit is not None or self.analyze)


def to_sql_text(plan: PlanNode) -> str:
    """Deterministic dialect text for a plan; compilation documentation, and
    the contract checked by compilation-determinism tests."""
    return _build(plan).render()


def _build(plan: PlanNode) -> _SelectBuilder:
    if isinstance(plan, Scan):
        return _SelectBuilder(plan.table)
    b = _build(plan.input)
    if isinstance(plan, Filter):
        if b.has_shape():
            b = b.wrapped()
        b.where.append(pr.predicate_to_sql(plan.predicate))
        return b
    if isinstance(plan, Project):
        if b.has_shape():
            b = b.wrapped()
        b.select = list(plan.columns)
        return b
    if isinstance(plan, Derive):
        if b.has_shape():
            b = b.wrapped()
        b.extra_select.append(f"{xp.to_text(plan.expression)} AS {plan.column}")
        return b
    if isinstance(plan, Join):
        if b.has_shape() or b.extra_select or b.where:
            b = b.wrapped()
        b.joins.append(f"JOIN {plan.table} ON {plan.left_key} = {plan.table}.{plan.right_key}")
        return b
    if isinstance(plan, GroupAggregate):
        if b.has_shape() or b.extra_select:
            b = b.wrapped()
        selects = list(plan.group_by)
        for spec in plan.aggs:
            selects.append(f"{_AGG_SQL[spec.op]}({spec.column}) AS {spec.out_name()}")
        b.select = selects
        b.group = list(plan.group_by)
        return b
    if isinstance(plan, TakeSortLimit):
        if b.order is not None or b.limit is not None or b.analyze:
            b = b.wrapped()
        b.order = [f"{k.column} {'DESC' if k.descending else 'ASC'}" for k in plan.keys]
        if plan.limit is not None:
            b.limit = plan.limit
        return b
    if isinstance(plan, AnalyzeStep):
        if plan.op is AnalyzeOp.TOPK:
            if b.order is not None or b.limit is not None or b.analyze:
                b = b.wrapped()
            b.order = [f"{plan.column} DESC"]
            b.limit = plan.k
            return b
        args = plan.column
        if plan.op is AnalyzeOp.BINNING:
            args += f", {plan.bins}"
        out = plan.out or _default_analyze_out(plan)
        b.analyze.append(f"ANALYZE {plan.op.value.upper()}({args}) AS {out}")
        return b
    raise TypeError(f"unknown plan node {plan!r}")


def _default_analyze_out(plan: AnalyzeStep) -> str:
    suffix = {"percentage_of_total": "pct", "binning": "bin", "zscore": "z"}[plan.op.value]
    return f"{plan.column}_{suffix}"


def describe(plan: PlanNode) -> tuple[str, ...]:
    """Human-oriented transform descriptions for slice lineage."""
    if isinstance(plan, Scan):
        return ()
    inner = describe(plan.input)
    if isinstance(plan, Filter):
        return inner  # filters land in lineage.predicate_text instead
    if isinstance(plan, Project):
        return inner + (f"project {', '.join(plan.columns)}",)
    if isinstance(plan, Derive):
        return inner + (f"derive {plan.column} = {xp.to_text(plan.expression)}",)
    if isinstance(plan, Join):
        return inner + (f"join {plan.table} on {plan.left_key} = {plan.right_key}",)
    if isinstance(plan, GroupAggregate):
        aggs = ", ".join(f"{s.op.value}({s.column})" for s in plan.aggs)
        by = ", ".join(plan.group_by) or "()"
        return inner + (f"aggregate {aggs} by {by}",)
    if isinstance(plan, TakeSortLimit):
        keys = ", ".join(f"{k.column} {'desc' if k.descending else 'asc'}" for k in plan.keys)
        suffix = f" limit {plan.limit}" if plan.limit is not None else ""
        return inner + (f"sort by {keys}{suffix}",)
    if isinstance(plan, AnalyzeStep):
        return inner + (f"analyze {plan.op.value}({plan.column})",)
    raise TypeError(f"unknown plan node {plan!r}")


def filter_texts(plan: PlanNode) -> tuple[str, ...]:
    if isinstance(plan, Scan):
        return ()
    inner = filter_texts(plan.input)
    if isinstance(plan, Filter):
        return inner + (pr.predicate_to_sql(plan.predicate),)
    return inner
