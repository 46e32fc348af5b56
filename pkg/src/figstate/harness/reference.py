"""Independent row-at-a-time reference evaluator.

This module is the oracle side of every engine comparison, so it must not
call the engine's execution paths: predicates, expressions, joins,
aggregation, and analyze operators are all re-implemented here over plain
dict rows. The only shared conventions are the action/predicate type
definitions and the documented row-key derivation (scan keys `<table>:<i>`,
join keys `<l>|<r>`, group keys from canonical group values), which keeps
sort/limit tie-breaks aligned without touching engine code.
"""

from __future__ import annotations

import hashlib
import math
from typing import Any, Mapping, Sequence

from figstate.compiler import expressions as xp
from figstate.compiler import predicates as pr
from figstate.compiler.actions import (
    Action,
    ActionKind,
    Analyze,
    AnalyzeOp,
    AggregateRows,
    DeriveColumn,
    FilterRows,
    JoinTables,
    SelectColumns,
    SelectTable,
    SortLimit,
)
from figstate.engine.catalog import TableCatalog
from figstate.model.charts import Aggregate
from figstate.model.slices import DataSlice

ROW_KEY = "__row_key"

RefRow = dict[str, Any]
RefTables = Mapping[str, list[RefRow]]


def reference_tables(catalog: TableCatalog) -> dict[str, list[RefRow]]:
    """Raw table rows as dicts; data access only, no engine execution."""
    out: dict[str, list[RefRow]] = {}
    for table_id in catalog.table_ids():
        table = catalog.get_table(table_id)
        names = [c.name for c in table.schema]
        rows = []
        for row in table.rows:
            d = dict(zip(names, row.values))
            d[ROW_KEY] = row.key
            rows.append(d)
        out[table_id] = rows
    return out


# --- independent predicate and expression semantics -------------------------------------


def atom_holds(atom: pr.Atom, row: RefRow) -> bool:
    value = row[atom.column]
    if isinstance(atom, pr.Membership):
        for candidate in atom.values:
            if value == candidate:
                return True
        return False
    if isinstance(atom, pr.RangeAtom):
        return atom.lo <= value and value <= atom.hi
    if isinstance(atom, pr.Comparison):
        op = atom.op
        if op == "<":
            return value < atom.value
        if op == "<=":
            return value <= atom.value
        if op == "=":
            return value == atom.value
        if op == ">=":
            return value >= atom.value
        if op == ">":
            return value > atom.value
        if op == "!=":
            return value != atom.value
    raise ValueError(f"unknown atom {atom!r}")


def predicate_holds(predicate: pr.Predicate, row: RefRow) -> bool:
    for atom in predicate.atoms:
        if not atom_holds(atom, row):
            return False
    return True


def eval_expr(expr: xp.Expr, row: RefRow) -> Any:
    if isinstance(expr, xp.ColumnRef):
        return row[expr.name]
    if isinstance(expr, xp.Literal):
        return expr.value
    if isinstance(expr, xp.Arith):
        left = float(eval_expr(expr.left, row))
        right = float(eval_expr(expr.right, row))
        if expr.op == "add":
            return left + right
        if expr.op == "sub":
            return left - right
        if expr.op == "mul":
            return left * right
        if expr.op == "div":
            if right == 0.0:
                raise ZeroDivisionError("reference division by zero")
            return left / right
    if isinstance(expr, xp.Log):
        v = float(eval_expr(expr.arg, row)) + expr.offset
        if v <= 0.0:
            raise ValueError("reference log domain")
        return math.log(v)
    if isinstance(expr, xp.Exp):
        return math.exp(float(eval_expr(expr.arg, row)))
    if isinstance(expr, xp.Abs):
        return abs(float(eval_expr(expr.arg, row)))
    if isinstance(expr, xp.Bucket):
        v = float(eval_expr(expr.arg, row))
        i = 0
        while i < len(expr.thresholds) and v > expr.thresholds[i]:
            i += 1
        return expr.labels[i]
    raise ValueError(f"unknown expression {expr!r}")


def _canonical_group_cell(value: Any) -> str:
    if isinstance(value, bool):
        return "b1" if value else "b0"
    if isinstance(value, float):
        return "f" + value.hex()
    if isinstance(value, int):
        return "i" + str(value)
    return f"s{len(str(value))}:{value}"


# --- action-at-a-time evaluation --------------------------------------------------------


def reference_execute(actions: Sequence[Action], tables: RefTables) -> list[RefRow]:
    """Evaluate the data-facing steps of an action sequence naively."""
    rows: list[RefRow] | None = None
    for action in actions:
        if action.kind is ActionKind.SELECT_TABLE:
            assert isinstance(action, SelectTable)
            rows = [dict(r) for r in tables[action.table]]
        elif action.kind is ActionKind.ADD_DATA:
            if getattr(action, "table", None) is not None and rows is None:
                rows = [dict(r) for r in tables[action.table]]
        elif rows is None:
            continue
        elif action.kind is ActionKind.SELECT_COLUMNS:
            assert isinstance(action, SelectColumns)
            rows = [
                {**{c: r[c] for c in action.columns}, ROW_KEY: r[ROW_KEY]}
                for r in rows
            ]
        elif action.kind is ActionKind.FILTER_ROWS:
            assert isinstance(action, FilterRows)
            rows = [r for r in rows if predicate_holds(action.predicate, r)]
        elif action.kind is ActionKind.JOIN_TABLES:
            assert isinstance(action, JoinTables)
            right_rows = tables[action.table]
            joined = []
            for left in rows:
                for right in right_rows:
                    if left[action.left_key] == right[action.right_key]:
                        merged = dict(left)
                        for k, v in right.items():
                            if k in (action.right_key, ROW_KEY):
                                continue
                            merged[k] = v
                        merged[ROW_KEY] = f"{left[ROW_KEY]}|{right[ROW_KEY]}"
                        joined.append(merged)
            rows = joined
        elif action.kind is ActionKind.DERIVE_COLUMN:
            assert isinstance(action, DeriveColumn)
            for r in rows:
                r[action.column] = eval_expr(action.expression, r)
        elif action.kind is ActionKind.AGGREGATE:
            assert isinstance(action, AggregateRows)
            rows = _reference_aggregate(rows, action)
        elif action.kind is ActionKind.SORT_LIMIT:
            assert isinstance(action, SortLimit)
            rows = _reference_sort(rows, [(k.column, k.descending) for k in action.keys])
            if action.limit is not None:
                rows = rows[: action.limit]
        elif action.kind is ActionKind.ANALYZE:
            assert isinstance(action, Analyze)
            rows = _reference_analyze(rows, action)
    return rows if rows is not None else []


def _reference_aggregate(rows: list[RefRow], action: AggregateRows) -> list[RefRow]:
    groups: dict[tuple, list[RefRow]] = {}
    for r in rows:
        key = tuple(r[g] for g in action.group_by)
        groups.setdefault(key, []).append(r)
    out = []
    for key, members in groups.items():
        record: RefRow = {g: v for g, v in zip(action.group_by, key)}
        for spec in action.aggs:
            values = [m[spec.column] for m in members]
            if spec.op is Aggregate.COUNT:
                value: Any = float(len(values))
            elif spec.op is Aggregate.SUM:
                value = float(sum(values))
            elif spec.op is Aggregate.MEAN:
                value = float(sum(values)) / len(values)
            elif spec.op is Aggregate.MIN:
                value = min(values)
            else:
                value = max(values)
            record[spec.out_name()] = value
        record[ROW_KEY] = "g|" + "|".join(_canonical_group_cell(v) for v in key)
        out.append(record)
    return out


def _sort_key(value: Any) -> tuple[int, Any]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (0, value)
    return (1, str(value))


def _reference_sort(rows: list[RefRow], keys: list[tuple[str, bool]]) -> list[RefRow]:
    out = sorted(rows, key=lambda r: r[ROW_KEY])
    for column, descending in reversed(keys):
        out.sort(key=lambda r: _sort_key(r[column]), reverse=descending)
    return out


def _reference_analyze(rows: list[RefRow], action: Analyze) -> list[RefRow]:
    if action.op is AnalyzeOp.TOPK:
        return _reference_sort(rows, [(action.column, True)])[: action.k]
    out_name = action.out_name()
    values = [float(r[action.column]) for r in rows]
    if action.op is AnalyzeOp.PERCENTAGE_OF_TOTAL:
        total = sum(values)
        for r, v in zip(rows, values):
            r[out_name] = v / total * 100.0
        return rows
    if action.op is AnalyzeOp.BINNING:
        if not rows:
            return rows
        lo, hi = min(values), max(values)
        bins = action.bins or 1
        width = (hi - lo) / bins
        for r, v in zip(rows, values):
            slot = 0 if width == 0.0 else min(int((v - lo) / width), bins - 1)
            r[out_name] = lo + slot * width
        return rows
    if action.op is AnalyzeOp.ZSCORE:
        if not rows:
            return rows
        mean = sum(values) / len(values)
        sigma = (sum((v - mean) ** 2 for v in values) / len(values)) ** 0.5
        for r, v in zip(rows, values):
            r[out_name] = (v - mean) / sigma if sigma else 0.0
        return rows
    raise ValueError(f"unknown analyze op {action.op}")


# --- order-insensitive comparison digest --------------------------------------------------


def _comparison_cell(value: Any) -> str:
    if isinstance(value, bool):
        return f"b:{value}"
    if isinstance(value, (int, float)):
        return f"n:{float(value):.9g}"
    return f"s:{value}"


def comparison_digest(rows: Sequence[Mapping[str, Any]]) -> str:
    """Multiset digest over row values: row keys dropped, columns sorted by
    name, numeric cells rounded to 9 significant digits."""
    canon = []
    for row in rows:
        cells = sorted(
            (k, _comparison_cell(v)) for k, v in row.items() if k != ROW_KEY
        )
        canon.append("\x1f".join(f"{k}={v}" for k, v in cells))
    canon.sort()
    return hashlib.sha256("\x1e".join(canon).encode("utf-8")).hexdigest()


def slice_rows(data: DataSlice) -> list[RefRow]:
    names = data.column_names()
    return [dict(zip(names, r.values)) for r in data.rows]


def compare_results(produced: DataSlice, oracle_digest: str) -> bool:
    """Order-insensitive multiset equality between a produced slice and a
    reference digest."""
    return comparison_digest(slice_rows(produced)) == oracle_digest
