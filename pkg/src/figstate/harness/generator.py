"""Deterministic (seeded) suite generation over the figure-type x
interaction-type x tier grid.

Each case is built oracle-first: the generator picks the intended analysis,
evaluates it with the reference evaluator, predicts the gesture predicate by
the documented translation rules (outward snap for intervals, grouping-value
membership for clicks, row keys for unaggregated marks), and freezes the
resulting digests. Question texts come from the same template vocabulary the
deterministic backend parses.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Any, Sequence

from figstate.compiler import predicates as pr
from figstate.compiler.actions import (
    Action,
    AggregateRows,
    AggSpec,
    FilterRows,
    JoinTables,
    SelectTable,
    SortKey,
    SortLimit,
)
from figstate.engine.catalog import TableCatalog
from figstate.errors import InsufficientCatalog
from figstate.harness.cases import GestureSpec, TestCase
from figstate.harness.reference import (
    ROW_KEY,
    RefRow,
    comparison_digest,
    reference_execute,
    reference_tables,
)
from figstate.model.charts import Aggregate
from figstate.model.slices import SemanticType

#: the bundled grid: every figure type, every interaction type, both tiers,
#: restricted to geometrically realizable combinations (2d brushes need x and
#: y channels; pie has neither, tables brush their quantitative label).
BUNDLED_STRATA: tuple[tuple[str, str, int, int], ...] = tuple(
    (figure, interaction, tier, 2)
    for figure in ("bar", "line", "scatter", "area")
    for interaction in ("single_mark", "interval_1d", "interval_2d")
    for tier in (1, 2)
) + tuple(
    ("table", interaction, tier, 2)
    for interaction in ("single_mark", "interval_1d")
    for tier in (1, 2)
) + tuple(
    ("pie", "single_mark", tier, 2) for tier in (1, 2)
)

DEFAULT_SEED = 7


@dataclass(frozen=True)
class CatalogShape:
    """Discovered columns the recipes are parameterized over."""

    base_table: str      # wide single table (climate fixture)
    base_nominal: str    # e.g. state
    base_dim: str        # small-cardinality numeric dim, e.g. month
    base_measure: str    # high-cardinality numeric, e.g. temp
    left_table: str      # join pair: nominal-rich side (faculty)
    right_table: str     # event side (disclosures)
    join_key: str        # shared key (person_id)
    left_nominal: str    # e.g. department
    left_nominal2: str   # e.g. tenure_status
    left_measure: str    # e.g. papers_cited_by_patents
    left_measure2: str   # e.g. invention_disclosures
    right_id: str        # countable id column (disclosure_id)
    right_status: str    # small nominal on the event side (status)
    right_dim: str       # numeric dim on the event side (disclosed_on_month)


def _distinct(rows: list[RefRow], column: str) -> list[Any]:
    seen: list[Any] = []
    for r in rows:
        v = r[column]
        if v not in seen:
            seen.append(v)
    return seen


def discover_shape(catalog: TableCatalog) -> CatalogShape:
    tables = reference_tables(catalog)
    schema_map = catalog.schema_map()

    base = base_nominal = base_dim = base_measure = None
    for table_id in sorted(tables, key=lambda t: -len(tables[t])):
        info = schema_map[table_id]
        rows = tables[table_id]
        nominals = [c.name for c in info.columns if c.stype is SemanticType.NOMINAL]
        quants = [c.name for c in info.columns if c.stype is SemanticType.QUANTITATIVE]
        dims = [q for q in quants if 2 <= len(_distinct(rows, q)) <= 31]
        measures = [q for q in quants if len(_distinct(rows, q)) > 31]
        if nominals and dims and measures:
            base, base_nominal, base_dim, base_measure = table_id, nominals[0], dims[0], measures[0]
            break
    if base is None:
        raise InsufficientCatalog("no table with a nominal dim, a small numeric dim, and a measure")

    join = None
    for left in sorted(tables):
        for right in sorted(tables):
            if left == right:
                continue
            left_cols = {c.name for c in schema_map[left].columns}
            right_cols = {c.name for c in schema_map[right].columns}
            shared = [c for c in sorted(left_cols & right_cols) if c.endswith("_id") or c == "id"]
            if not shared:
                continue
            key = shared[0]
            left_info = schema_map[left]
            left_nominals = [c.name for c in left_info.columns
                             if c.stype is SemanticType.NOMINAL and c.name != key
                             and 2 <= len(_distinct(tables[left], c.name)) <= 31]
            left_quants = [c.name for c in left_info.columns if c.stype is SemanticType.QUANTITATIVE]
            right_info = schema_map[right]
            right_ids = [c.name for c in right_info.columns
                         if c.stype is SemanticType.NOMINAL and c.name != key
                         and len(_distinct(tables[right], c.name)) > 31]
            right_status = [c.name for c in right_info.columns
                            if c.stype is SemanticType.NOMINAL and c.name != key
                            and 2 <= len(_distinct(tables[right], c.name)) <= 31]
            right_dims = [c.name for c in right_info.columns
                          if c.stype is SemanticType.QUANTITATIVE
                          and 2 <= len(_distinct(tables[right], c.name)) <= 31]
            if len(left_nominals) >= 2 and len(left_quants) >= 2 and right_ids and right_status and right_dims:
                join = (left, right, key, left_nominals, left_quants, right_ids[0], right_status[0], right_dims[0])
                break
        if join:
            break
    if join is None:
        raise InsufficientCatalog("tier 2 needs two joinable tables (shared *_id key)")

    left, right, key, left_nominals, left_quants, right_id, right_status, right_dim = join
    return CatalogShape(
        base_table=base, base_nominal=base_nominal, base_dim=base_dim, base_measure=base_measure,
        left_table=left, right_table=right, join_key=key,
        left_nominal=left_nominals[0], left_nominal2=left_nominals[1],
        left_measure=left_quants[0], left_measure2=left_quants[1] if len(left_quants) > 1 else left_quants[0],
        right_id=right_id, right_status=right_status, right_dim=right_dim,
    )


# --- gesture builders ---------------------------------------------------------------


def _order_key(v: Any) -> tuple[int, Any]:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return (0, v)
    return (1, str(v))


def _click_spec(rng: random.Random, rows: list[RefRow], column: str, channel: str,
                k_max: int = 2) -> tuple[GestureSpec, pr.Predicate]:
    values = sorted(_distinct(rows, column), key=_order_key)
    k = rng.randint(1, min(k_max, len(values)))
    picked = sorted(rng.sample(values, k), key=_order_key)
    spec = GestureSpec(kind="click", click_values=tuple({channel: v} for v in picked))
    return spec, pr.Predicate((pr.Membership(column, tuple(picked)),))


def _row_click_spec(rng: random.Random, rows: list[RefRow],
                    channels: dict[str, str]) -> tuple[GestureSpec, pr.Predicate]:
    """Click one unaggregated mark; the predicate is the first matching row's
    key, mirroring first-match mark resolution."""
    target = rows[rng.randrange(len(rows))]
    values = {channel: target[column] for channel, column in channels.items()}
    first = next(r for r in rows if all(r[col] == values[ch] for ch, col in channels.items()))
    spec = GestureSpec(kind="click", click_values=(values,))
    return spec, pr.Predicate((pr.Membership(ROW_KEY, (first[ROW_KEY],)),))


def _window(rng: random.Random, values: list[Any]) -> tuple[float, float, Any, Any]:
    """Pick a value window [v_i..v_j]; brush bounds land strictly inside the
    gaps around it, so the outward snap recovers exactly (v_i, v_j)."""
    values = sorted(values, key=_order_key)
    i = rng.randrange(len(values))
    j = min(len(values) - 1, i + rng.randrange(0, max(1, len(values) // 3)))
    lo_gap = (values[i] - values[i - 1]) if i > 0 else 1.0
    hi_gap = (values[j + 1] - values[j]) if j + 1 < len(values) else 1.0
    lo = values[i] - 0.25 * lo_gap
    hi = values[j] + 0.25 * hi_gap
    return lo, hi, values[i], values[j]


def _brush1d_spec(rng: random.Random, rows: list[RefRow], column: str,
                  channel: str) -> tuple[GestureSpec, pr.Predicate]:
    lo, hi, snap_lo, snap_hi = _window(rng, _distinct(rows, column))
    spec = GestureSpec(kind="brush1d", channel=channel, lo=lo, hi=hi)
    return spec, pr.Predicate((pr.RangeAtom(column, snap_lo, snap_hi),))


def _brush2d_spec(rng: random.Random, rows: list[RefRow], x_col: str,
                  y_col: str) -> tuple[GestureSpec, pr.Predicate]:
    anchor = rows[rng.randrange(len(rows))]
    xs = sorted(_distinct(rows, x_col), key=_order_key)
    ys = sorted(_distinct(rows, y_col), key=_order_key)

    def around(values: list[Any], v: Any) -> tuple[float, float, Any, Any]:
        i = values.index(v)
        j = min(len(values) - 1, i + rng.randrange(0, 3))
        lo_gap = (values[i] - values[i - 1]) if i > 0 else 1.0
        hi_gap = (values[j + 1] - values[j]) if j + 1 < len(values) else 1.0
        return values[i] - 0.25 * lo_gap, values[j] + 0.25 * hi_gap, values[i], values[j]

    x_lo, x_hi, sx_lo, sx_hi = around(xs, anchor[x_col])
    y_lo, y_hi, sy_lo, sy_hi = around(ys, anchor[y_col])
    spec = GestureSpec(kind="brush2d", x_lo=x_lo, x_hi=x_hi, y_lo=y_lo, y_hi=y_hi)
    predicate = pr.Predicate((
        pr.RangeAtom(x_col, sx_lo, sx_hi),
        pr.RangeAtom(y_col, sy_lo, sy_hi),
    ))
    return spec, predicate


# --- recipes -----------------------------------------------------------------------------


@dataclass
class Recipe:
    """One case's intended analysis before digests are frozen."""

    initial_question: str
    initial_actions: list[Action]
    gesture_column_channels: dict[str, str]  # channel -> column for gesture building
    gesture_mode: str  # agg_click | row_click | brush1d | brush2d
    followup_question: str
    followup_builder: Any  # (predicate) -> list[Action]


def _splice(initial: list[Action], predicate: pr.Predicate, rest: list[Action]) -> list[Action]:
    return [*initial, FilterRows(predicate, selection=True), *rest]


def _build_recipe(shape: CatalogShape, figure: str, interaction: str, tier: int,
                  rng: random.Random, tables) -> Recipe:
    s = shape
    if tier == 1 and figure in ("bar", "line", "area"):
        state = rng.choice(sorted(_distinct(tables[s.base_table], s.base_nominal)))
        if interaction == "single_mark" or interaction == "interval_1d":
            if figure == "bar" and interaction == "single_mark":
                lo_y = 2016.0
                initial_q = f"plot mean {s.base_measure} by {s.base_nominal} as {figure}"
                initial_a = [SelectTable(s.base_table)]
                gesture = (s.base_nominal, "x", "agg_click")
            else:
                initial_q = (f"plot mean {s.base_measure} by {s.base_dim} as {figure} "
                             f"for {s.base_nominal} {state.lower()}")
                initial_a = [SelectTable(s.base_table),
                             FilterRows(pr.Predicate((pr.Membership(s.base_nominal, (state,)),)))]
                gesture = (s.base_dim, "x", "agg_click" if interaction == "single_mark" else "brush1d")
            followup_q = f"rank {s.base_nominal} by mean {s.base_measure} as bar"
            out = f"{s.base_measure}_mean"

            def followup(pred: pr.Predicate) -> list[Action]:
                return _splice([SelectTable(s.base_table)], pred, [
                    AggregateRows((s.base_nominal,), (AggSpec(Aggregate.MEAN, s.base_measure),)),
                    SortLimit((SortKey(out, descending=True),)),
                ])
            column, channel, mode = gesture
            return Recipe(initial_q, initial_a, {channel: column}, mode, followup_q, followup)
        # interval_2d
        if figure == "bar":
            initial_q = f"rank {s.base_dim} by mean {s.base_measure} as bar for {s.base_nominal} {state.lower()}"
            out = f"{s.base_measure}_mean"
            initial_a = [
                SelectTable(s.base_table),
                FilterRows(pr.Predicate((pr.Membership(s.base_nominal, (state,)),))),
                AggregateRows((s.base_dim,), (AggSpec(Aggregate.MEAN, s.base_measure),)),
                SortLimit((SortKey(out, descending=True),)),
            ]
            x_col, y_col = s.base_dim, out
            label = out
        else:
            year = float(rng.choice(sorted(_distinct(tables[s.base_table], "year"))
                                    if any("year" == c for c in tables[s.base_table][0]) else [2018.0]))
            initial_q = (f"plot {s.base_measure} by {s.base_dim} as {figure} "
                         f"for {s.base_nominal} {state.lower()} and year {year:g}")
            initial_a = [SelectTable(s.base_table),
                         FilterRows(pr.Predicate((
                             pr.Membership(s.base_nominal, (state,)),
                             pr.Membership("year", (year,)),
                         )))]
            x_col, y_col = s.base_dim, s.base_measure
            label = s.base_measure
        followup_q = f"list rows by {label}"

        def followup(pred: pr.Predicate, _initial=initial_a) -> list[Action]:
            return _splice(list(_initial), pred, [])
        return Recipe(initial_q, initial_a, {"x": x_col, "y": y_col}, "brush2d", followup_q, followup)

    if tier == 2 and figure in ("bar", "line", "area"):
        if interaction in ("single_mark", "interval_1d"):
            if figure == "bar" and interaction == "single_mark":
                initial_q = f"plot count {s.right_id} by {s.left_nominal} as bar"
                initial_a = [SelectTable(s.right_table), JoinTables(s.left_table, s.join_key, s.join_key)]
                gesture = (s.left_nominal, "x", "agg_click")
            else:
                initial_q = f"plot mean {s.left_measure} by {s.right_dim} as {figure}"
                initial_a = [SelectTable(s.left_table), JoinTables(s.right_table, s.join_key, s.join_key)]
                gesture = (s.right_dim, "x", "agg_click" if interaction == "single_mark" else "brush1d")
            followup_q = f"rank {s.left_nominal} by count {s.right_id} as bar"
            out = f"{s.right_id}_count"

            def followup(pred: pr.Predicate) -> list[Action]:
                return _splice(
                    [SelectTable(s.right_table), JoinTables(s.left_table, s.join_key, s.join_key)],
                    pred,
                    [AggregateRows((s.left_nominal,), (AggSpec(Aggregate.COUNT, s.right_id),)),
                     SortLimit((SortKey(out, descending=True),))],
                )
            column, channel, mode = gesture
            return Recipe(initial_q, initial_a, {channel: column}, mode, followup_q, followup)
        # interval_2d
        if figure == "bar":
            out = f"{s.left_measure}_mean"
            initial_q = f"rank {s.right_dim} by mean {s.left_measure} as bar"
            initial_a = [
                SelectTable(s.left_table), JoinTables(s.right_table, s.join_key, s.join_key),
                AggregateRows((s.right_dim,), (AggSpec(Aggregate.MEAN, s.left_measure),)),
                SortLimit((SortKey(out, descending=True),)),
            ]
            x_col, y_col, label = s.right_dim, out, out
        else:
            dept = rng.choice(sorted(_distinct(tables[s.left_table], s.left_nominal)))
            initial_q = (f"plot {s.left_measure} by {s.right_dim} as {figure} "
                         f"for {s.left_nominal} {dept}")
            initial_a = [
                SelectTable(s.left_table), JoinTables(s.right_table, s.join_key, s.join_key),
                FilterRows(pr.Predicate((pr.Membership(s.left_nominal, (dept,)),))),
            ]
            x_col, y_col, label = s.right_dim, s.left_measure, s.left_measure
        followup_q = f"list rows by {label}"

        def followup(pred: pr.Predicate, _initial=initial_a) -> list[Action]:
            return _splice(list(_initial), pred, [])
        return Recipe(initial_q, initial_a, {"x": x_col, "y": y_col}, "brush2d", followup_q, followup)

    if figure == "scatter":
        if tier == 1:
            initial_q = f"plot {s.left_measure2} vs {s.left_measure}"
            initial_a = [SelectTable(s.left_table)]
            x_col, y_col = s.left_measure, s.left_measure2
            followup_q = f"show the {s.left_nominal} distribution as bar"

            def followup(pred: pr.Predicate) -> list[Action]:
                return _splice([SelectTable(s.left_table)], pred, [])
        else:
            initial_q = f"plot mean {s.left_measure} by {s.right_dim} as scatter"
            initial_a = [SelectTable(s.left_table), JoinTables(s.right_table, s.join_key, s.join_key)]
            x_col, y_col = s.right_dim, f"{s.left_measure}_mean"
            followup_q = f"rank {s.left_nominal} by count {s.right_id} as bar"
            out = f"{s.right_id}_count"

            def followup(pred: pr.Predicate) -> list[Action]:
                return _splice(
                    [SelectTable(s.right_table), JoinTables(s.left_table, s.join_key, s.join_key)],
                    pred,
                    [AggregateRows((s.left_nominal,), (AggSpec(Aggregate.COUNT, s.right_id),)),
                     SortLimit((SortKey(out, descending=True),))],
                )
            # aggregated scatter: gesture over the grouping dim via clicks/1d-brush
            if interaction == "single_mark":
                return Recipe(initial_q, initial_a, {"x": s.right_dim}, "agg_click", followup_q, followup)
            if interaction == "interval_1d":
                return Recipe(initial_q, initial_a, {"x": s.right_dim}, "brush1d", followup_q, followup)
            # 2d needs both channels plain: use the unaggregated event scatter
            dept = rng.choice(sorted(_distinct(tables[s.left_table], s.left_nominal)))
            initial_q = f"plot {s.left_measure} by {s.right_dim} as scatter for {s.left_nominal} {dept}"
            initial_a = [
                SelectTable(s.left_table), JoinTables(s.right_table, s.join_key, s.join_key),
                FilterRows(pr.Predicate((pr.Membership(s.left_nominal, (dept,)),))),
            ]
            followup_q = f"list rows by {s.left_measure}"

            def followup(pred: pr.Predicate, _initial=initial_a) -> list[Action]:
                return _splice(list(_initial), pred, [])
            return Recipe(initial_q, initial_a, {"x": s.right_dim, "y": s.left_measure},
                          "brush2d", followup_q, followup)

        if interaction == "single_mark":
            return Recipe(initial_q, initial_a, {"x": x_col, "y": y_col}, "row_click", followup_q, followup)
        if interaction == "interval_1d":
            return Recipe(initial_q, initial_a, {"x": x_col}, "brush1d", followup_q, followup)
        return Recipe(initial_q, initial_a, {"x": x_col, "y": y_col}, "brush2d", followup_q, followup)

    if figure == "table":
        if tier == 1:
            state = rng.choice(sorted(_distinct(tables[s.base_table], s.base_nominal)))
            initial_q = f"list rows by {s.base_measure} for {s.base_nominal} {state.lower()}"
            initial_a = [SelectTable(s.base_table),
                         FilterRows(pr.Predicate((pr.Membership(s.base_nominal, (state,)),)))]
            label = s.base_measure
            followup_q = f"rank {s.base_nominal} by mean {s.base_measure} as bar"
            out = f"{s.base_measure}_mean"

            def followup(pred: pr.Predicate) -> list[Action]:
                return _splice([SelectTable(s.base_table)], pred, [
                    AggregateRows((s.base_nominal,), (AggSpec(Aggregate.MEAN, s.base_measure),)),
                    SortLimit((SortKey(out, descending=True),)),
                ])
        else:
            dept = rng.choice(sorted(_distinct(tables[s.left_table], s.left_nominal)))
            dim_values = sorted(_distinct(tables[s.right_table], s.right_dim), key=_order_key)
            lo = dim_values[len(dim_values) // 4]
            hi = dim_values[(3 * len(dim_values)) // 4]
            initial_q = (f"list rows by {s.left_measure} for {s.left_nominal} {dept} "
                         f"and {s.right_dim} between {lo:g} and {hi:g}")
            initial_a = [
                SelectTable(s.left_table), JoinTables(s.right_table, s.join_key, s.join_key),
                FilterRows(pr.Predicate((
                    pr.Membership(s.left_nominal, (dept,)),
                    pr.RangeAtom(s.right_dim, float(lo), float(hi)),
                ))),
            ]
            label = s.left_measure
            followup_q = f"rank {s.left_nominal2} by mean {s.left_measure} as bar"
            out = f"{s.left_measure}_mean"

            def followup(pred: pr.Predicate) -> list[Action]:
                return _splice([SelectTable(s.left_table)], pred, [
                    AggregateRows((s.left_nominal2,), (AggSpec(Aggregate.MEAN, s.left_measure),)),
                    SortLimit((SortKey(out, descending=True),)),
                ]) if _rowkey_free(pred) else _splice(list(initial_a), pred, [])
        if interaction == "single_mark":
            mode = "row_click"
        else:
            mode = "brush1d"
        channels = {"row_label": label}
        if tier == 2 and interaction == "single_mark":
            # row-key selections over joined rows only replay against the
            # joined prefix; list the rows instead of re-ranking
            followup_q = f"list rows by {s.right_dim}"

            def followup(pred: pr.Predicate, _initial=initial_a) -> list[Action]:
                return _splice(list(_initial), pred, [])
        if tier == 1 and interaction == "single_mark":
            followup_q = f"list rows by {s.base_dim}"

            def followup(pred: pr.Predicate, _initial=initial_a) -> list[Action]:
                return _splice(list(_initial), pred, [])
        return Recipe(initial_q, initial_a, channels, mode, followup_q, followup)

    if figure == "pie":
        if tier == 1:
            initial_q = f"percentage of {s.left_nominal2} as pie"
            initial_a = [SelectTable(s.left_table)]
            dim = s.left_nominal2
            followup_q = f"show the {s.left_nominal} distribution as bar"

            def followup(pred: pr.Predicate) -> list[Action]:
                return _splice([SelectTable(s.left_table)], pred, [])
        else:
            dept = rng.choice(sorted(_distinct(tables[s.left_table], s.left_nominal)))
            initial_q = f"percentage of {s.right_status} as pie for {s.left_nominal} {dept}"
            initial_a = [
                SelectTable(s.right_table), JoinTables(s.left_table, s.join_key, s.join_key),
                FilterRows(pr.Predicate((pr.Membership(s.left_nominal, (dept,)),))),
            ]
            dim = s.right_status
            followup_q = f"list rows by {s.right_dim}"

            def followup(pred: pr.Predicate, _initial=initial_a) -> list[Action]:
                return _splice(list(_initial), pred, [])
        return Recipe(initial_q, initial_a, {"color": dim}, "agg_click", followup_q, followup)

    raise ValueError(f"unrealizable stratum: {figure} x {interaction} x tier {tier}")


def _rowkey_free(pred: pr.Predicate) -> bool:
    return all(a.column != ROW_KEY for a in pred.atoms)


def generate_suite(
    catalog: TableCatalog,
    strata: Sequence[tuple[str, str, int, int]] = BUNDLED_STRATA,
    seed: int = DEFAULT_SEED,
) -> list[TestCase]:
    """Deterministic suite over the requested strata; every oracle digest is
    produced by the reference evaluator, never the engine."""
    shape = discover_shape(catalog)
    tables = reference_tables(catalog)
    rng = random.Random(seed)
    cases: list[TestCase] = []

    for figure, interaction, tier, reps in strata:
        for rep in range(reps):
            case_no = len(cases)
            for attempt in range(20):
                recipe = _build_recipe(shape, figure, interaction, tier, rng, tables)
                initial_rows = reference_execute(recipe.initial_actions, tables)
                if not initial_rows:
                    continue
                gesture1, pred1 = _make_gesture(recipe, initial_rows, rng)
                gesture2, pred2 = _make_gesture(recipe, initial_rows, rng)
                if pred1 == pred2:
                    continue
                followup_actions = recipe.followup_builder(pred1)
                followup_rows = reference_execute(followup_actions, tables)
                coordination_actions = recipe.followup_builder(pred2)
                coordination_rows = reference_execute(coordination_actions, tables)
                if not followup_rows or not coordination_rows:
                    continue
                cases.append(TestCase(
                    case_id=f"case-{case_no:03d}-{figure}-{interaction}-t{tier}",
                    tier=tier,
                    figure_type=figure,
                    interaction_type=interaction,
                    initial_question=recipe.initial_question,
                    initial_oracle_query="",
                    initial_oracle_digest=comparison_digest(
                        [{k: v for k, v in r.items() if k != ROW_KEY} for r in initial_rows]
                    ),
                    initial_oracle_actions=tuple(recipe.initial_actions),
                    followup_question=recipe.followup_question,
                    followup_gesture=gesture1,
                    followup_oracle_digest=comparison_digest(
                        [{k: v for k, v in r.items() if k != ROW_KEY} for r in followup_rows]
                    ),
                    followup_oracle_actions=tuple(followup_actions),
                    coordination_gesture=gesture2,
                    coordination_oracle_digest=comparison_digest(
                        [{k: v for k, v in r.items() if k != ROW_KEY} for r in coordination_rows]
                    ),
                    coordination_oracle_actions=tuple(coordination_actions),
                ))
                break
            else:
                raise InsufficientCatalog(
                    f"could not realize stratum {figure} x {interaction} x tier {tier}"
                )
    return cases


def _make_gesture(recipe: Recipe, rows: list[RefRow], rng: random.Random):
    channels = recipe.gesture_column_channels
    if recipe.gesture_mode == "agg_click":
        (channel, column), = channels.items()
        return _click_spec(rng, rows, column, channel)
    if recipe.gesture_mode == "row_click":
        return _row_click_spec(rng, rows, channels)
    if recipe.gesture_mode == "brush1d":
        (channel, column), = channels.items()
        return _brush1d_spec(rng, rows, column, channel)
    if recipe.gesture_mode == "brush2d":
        return _brush2d_spec(rng, rows, channels["x"], channels["y"])
    raise ValueError(recipe.gesture_mode)
