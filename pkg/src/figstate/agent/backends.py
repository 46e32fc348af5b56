"""Pluggable intent backends: deterministic template grammar, scripted test
doubles, and a thin HTTP chat-completion client.

The deterministic backend parses a documented grammar of parameterized
intents with normalized-token matching and fuzzy column/value grounding
(case-insensitive, edit distance <= 1, caller-supplied synonyms), which
gives the whole system an LLM-free, fully testable path:

    plot <agg>? <measure> by <dimension> [for <filters>] [as <chart>]
    plot <y> vs <x> [for <filters>]
    rank <dimension> by <agg> <measure> [for <filters>] [top <k>]
    filter to <filters>
    make <x|y> log scale
    show <dimension> distribution [for <filters>] [as <chart>]
    percentage of <dimension> as pie
    list rows [for <filters>]

Filters: `<column> <value>`, `<column> between <lo> and <hi>`,
`<column> from <lo> to <hi>`, or a bare `<value>` grounded against the
catalog's nominal values; atoms join with `and`.
"""

from __future__ import annotations

import abc
import json
import os
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import httpx

from figstate.agent.context import DataContext
from figstate.compiler import expressions as xp
from figstate.compiler.actions import (
    Action,
    AddChartType,
    AddData,
    AddEncoding,
    AddParams,
    AggregateRows,
    AggSpec,
    CatalogSchema,
    DeriveColumn,
    FilterRows,
    JoinTables,
    SelectTable,
    SortKey,
    SortLimit,
    UpdateData,
    UpdateEncoding,
    action_from_jsonable,
)
from figstate.compiler.predicates import Membership, Predicate, RangeAtom
from figstate.errors import BackendUnavailable
from figstate.model.charts import (
    Aggregate,
    Channel,
    ChartType,
    EncodingSpec,
    InteractionDecl,
    InteractionKind,
    Scale,
    default_scale,
)
from figstate.model.slices import Column, SemanticType


class QueryClass(str, Enum):
    HIGH_LEVEL = "high_level"
    LOW_LEVEL = "low_level"
    RECOMMENDATION_REQUEST = "recommendation_request"


@dataclass(frozen=True)
class RequestFacts:
    """What the user asked for, as the evaluation rubric checks it."""

    intent: str
    chart_type: ChartType | None = None
    columns: tuple[str, ...] = ()
    is_filter: bool = False


@dataclass(frozen=True)
class Proposal:
    actions: tuple[Action, ...]
    rationale: str
    mode: str  # generate | manipulate | extend
    facts: RequestFacts | None = None


class IntentBackend(abc.ABC):
    """The seam where a planner plugs in; stateless between calls."""

    name: str = "backend"

    @abc.abstractmethod
    def classify(self, text: str) -> QueryClass:
        ...

    @abc.abstractmethod
    def propose(
        self,
        text: str,
        context: DataContext,
        catalog_schema: CatalogSchema,
        has_interaction: bool = False,
    ) -> tuple[Proposal, ...]:
        ...

    def decompose(self, text: str) -> tuple[str, ...]:
        parts = [p.strip() for p in re.split(r"\band\b|\bthen\b|;", text) if p.strip()]
        if len(parts) < 2:
            parts = [text.strip(), "summarize what the result shows"]
        return tuple(parts)

    def recommend(self, context: DataContext, catalog_schema: CatalogSchema) -> tuple[str, ...]:
        suggestions = []
        for table_id, info in sorted(catalog_schema.items()):
            quant = [c.name for c in info.columns if c.stype is SemanticType.QUANTITATIVE]
            nominal = [c.name for c in info.columns if c.stype is SemanticType.NOMINAL]
            if quant and nominal:
                suggestions.append(f"plot mean {quant[0]} by {nominal[0]} for {table_id}")
                suggestions.append(f"rank {nominal[0]} by mean {quant[0]}")
            if len(quant) >= 2:
                suggestions.append(f"plot {quant[1]} vs {quant[0]}")
            if suggestions:
                break
        return tuple(suggestions) or ("list rows",)

    def score(self, summary: Mapping[str, Any]) -> float | None:
        """Model-provided evaluation; None defers to the deterministic rubric."""
        return None


# --- token utilities ------------------------------------------------------------------

_STOPWORDS = {"the", "a", "an", "me", "of", "please", "chart", "using", "show"}
_AGG_WORDS = {
    "mean": Aggregate.MEAN, "average": Aggregate.MEAN, "avg": Aggregate.MEAN,
    "sum": Aggregate.SUM, "total": Aggregate.SUM,
    "count": Aggregate.COUNT, "number": Aggregate.COUNT,
    "min": Aggregate.MIN, "minimum": Aggregate.MIN,
    "max": Aggregate.MAX, "maximum": Aggregate.MAX,
}
_CHART_WORDS = {c.value: c for c in ChartType}


def normalize(text: str) -> list[str]:
    return re.findall(r"[a-z0-9_.'%-]+", text.lower().replace("'", ""))


def within_one_edit(a: str, b: str) -> bool:
    if a == b:
        return True
    la, lb = len(a), len(b)
    if abs(la - lb) > 1:
        return False
    if la > lb:
        a, b, la, lb = b, a, lb, la
    # a is shorter or equal; try one deletion/substitution alignment
    i = j = 0
    edited = False
    while i < la and j < lb:
        if a[i] == b[j]:
            i += 1
            j += 1
            continue
        if edited:
            return False
        edited = True
        if la == lb:
            i += 1
        j += 1
    return True


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


class SchemaIndex:
    """Fuzzy lookup of columns and nominal values across the catalog."""

    def __init__(self, catalog_schema: CatalogSchema, synonyms: Mapping[str, str] | None = None):
        self.schema = catalog_schema
        self.synonyms = {normalize_key(k): v for k, v in (synonyms or {}).items()}
        self.columns: dict[str, list[tuple[str, Column]]] = {}
        for table_id, info in catalog_schema.items():
            for col in info.columns:
                self.columns.setdefault(col.name, []).append((table_id, col))

    def match_column(self, tokens: Sequence[str], start: int, max_span: int = 4) -> tuple[str, int] | None:
        """Greedy longest match of a column name at tokens[start:]; returns
        (column, tokens consumed)."""
        for span in range(min(max_span, len(tokens) - start), 0, -1):
            candidate = "_".join(tokens[start : start + span])
            resolved = self._resolve(candidate)
            if resolved is not None:
                return resolved, span
        return None

    def _resolve(self, candidate: str) -> str | None:
        if candidate in self.synonyms:
            candidate = normalize_key(self.synonyms[candidate])
        for name in self.columns:
            if name.lower() == candidate:
                return name
        if len(candidate) > 3:
            for name in self.columns:
                if within_one_edit(name.lower(), candidate):
                    return name
        return None

    def column_type(self, column: str) -> SemanticType:
        return self.columns[column][0][1].stype

    def tables_with(self, column: str) -> list[str]:
        return [t for t, _ in self.columns.get(column, ())]

    def match_value(self, tokens: Sequence[str], start: int, column: str | None = None) -> tuple[str, Any, int] | None:
        """Ground tokens against nominal values; returns (column, value, consumed)."""
        for span in range(min(3, len(tokens) - start), 0, -1):
            phrase = " ".join(tokens[start : start + span])
            for table_id, info in self.schema.items():
                for col, values in info.nominal_values.items():
                    if column is not None and col != column:
                        continue
                    for v in values:
                        if isinstance(v, str) and (v.lower() == phrase or within_one_edit(v.lower(), phrase)):
                            return col, v, span
        return None

    def join_key(self, left_table: str, right_table: str) -> str | None:
        left = {c.name for c in self.schema[left_table].columns}
        right = {c.name for c in self.schema[right_table].columns}
        shared = sorted(left & right)
        for name in shared:
            if name.endswith("_id") or name == "id":
                return name
        return shared[0] if shared else None


def normalize_key(text: str) -> str:
    return "_".join(normalize(text))


# --- the deterministic template backend ------------------------------------------------


@dataclass
class TemplateBackend(IntentBackend):
    """Rule-grammar planner: exact on its documented grammar, silent outside it."""

    synonyms: Mapping[str, str] = field(default_factory=dict)
    name: str = "deterministic"

    def classify(self, text: str) -> QueryClass:
        tokens = normalize(text)
        if any(t in ("recommend", "suggest", "suggestion", "suggestions") for t in tokens):
            return QueryClass.RECOMMENDATION_REQUEST
        if "what" in tokens and ("next" in tokens or "should" in tokens):
            return QueryClass.RECOMMENDATION_REQUEST
        if any(t in ("explain", "why", "drivers") for t in tokens) and ("and" in tokens or "compare" in tokens):
            return QueryClass.HIGH_LEVEL
        return QueryClass.LOW_LEVEL

    def propose(
        self,
        text: str,
        context: DataContext,
        catalog_schema: CatalogSchema,
        has_interaction: bool = False,
    ) -> tuple[Proposal, ...]:
        index = SchemaIndex(catalog_schema, self.synonyms)
        tokens = normalize(text)
        if not tokens:
            return ()
        parsers = (
            self._parse_log_scale,
            self._parse_filter,
            self._parse_rank,
            self._parse_distribution,
            self._parse_pie_share,
            self._parse_list_rows,
            self._parse_vs_scatter,
            self._parse_plot,
        )
        for parser in parsers:
            proposals = parser(tokens, index, context, has_interaction)
            if proposals:
                return proposals
        return ()

    # -- intent parsers -----------------------------------------------------------

    def _mode(self, has_interaction: bool, manipulation: bool = False) -> str:
        if has_interaction:
            return "extend"
        return "manipulate" if manipulation else "generate"

    def _parse_log_scale(self, tokens, index, context, has_interaction):
        # make <x|y> log scale
        if "log" not in tokens or "make" not in tokens:
            return ()
        axes = [t for t in tokens if t in ("x", "y")]
        if not axes or context.focus is None:
            return ()
        actions: list[Action] = []
        encodings = dict(context.focus.encodings)
        for axis in axes:
            column = encodings.get(axis)
            if column is None:
                return ()
            derived = f"log_{column}"
            if derived not in context.focus.columns:
                actions.append(DeriveColumn(derived, xp.Log(xp.ColumnRef(column), 1.0)))
            actions.append(UpdateEncoding(Channel(axis), EncodingSpec(derived, Scale.LINEAR)))
        actions.insert(len([a for a in actions if isinstance(a, DeriveColumn)]), UpdateData())
        facts = RequestFacts(intent="log_scale", columns=tuple(f"log_{encodings[a]}" for a in axes))
        return (Proposal(tuple(actions), f"log-transform axis {'/'.join(axes)}", "manipulate", facts),)

    def _parse_filter(self, tokens, index, context, has_interaction):
        # filter to <atoms>
        if tokens[0] not in ("filter", "restrict"):
            return ()
        rest = tokens[1:]
        if rest and rest[0] == "to":
            rest = rest[1:]
        atoms = _parse_filter_atoms(rest, index)
        if atoms is None or not atoms:
            return ()
        predicate = Predicate(tuple(atoms))
        facts = RequestFacts(intent="filter", columns=predicate.columns(), is_filter=True)
        actions = (FilterRows(predicate), UpdateData())
        mode = "extend" if has_interaction else "manipulate"
        return (Proposal(actions, f"filter to {len(atoms)} condition(s)", mode, facts),)

    def _parse_rank(self, tokens, index, context, has_interaction):
        # rank <dimension> by <agg> <measure> [for ...] [top k]
        if tokens[0] != "rank":
            return ()
        tokens = [t for t in tokens if t not in _STOPWORDS]
        pos = 1
        dim = index.match_column(tokens, pos)
        if dim is None:
            return ()
        dimension, used = dim
        pos += used
        if pos >= len(tokens) or tokens[pos] != "by":
            return ()
        pos += 1
        agg = _AGG_WORDS.get(tokens[pos]) if pos < len(tokens) else None
        if agg is not None:
            pos += 1
        else:
            agg = Aggregate.MEAN
        measure = index.match_column(tokens, pos)
        if measure is None:
            return ()
        measure_col, used = measure
        pos += used
        limit = None
        if "top" in tokens[pos:]:
            t = tokens.index("top", pos)
            if t + 1 < len(tokens) and _is_number(tokens[t + 1]):
                limit = int(float(tokens[t + 1]))
        filters = _parse_trailing_filters(tokens, pos, index)
        if filters is None:
            return ()

        table, join = _plan_tables(index, [measure_col, dimension] + [a.column for a in filters])
        if table is None:
            return ()
        out = f"{measure_col}_{agg.value}"
        actions: list[Action] = [SelectTable(table)]
        actions += join
        if filters:
            actions.append(FilterRows(Predicate(tuple(filters))))
        actions += [
            AggregateRows((dimension,), (AggSpec(agg, measure_col),)),
            SortLimit((SortKey(out, descending=True),), limit),
            AddChartType(ChartType.BAR),
            AddData(),
            AddEncoding(Channel.X, EncodingSpec(dimension, default_scale(index.column_type(dimension)))),
            AddEncoding(Channel.Y, EncodingSpec(out, Scale.LINEAR)),
            AddParams(InteractionDecl(InteractionKind.SINGLE_SELECT, (Channel.X,))),
        ]
        facts = RequestFacts("rank", ChartType.BAR, (dimension, out))
        return (Proposal(tuple(actions), f"rank {dimension} by {agg.value}({measure_col})",
                         self._mode(has_interaction), facts),)

    def _parse_distribution(self, tokens, index, context, has_interaction):
        # show <dimension> distribution [as <chart>]
        if "distribution" not in tokens:
            return ()
        stop = tokens.index("distribution")
        head = [t for t in tokens[:stop] if t not in _STOPWORDS and t not in ("plot", "display")]
        if not head:
            return ()
        col = index.match_column(head, 0, max_span=len(head))
        if col is None or col[1] != len(head):
            return ()
        dimension = col[0]
        chart = _trailing_chart(tokens) or ChartType.BAR
        filters = _parse_trailing_filters(tokens, stop + 1, index)
        if filters is None:
            filters = []
        table, join = _plan_tables(index, [dimension] + [a.column for a in filters])
        if table is None:
            return ()
        actions: list[Action] = [SelectTable(table)]
        actions += join
        if filters:
            actions.append(FilterRows(Predicate(tuple(filters))))
        actions += [
            AddChartType(chart),
            AddData(),
            AddEncoding(Channel.X, EncodingSpec(dimension, default_scale(index.column_type(dimension)))),
            AddEncoding(Channel.Y, EncodingSpec(dimension, Scale.LINEAR, Aggregate.COUNT)),
            AddParams(InteractionDecl(InteractionKind.SINGLE_SELECT, (Channel.X,))),
        ]
        facts = RequestFacts("distribution", chart, (dimension,))
        return (Proposal(tuple(actions), f"count by {dimension}", self._mode(has_interaction), facts),)

    def _parse_pie_share(self, tokens, index, context, has_interaction):
        # percentage of <dimension> as pie [for ...]
        if "percentage" not in tokens and "share" not in tokens:
            return ()
        if "pie" not in tokens:
            return ()
        anchor = tokens.index("percentage") if "percentage" in tokens else tokens.index("share")
        tail = tokens[anchor + 1:]
        head: list[str] = []
        for t in tail:
            if t in ("for", "where", "with"):
                break
            if t not in _STOPWORDS and t not in ("as", "pie"):
                head.append(t)
        if not head:
            return ()
        col = index.match_column(head, 0, max_span=len(head))
        if col is None:
            return ()
        dimension = col[0]
        filters = _parse_trailing_filters(tail, 0, index)
        if filters is None:
            filters = []
        table, join = _plan_tables(index, [dimension] + [a.column for a in filters])
        if table is None:
            return ()
        actions: list[Action] = [SelectTable(table)]
        actions += join
        if filters:
            actions.append(FilterRows(Predicate(tuple(filters))))
        actions += [
            AddChartType(ChartType.PIE),
            AddData(),
            AddEncoding(Channel.THETA, EncodingSpec(dimension, Scale.LINEAR, Aggregate.COUNT)),
            AddEncoding(Channel.COLOR, EncodingSpec(dimension, Scale.ORDINAL)),
            AddParams(InteractionDecl(InteractionKind.SINGLE_SELECT, (Channel.COLOR,))),
        ]
        facts = RequestFacts("pie_share", ChartType.PIE, (dimension,))
        return (Proposal(tuple(actions), f"share of rows by {dimension}", self._mode(has_interaction), facts),)

    def _parse_list_rows(self, tokens, index, context, has_interaction):
        # list rows [by <column>] [for ...]
        if "rows" not in tokens or tokens[0] not in ("list", "show", "display"):
            return ()
        pos = tokens.index("rows") + 1
        label_column: str | None = None
        if pos < len(tokens) and tokens[pos] == "by":
            match = None
            if context.focus is not None:
                match = _match_among(tokens, pos + 1, context.focus.columns)
            if match is None:
                match = index.match_column(tokens, pos + 1)
            if match is None:
                return ()
            label_column, used = match
            pos += 1 + used
        filters = _parse_trailing_filters(tokens, pos, index)
        if filters is None:
            filters = []
        table: str | None = None
        join: list[Action] = []
        if has_interaction and context.focus is not None:
            if label_column is None:
                label_column = context.focus.columns[0]
        else:
            cols = [c for c in [label_column, *(a.column for a in filters)] if c]
            table, join = _plan_tables(index, cols) if cols else (sorted(index.schema)[0], [])
            if table is None:
                return ()
            if label_column is None:
                label_column = index.schema[table].columns[0].name
        actions: list[Action] = []
        if table is not None:
            actions.append(SelectTable(table))
            actions += join
        if filters:
            actions.append(FilterRows(Predicate(tuple(filters))))
        stype = index.column_type(label_column) if label_column in index.columns else SemanticType.NOMINAL
        actions += [
            AddChartType(ChartType.TABLE),
            AddData(),
            AddEncoding(Channel.ROW_LABEL, EncodingSpec(label_column, default_scale(stype))),
        ]
        facts = RequestFacts("list_rows", ChartType.TABLE, (), is_filter=True)
        return (Proposal(tuple(actions), "list matching rows", self._mode(has_interaction), facts),)

    def _parse_vs_scatter(self, tokens, index, context, has_interaction):
        # plot <y> vs <x>
        if "vs" not in tokens and "against" not in tokens:
            return ()
        sep = "vs" if "vs" in tokens else "against"
        pos = tokens.index(sep)
        head = [t for t in tokens[:pos] if t not in _STOPWORDS and t not in ("plot", "display")]
        y = index.match_column(head, 0, max_span=len(head)) if head else None
        if y is None or y[1] != len(head):
            return ()
        x = index.match_column(tokens, pos + 1)
        if x is None:
            return ()
        x_col, used = x
        filters = _parse_trailing_filters(tokens, pos + 1 + used, index)
        if filters is None:
            filters = []
        table, join = _plan_tables(index, [y[0], x_col] + [a.column for a in filters])
        if table is None:
            return ()
        actions: list[Action] = [SelectTable(table)]
        actions += join
        if filters:
            actions.append(FilterRows(Predicate(tuple(filters))))
        actions += [
            AddChartType(ChartType.SCATTER),
            AddData(),
            AddEncoding(Channel.X, EncodingSpec(x_col, Scale.LINEAR)),
            AddEncoding(Channel.Y, EncodingSpec(y[0], Scale.LINEAR)),
            AddParams(InteractionDecl(InteractionKind.INTERVAL_2D, (Channel.X, Channel.Y))),
        ]
        facts = RequestFacts("scatter_vs", ChartType.SCATTER, (x_col, y[0]))
        return (Proposal(tuple(actions), f"scatter {y[0]} vs {x_col}", self._mode(has_interaction), facts),)

    def _parse_plot(self, tokens, index, context, has_interaction):
        # plot <agg>? <measure> by <dimension> [for ...] [as <chart>]
        if tokens[0] not in ("plot", "show", "display", "graph") and "by" not in tokens:
            return ()
        if "by" not in tokens:
            return ()
        body = [t for t in tokens if t not in _STOPWORDS and t not in ("plot", "display", "graph")]
        if "by" not in body:
            return ()
        split = body.index("by")
        head, tail = body[:split], body[split + 1:]
        agg = None
        if head and head[0] in _AGG_WORDS:
            agg = _AGG_WORDS[head[0]]
            head = head[1:]
        if not head or not tail:
            return ()
        measure = index.match_column(head, 0, max_span=len(head))
        if measure is None or measure[1] != len(head):
            return ()
        dim = index.match_column(tail, 0)
        if dim is None:
            return ()
        dimension, used = dim
        filters = _parse_trailing_filters(tail, used, index)
        if filters is None:
            return ()
        chart = _trailing_chart(tokens)
        dim_type = index.column_type(dimension)
        if chart is None:
            if agg is None:
                chart = ChartType.SCATTER
            elif dim_type is SemanticType.QUANTITATIVE or dim_type is SemanticType.TEMPORAL:
                chart = ChartType.LINE
            else:
                chart = ChartType.BAR
        table, join = _plan_tables(index, [measure[0], dimension] + [a.column for a in filters])
        if table is None:
            return ()
        actions: list[Action] = [SelectTable(table)]
        actions += join
        if filters:
            actions.append(FilterRows(Predicate(tuple(filters))))
        brush_ok = dim_type in (SemanticType.QUANTITATIVE, SemanticType.TEMPORAL)
        actions += [
            AddChartType(chart),
            AddData(),
            AddEncoding(Channel.X, EncodingSpec(dimension, default_scale(dim_type))),
            AddEncoding(Channel.Y, EncodingSpec(measure[0], Scale.LINEAR, agg)),
            AddParams(InteractionDecl(
                InteractionKind.INTERVAL_1D if brush_ok else InteractionKind.SINGLE_SELECT,
                (Channel.X,),
            )),
        ]
        label = f"{agg.value}({measure[0]})" if agg else measure[0]
        facts = RequestFacts("plot", chart, (dimension, measure[0]))
        primary = Proposal(tuple(actions), f"{chart.value} of {label} by {dimension}",
                           self._mode(has_interaction), facts)
        # alternate chart flavor as a second-ranked candidate
        alt_type = ChartType.BAR if chart is not ChartType.BAR else ChartType.LINE
        alt_actions = tuple(
            AddChartType(alt_type) if isinstance(a, AddChartType) else a for a in actions
        )
        alternate = Proposal(alt_actions, f"{alt_type.value} variant", self._mode(has_interaction), facts)
        return (primary, alternate)


def _match_among(tokens: Sequence[str], start: int, columns: Sequence[str]) -> tuple[str, int] | None:
    """Greedy longest fuzzy match against an explicit column list (used for
    derived slice columns the catalog does not know)."""
    for span in range(min(4, len(tokens) - start), 0, -1):
        candidate = "_".join(tokens[start : start + span])
        for name in columns:
            if name.lower() == candidate or (len(candidate) > 3 and within_one_edit(name.lower(), candidate)):
                return name, span
    return None


def _trailing_chart(tokens: Sequence[str]) -> ChartType | None:
    if "as" in tokens:
        pos = len(tokens) - 1 - tokens[::-1].index("as")
        for t in tokens[pos + 1:]:
            if t in _CHART_WORDS:
                return _CHART_WORDS[t]
    return None


def _parse_trailing_filters(tokens: Sequence[str], start: int, index: SchemaIndex):
    """Parse `for|where <atom> (and <atom>)*`; returns [] when absent, None on
    a malformed filter clause."""
    pos = start
    while pos < len(tokens) and tokens[pos] not in ("for", "where", "with"):
        pos += 1
    if pos >= len(tokens):
        return []
    return _parse_filter_atoms(tokens[pos + 1:], index)


def _parse_filter_atoms(tokens: Sequence[str], index: SchemaIndex):
    atoms: list = []
    pos = 0
    tokens = [t for t in tokens if t not in ("is", "equals", "=")]
    while pos < len(tokens):
        if tokens[pos] == "and":
            pos += 1
            continue
        if tokens[pos] == "as":  # chart clause, not a filter
            break
        col = index.match_column(tokens, pos)
        if col is not None:
            column, used = col
            pos += used
            if pos < len(tokens) and tokens[pos] in ("between", "from"):
                closer = "and" if tokens[pos] == "between" else "to"
                if pos + 3 < len(tokens) + 1 and pos + 3 <= len(tokens) and tokens[pos + 2] == closer:
                    lo, hi = tokens[pos + 1], tokens[pos + 3]
                    if _is_number(lo) and _is_number(hi):
                        atoms.append(RangeAtom(column, float(lo), float(hi)))
                        pos += 4
                        continue
                return None
            if pos < len(tokens):
                if _is_number(tokens[pos]):
                    atoms.append(Membership(column, (float(tokens[pos]),)))
                    pos += 1
                    continue
                grounded = index.match_value(tokens, pos, column)
                if grounded is not None:
                    _, value, used = grounded
                    atoms.append(Membership(column, (value,)))
                    pos += used
                    continue
            return None
        grounded = index.match_value(tokens, pos)
        if grounded is not None:
            column, value, used = grounded
            atoms.append(Membership(column, (value,)))
            pos += used
            continue
        return None
    return atoms


def _plan_tables(index: SchemaIndex, columns: Sequence[str]) -> tuple[str | None, list[Action]]:
    """Pick a base table covering the columns, joining in a second table via
    a shared key when one table cannot cover them all."""
    columns = [c for c in columns if c]
    if not columns:
        return None, []
    candidates = sorted(index.schema)
    for table in candidates:
        names = {c.name for c in index.schema[table].columns}
        if all(c in names for c in columns):
            return table, []
    for base in candidates:
        base_names = {c.name for c in index.schema[base].columns}
        missing = [c for c in columns if c not in base_names]
        if not missing:
            return base, []
        for other in candidates:
            if other == base:
                continue
            other_names = {c.name for c in index.schema[other].columns}
            if all(c in other_names for c in missing):
                key = index.join_key(base, other)
                clash = (base_names & other_names) - {key}
                if key is not None and columns[0] in base_names and not clash:
                    return base, [JoinTables(other, key, key)]
    return None, []


# --- scripted backend (fault injection and tests) ---------------------------------------


class ScriptedBackend(IntentBackend):
    """Replays a fixed list of proposal batches; the loop's adversary."""

    name = "scripted"

    def __init__(
        self,
        batches: Sequence[Sequence[Proposal]],
        classification: QueryClass = QueryClass.LOW_LEVEL,
        repeat_last: bool = True,
    ):
        self._batches = [tuple(b) for b in batches]
        self._classification = classification
        self._repeat_last = repeat_last
        self.calls = 0

    def classify(self, text: str) -> QueryClass:
        return self._classification

    def propose(self, text, context, catalog_schema, has_interaction=False):
        i = self.calls
        self.calls += 1
        if i >= len(self._batches):
            if self._repeat_last and self._batches:
                return self._batches[-1]
            return ()
        return self._batches[i]


# --- HTTP chat-completion backend ----------------------------------------------------------

def literature_search(query: str) -> str:
    """Domain-corpus retrieval seam; no corpus ships with this build."""
    return "no corpus configured"


ENV_URL = "FIGSTATE_BACKEND_URL"
ENV_MODEL = "FIGSTATE_BACKEND_MODEL"
ENV_API_KEY = "FIGSTATE_BACKEND_API_KEY"
ENV_CONFIG = "FIGSTATE_BACKEND_CONFIG"


def _file_config() -> dict[str, str]:
    """Optional JSON config file ({"url", "model", "api_key"}); environment
    variables win over file values."""
    path = os.environ.get(ENV_CONFIG)
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise BackendUnavailable(f"cannot read backend config {path!r}: {exc}") from exc


class HttpChatBackend(IntentBackend):
    """Thin client over a chat-completion endpoint with structured-output
    prompts (see agent/prompts/). Optional: never required for tests or CLI."""

    name = "http"

    def __init__(
        self,
        url: str | None = None,
        model: str | None = None,
        api_key: str | None = None,
        timeout: float = 30.0,
    ):
        file_cfg = _file_config()
        self.url = url or os.environ.get(ENV_URL) or file_cfg.get("url")
        self.model = model or os.environ.get(ENV_MODEL) or file_cfg.get("model", "")
        self.api_key = api_key or os.environ.get(ENV_API_KEY) or file_cfg.get("api_key", "")
        self.timeout = timeout

    def _prompt(self, name: str) -> str:
        return resources.files("figstate.agent").joinpath(f"prompts/{name}.txt").read_text(encoding="utf-8")

    def render_plan_prompt(self, text: str, context: DataContext, catalog_schema: CatalogSchema) -> str:
        schema_desc = {
            table: [[c.name, c.stype.value] for c in info.columns]
            for table, info in sorted(catalog_schema.items())
        }
        return self._prompt("plan").format(
            question=text,
            schema=json.dumps(schema_desc, indent=2),
            context=json.dumps(context.to_jsonable(), indent=2),
        )

    def _complete(self, prompt: str) -> str:
        if not self.url:
            raise BackendUnavailable(f"no chat endpoint configured (set {ENV_URL})")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = httpx.post(
                self.url,
                json={
                    "model": self.model,
                    "messages": [{"role": "user", "content": prompt}],
                    "temperature": 0,
                },
                headers=headers,
                timeout=self.timeout,
            )
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise BackendUnavailable(f"chat endpoint failed: {exc}") from exc
        payload = response.json()
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailable(f"malformed completion payload: {exc}") from exc

    def classify(self, text: str) -> QueryClass:
        content = self._complete(self._prompt("triage").format(question=text)).strip().lower()
        for qc in QueryClass:
            if qc.value in content:
                return qc
        return QueryClass.LOW_LEVEL

    def propose(self, text, context, catalog_schema, has_interaction=False):
        content = self._complete(self.render_plan_prompt(text, context, catalog_schema))
        return (self.parse_plan_reply(content, has_interaction),)

    @staticmethod
    def parse_plan_reply(content: str, has_interaction: bool = False) -> Proposal:
        """Parse the structured JSON reply: {"actions": [...], "rationale": str,
        "mode": str}. Raises BackendUnavailable on malformed output."""
        try:
            payload = json.loads(_extract_json(content))
            actions = tuple(action_from_jsonable(a) for a in payload["actions"])
            mode = payload.get("mode") or ("extend" if has_interaction else "generate")
            return Proposal(actions, payload.get("rationale", ""), mode, None)
        except Exception as exc:
            raise BackendUnavailable(f"cannot parse plan reply: {exc}") from exc

    def score(self, summary: Mapping[str, Any]) -> float | None:
        content = self._complete(self._prompt("evaluate").format(summary=json.dumps(summary)))
        try:
            value = float(json.loads(_extract_json(content)).get("score", 0.0))
        except Exception:
            return None
        return max(0.0, min(1.0, value))


def _extract_json(content: str) -> str:
    start = content.find("{")
    alt = content.find("[")
    if alt != -1 and (start == -1 or alt < start):
        start = alt
    if start == -1:
        raise ValueError("no JSON object in reply")
    return content[start:]


def make_backend(name: str, synonyms: Mapping[str, str] | None = None) -> IntentBackend:
    if name == "deterministic":
        return TemplateBackend(synonyms=synonyms or {})
    if name == "http":
        return HttpChatBackend()
    raise KeyError(f"unknown backend {name!r}")
