"""Bounded structured context carried between loop rounds.

Stores only the essentials of each executed step (objective, status, result
summary, score, rationale, remaining plan) plus a conversation tail and the
active figure's shape, so backends stay stateless between calls.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Mapping

from figstate.model.figures import FigureState


@dataclass(frozen=True)
class StepRecord:
    figure_id: str
    step_index: int
    objective: str
    status: str  # ok | failed
    result_summary: str
    score: float
    rationale: str
    remaining: str = ""


@dataclass(frozen=True)
class FigureSummary:
    """Enough of a figure for a backend to plan against: its shape, not its data."""

    figure_id: str
    chart_type: str
    encodings: Mapping[str, str]  # channel -> column
    columns: tuple[str, ...]
    source_tables: tuple[str, ...]
    row_count: int

    @staticmethod
    def of(fig: FigureState) -> "FigureSummary":
        return FigureSummary(
            figure_id=fig.figure_id,
            chart_type=fig.visualization.chart_type.value,
            encodings={ch.value: spec.field for ch, spec in fig.visualization.encodings.items()},
            columns=fig.data.column_names(),
            source_tables=fig.data.lineage.source_tables,
            row_count=len(fig.data.rows),
        )


@dataclass(frozen=True)
class DataContext:
    records: tuple[StepRecord, ...] = ()
    conversation_tail: tuple[str, ...] = ()
    active_artifact: str | None = None
    active_figures: tuple[str, ...] = ()
    focus: FigureSummary | None = None
    max_records: int = 32
    max_tail: int = 8

    def with_record(self, record: StepRecord) -> "DataContext":
        records = list(self.records) + [record]
        if len(records) > self.max_records:
            records = _evict(records, self.max_records)
        return replace(self, records=tuple(records))

    def with_message(self, text: str) -> "DataContext":
        tail = (list(self.conversation_tail) + [text])[-self.max_tail:]
        return replace(self, conversation_tail=tuple(tail))

    def with_focus(self, fig: FigureState, artifact_id: str | None = None) -> "DataContext":
        figures = list(self.active_figures)
        if fig.figure_id not in figures:
            figures.append(fig.figure_id)
        return replace(
            self,
            focus=FigureSummary.of(fig),
            active_figures=tuple(figures),
            active_artifact=artifact_id or self.active_artifact,
        )

    def to_jsonable(self) -> dict[str, Any]:
        return {
            "records": [vars(r) for r in self.records],
            "conversation_tail": list(self.conversation_tail),
            "active_artifact": self.active_artifact,
            "active_figures": list(self.active_figures),
            "focus": vars(self.focus) if self.focus else None,
        }


def _evict(records: list[StepRecord], keep: int) -> list[StepRecord]:
    """Oldest low-salience first; failures and low scores carry replanning
    signal, so they outlive routine successes of the same age."""
    def salience(r: StepRecord) -> int:
        return 0 if (r.status == "ok" and r.score >= 0.7) else 1

    doomed = len(records) - keep
    out: list[StepRecord] = []
    skipped = 0
    for r in records:
        if skipped < doomed and salience(r) == 0:
            skipped += 1
            continue
        out.append(r)
    # still over budget: drop oldest regardless of salience
    return out[len(out) - keep:] if len(out) > keep else out
