"""Test-case and metrics records for the mapping-fidelity suite.

Suite files are JSON lines, one case per line (schema documented in
docs/suite-format.md). Oracle digests are computed by the reference
evaluator at generation time, never by the engine under test.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

from figstate.compiler.actions import Action, action_from_jsonable, action_to_jsonable

PHASES = ("initial", "followup", "coordination")


@dataclass(frozen=True)
class GestureSpec:
    """Scripted gesture parameters, resolvable against the produced figure.

    Clicks name marks by channel values (the generator cannot know mark ids
    ahead of time); brushes carry bounds directly.
    """

    kind: str  # click | brush1d | brush2d
    channel: str | None = None
    lo: Any = None
    hi: Any = None
    x_lo: Any = None
    x_hi: Any = None
    y_lo: Any = None
    y_hi: Any = None
    click_values: tuple[Mapping[str, Any], ...] = ()

    def to_jsonable(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "channel": self.channel,
            "lo": self.lo, "hi": self.hi,
            "x_lo": self.x_lo, "x_hi": self.x_hi,
            "y_lo": self.y_lo, "y_hi": self.y_hi,
            "click_values": [dict(v) for v in self.click_values],
        }

    @staticmethod
    def from_jsonable(payload: Mapping[str, Any]) -> "GestureSpec":
        return GestureSpec(
            kind=payload["kind"],
            channel=payload.get("channel"),
            lo=payload.get("lo"), hi=payload.get("hi"),
            x_lo=payload.get("x_lo"), x_hi=payload.get("x_hi"),
            y_lo=payload.get("y_lo"), y_hi=payload.get("y_hi"),
            click_values=tuple(payload.get("click_values", ())),
        )


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # keep pytest from collecting the domain type

    case_id: str
    tier: int
    figure_type: str
    interaction_type: str  # single_mark | interval_1d | interval_2d
    initial_question: str
    initial_oracle_query: str
    initial_oracle_digest: str
    initial_oracle_actions: tuple[Action, ...]
    followup_question: str
    followup_gesture: GestureSpec
    followup_oracle_digest: str
    followup_oracle_actions: tuple[Action, ...]
    coordination_gesture: GestureSpec | None = None
    coordination_oracle_digest: str | None = None
    coordination_oracle_actions: tuple[Action, ...] = ()

    def to_jsonable(self) -> dict[str, Any]:
        return {
            "case_id": self.case_id,
            "tier": self.tier,
            "figure_type": self.figure_type,
            "interaction_type": self.interaction_type,
            "initial": {
                "question": self.initial_question,
                "oracle_query": self.initial_oracle_query,
                "oracle_digest": self.initial_oracle_digest,
                "oracle_actions": [action_to_jsonable(a) for a in self.initial_oracle_actions],
            },
            "followup": {
                "question": self.followup_question,
                "gesture": self.followup_gesture.to_jsonable(),
                "oracle_digest": self.followup_oracle_digest,
                "oracle_actions": [action_to_jsonable(a) for a in self.followup_oracle_actions],
            },
            "coordination": None if self.coordination_gesture is None else {
                "gesture": self.coordination_gesture.to_jsonable(),
                "oracle_digest": self.coordination_oracle_digest,
                "oracle_actions": [action_to_jsonable(a) for a in self.coordination_oracle_actions],
            },
        }

    @staticmethod
    def from_jsonable(payload: Mapping[str, Any]) -> "TestCase":
        coordination = payload.get("coordination")
        return TestCase(
            case_id=payload["case_id"],
            tier=int(payload["tier"]),
            figure_type=payload["figure_type"],
            interaction_type=payload["interaction_type"],
            initial_question=payload["initial"]["question"],
            initial_oracle_query=payload["initial"].get("oracle_query", ""),
            initial_oracle_digest=payload["initial"]["oracle_digest"],
            initial_oracle_actions=tuple(
                action_from_jsonable(a) for a in payload["initial"].get("oracle_actions", ())
            ),
            followup_question=payload["followup"]["question"],
            followup_gesture=GestureSpec.from_jsonable(payload["followup"]["gesture"]),
            followup_oracle_digest=payload["followup"]["oracle_digest"],
            followup_oracle_actions=tuple(
                action_from_jsonable(a) for a in payload["followup"].get("oracle_actions", ())
            ),
            coordination_gesture=(
                GestureSpec.from_jsonable(coordination["gesture"]) if coordination else None
            ),
            coordination_oracle_digest=coordination["oracle_digest"] if coordination else None,
            coordination_oracle_actions=tuple(
                action_from_jsonable(a) for a in coordination.get("oracle_actions", ())
            ) if coordination else (),
        )


def save_suite(cases: Iterable[TestCase], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for case in cases:
            fh.write(json.dumps(case.to_jsonable(), sort_keys=True) + "\n")


def load_suite(path: str | Path) -> list[TestCase]:
    cases = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                cases.append(TestCase.from_jsonable(json.loads(line)))
    return cases


@dataclass(frozen=True)
class PhaseResult:
    executed: bool
    correct: bool
    error: str = ""


@dataclass(frozen=True)
class CaseResult:
    case_id: str
    tier: int
    figure_type: str
    interaction_type: str
    phases: Mapping[str, PhaseResult]


@dataclass(frozen=True)
class MetricCell:
    attempts: int = 0
    executed: int = 0
    correct: int = 0

    def execution_success_rate(self) -> float | None:
        return self.executed / self.attempts if self.attempts else None

    def conditional_accuracy(self) -> float | None:
        return self.correct / self.executed if self.executed else None

    def end_to_end_accuracy(self) -> float | None:
        return self.correct / self.attempts if self.attempts else None

    def add(self, result: PhaseResult) -> "MetricCell":
        return MetricCell(
            self.attempts + 1,
            self.executed + (1 if result.executed else 0),
            self.correct + (1 if result.executed and result.correct else 0),
        )

    def to_jsonable(self) -> dict[str, Any]:
        return {
            "attempts": self.attempts,
            "execution_success_rate": self.execution_success_rate(),
            "conditional_accuracy": self.conditional_accuracy(),
            "end_to_end_accuracy": self.end_to_end_accuracy(),
        }


@dataclass
class SuiteMetrics:
    overall: MetricCell = field(default_factory=MetricCell)
    by_tier: dict[str, MetricCell] = field(default_factory=dict)
    by_figure_type: dict[str, MetricCell] = field(default_factory=dict)
    by_interaction: dict[str, MetricCell] = field(default_factory=dict)
    by_phase: dict[str, MetricCell] = field(default_factory=dict)

    @staticmethod
    def from_results(results: Iterable[CaseResult]) -> "SuiteMetrics":
        metrics = SuiteMetrics()
        for result in results:
            for phase, outcome in result.phases.items():
                metrics.overall = metrics.overall.add(outcome)
                metrics.by_tier[str(result.tier)] = metrics.by_tier.get(str(result.tier), MetricCell()).add(outcome)
                metrics.by_figure_type[result.figure_type] = metrics.by_figure_type.get(
                    result.figure_type, MetricCell()).add(outcome)
                metrics.by_interaction[result.interaction_type] = metrics.by_interaction.get(
                    result.interaction_type, MetricCell()).add(outcome)
                metrics.by_phase[phase] = metrics.by_phase.get(phase, MetricCell()).add(outcome)
        return metrics

    def to_jsonable(self) -> dict[str, Any]:
        return {
            "overall": self.overall.to_jsonable(),
            "by_tier": {k: v.to_jsonable() for k, v in sorted(self.by_tier.items())},
            "by_figure_type": {k: v.to_jsonable() for k, v in sorted(self.by_figure_type.items())},
            "by_interaction": {k: v.to_jsonable() for k, v in sorted(self.by_interaction.items())},
            "by_phase": {k: v.to_jsonable() for k, v in sorted(self.by_phase.items())},
        }

    def table(self) -> str:
        def fmt(v: float | None) -> str:
            return "n/a" if v is None else f"{v * 100:6.1f}%"

        lines = [f"{'stratum':<28} {'n':>4} {'success':>8} {'conditional':>12} {'end-to-end':>11}"]

        def row(label: str, cell: MetricCell) -> str:
            return (f"{label:<28} {cell.attempts:>4} {fmt(cell.execution_success_rate()):>8} "
                    f"{fmt(cell.conditional_accuracy()):>12} {fmt(cell.end_to_end_accuracy()):>11}")

        lines.append(row("overall", self.overall))
        for name, group in (("tier", self.by_tier), ("figure", self.by_figure_type),
                            ("interaction", self.by_interaction), ("phase", self.by_phase)):
            for key, cell in sorted(group.items()):
                lines.append(row(f"{name}:{key}", cell))
        return "\n".join(lines)
