"""Figure states: the four-part tuple of chart, program, data, and metadata.

A figure is fully described by what it shows (ChartDoc), how it was made
(ProvenanceProgram), what it shows it of (DataSlice), and where it sits in
the exploration history (FigureMeta). Version ids are content hashes over
everything except timestamps, so identical states dedupe and ids are stable
across machines.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Any

from figstate.compiler.actions import ProvenanceProgram, program_from_jsonable, program_to_jsonable
from figstate.errors import ValidationFailed
from figstate.model.charts import ChartDoc, MarkMap, chart_from_jsonable, chart_to_jsonable, validate_chart_doc
from figstate.model.slices import DataSlice


class Operation(str, Enum):
    GENERATE = "generate"
    MANIPULATE = "manipulate"
    EXTEND = "extend"
    COORDINATE_UPDATE = "coordinate_update"


@dataclass(frozen=True)
class FigureMeta:
    created_at: str
    version_id: str
    parent_version: str | None
    operation: Operation
    operation_description: str
    artifact_id: str


@dataclass(frozen=True)
class FigureState:
    figure_id: str
    visualization: ChartDoc
    code: ProvenanceProgram
    data: DataSlice
    meta: FigureMeta


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def content_jsonable(figure_id: str, chart: ChartDoc, code: ProvenanceProgram, data: DataSlice) -> dict[str, Any]:
    """The hash-relevant content of a figure: everything except metadata."""
    return {
        "figure_id": figure_id,
        "visualization": chart_to_jsonable(chart),
        "code": program_to_jsonable(code),
        "data": data.to_jsonable(),
    }


def figure_content_id(fig: "FigureState") -> str:
    """Parent-independent content hash; two versions with this id equal are
    the same state regardless of how they were reached (dedupe key)."""
    payload = json.dumps(
        content_jsonable(fig.figure_id, fig.visualization, fig.code, fig.data),
        sort_keys=True, separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:20]


def figure_version_id(
    figure_id: str,
    chart: ChartDoc,
    code: ProvenanceProgram,
    data: DataSlice,
    parent_version: str | None = None,
) -> str:
    """Content hash over state + parent. Including the parent keeps version
    chains honest: revisiting an earlier content is a new version, while an
    identical commit on the same parent maps to the same id."""
    body = content_jsonable(figure_id, chart, code, data)
    body["parent_version"] = parent_version
    payload = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return "fv-" + hashlib.sha256(payload.encode("utf-8")).hexdigest()[:20]


def make_figure(
    figure_id: str,
    chart: ChartDoc,
    code: ProvenanceProgram,
    data: DataSlice,
    artifact_id: str,
    operation: Operation,
    description: str,
    parent_version: str | None = None,
    created_at: str | None = None,
) -> FigureState:
    meta = FigureMeta(
        created_at=created_at or now_iso(),
        version_id=figure_version_id(figure_id, chart, code, data, parent_version),
        parent_version=parent_version,
        operation=operation,
        operation_description=description,
        artifact_id=artifact_id,
    )
    return FigureState(figure_id, chart, code, data, meta)


def mark_map_for(fig: FigureState) -> MarkMap:
    """Derive the mark-to-rows mapping from the figure's own marks."""
    return MarkMap(
        figure_id=fig.figure_id,
        entries={m.mark_id: m.row_keys for m in fig.visualization.marks},
        bindings={ch: (spec.field, spec.scale) for ch, spec in fig.visualization.encodings.items()},
    )


def validate_figure(fig: FigureState) -> None:
    """Check the cross-leg invariants; raises ValidationFailed on breach."""
    validate_chart_doc(fig.visualization, fig.data.schema)
    fig.code.check()
    covered: set[str] = set()
    for mark in fig.visualization.marks:
        if not mark.row_keys:
            raise ValidationFailed(f"mark {mark.mark_id} maps to no rows")
        covered |= mark.row_keys
    all_keys = fig.data.row_keys()
    if covered != all_keys:
        missing = sorted(all_keys - covered)[:3]
        extra = sorted(covered - all_keys)[:3]
        raise ValidationFailed(f"mark coverage mismatch (missing {missing}, extra {extra})")
    expected = figure_version_id(
        fig.figure_id, fig.visualization, fig.code, fig.data, fig.meta.parent_version
    )
    if fig.meta.version_id != expected:
        raise ValidationFailed(f"figure {fig.figure_id} version id does not match its content")


def structurally_equal(a: ChartDoc, b: ChartDoc) -> bool:
    """ChartDoc equality; timestamps live in FigureMeta so plain dataclass
    equality is already timestamp-free."""
    return a == b


def figure_to_jsonable(fig: FigureState) -> dict[str, Any]:
    return {
        "figure_id": fig.figure_id,
        "visualization": chart_to_jsonable(fig.visualization),
        "code": program_to_jsonable(fig.code),
        "data": fig.data.to_jsonable(),
        "meta": {
            "created_at": fig.meta.created_at,
            "version_id": fig.meta.version_id,
            "parent_version": fig.meta.parent_version,
            "operation": fig.meta.operation.value,
            "operation_description": fig.meta.operation_description,
            "artifact_id": fig.meta.artifact_id,
        },
    }


def figure_from_jsonable(payload: dict[str, Any]) -> FigureState:
    meta = payload["meta"]
    return FigureState(
        figure_id=payload["figure_id"],
        visualization=chart_from_jsonable(payload["visualization"]),
        code=program_from_jsonable(payload["code"]),
        data=DataSlice.from_jsonable(payload["data"]),
        meta=FigureMeta(
            created_at=meta["created_at"],
            version_id=meta["version_id"],
            parent_version=meta.get("parent_version"),
            operation=Operation(meta["operation"]),
            operation_description=meta.get("operation_description", ""),
            artifact_id=meta["artifact_id"],
        ),
    )


def with_meta(fig: FigureState, **changes: Any) -> FigureState:
    return replace(fig, meta=replace(fig.meta, **changes))
