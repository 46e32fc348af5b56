"""HTTP service: sessions, streamed messages, gestures, bundles, replay.

Transport is HTTP/1.1 with server-sent events for progress: one request,
many `event:`/`data:` frames with dense increasing ids, exactly one terminal
done or error frame. Only action-level events are streamed, never raw
planner reasoning.
"""

from __future__ import annotations

import json
import queue
import tempfile
import threading
from pathlib import Path
from typing import Any, Iterator

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from figstate.compiler.interactions import InteractionEvent
from figstate.errors import (
    BundleFormatError,
    EmptySelection,
    FigstateError,
    InteractionError,
    MissingSourceTable,
    UnknownVersion,
    ValidationFailed,
)
from figstate.runtime import InFlight, Runtime, StreamEvent

API_PREFIX = "/api/v1"
_QUEUE_SIZE = 256  # bounded: the loop blocks rather than buffering unboundedly


class SessionBody(BaseModel):
    backend: str | None = None
    budget: int | None = None
    session_id: str | None = None


class InteractionBody(BaseModel):
    figure_id: str
    kind: str
    mark_ids: list[str] | None = None
    channel: str | None = None
    lo: Any = None
    hi: Any = None
    x_lo: Any = None
    x_hi: Any = None
    y_lo: Any = None
    y_hi: Any = None


class MessageBody(BaseModel):
    text: str | None = None
    interaction: InteractionBody | None = None
    target_figure: str | None = None


class GestureBody(BaseModel):
    kind: str
    mark_ids: list[str] | None = None
    channel: str | None = None
    lo: Any = None
    hi: Any = None
    x_lo: Any = None
    x_hi: Any = None
    y_lo: Any = None
    y_hi: Any = None


def _event_payload(body: InteractionBody | GestureBody, figure_id: str) -> InteractionEvent:
    data = body.model_dump()
    data["figure_id"] = figure_id
    data["mark_ids"] = data.get("mark_ids") or []
    try:
        return InteractionEvent.from_jsonable(data)
    except (KeyError, ValueError) as exc:
        raise ValidationFailed(f"malformed interaction: {exc}") from exc


def _sse_frame(event: StreamEvent) -> str:
    payload = json.dumps(event.to_jsonable(), sort_keys=True)
    return f"id: {event.sequence}\nevent: {event.kind}\ndata: {payload}\n\n"


def _stream(work) -> Iterator[str]:
    """Run `work(on_event)` on a worker thread, yielding SSE frames as they
    arrive. The queue is bounded, so a slow reader backpressures the loop."""
    frames: queue.Queue = queue.Queue(maxsize=_QUEUE_SIZE)
    DONE = object()

    def on_event(event: StreamEvent) -> None:
        frames.put(event)

    def runner() -> None:
        try:
            work(on_event)
        except FigstateError as exc:
            # usually already surfaced by the runtime; keep exactly one
            # terminal frame either way
            frames.put(StreamEvent("error", {"message": str(exc)}, -1))
        except Exception as exc:  # defensive: never hang the stream
            frames.put(StreamEvent("error", {"message": str(exc)}, -1))
        finally:
            frames.put(DONE)

    thread = threading.Thread(target=runner, daemon=True)
    thread.start()
    emitted_terminal = False
    sequence = 0
    while True:
        item = frames.get()
        if item is DONE:
            break
        event: StreamEvent = item
        if event.sequence < 0:
            event = StreamEvent(event.kind, event.payload, sequence)
        sequence = event.sequence + 1
        if event.kind in ("done", "error"):
            if emitted_terminal:
                continue
            emitted_terminal = True
        yield _sse_frame(event)
    thread.join()


def create_app(runtime: Runtime, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="figstate", version="0.1.0",
                  description="Provenance-carrying interactive figures over a versioned artifact ledger.")

    @app.exception_handler(FigstateError)
    async def figstate_error(request: Request, exc: FigstateError) -> JSONResponse:
        status = 500
        if isinstance(exc, InFlight):
            status = 409
        elif isinstance(exc, (ValidationFailed, InteractionError, EmptySelection)):
            status = 422
        elif isinstance(exc, (UnknownVersion, MissingSourceTable)):
            status = 404
        elif isinstance(exc, BundleFormatError):
            status = 400
        return JSONResponse(status_code=status, content={"error": str(exc)})

    @app.exception_handler(KeyError)
    async def missing(request: Request, exc: KeyError) -> JSONResponse:
        return JSONResponse(status_code=404, content={"error": f"not found: {exc}"})

    @app.post(API_PREFIX + "/sessions")
    def create_session(body: SessionBody) -> dict[str, Any]:
        try:
            session = runtime.create_session(body.backend, body.session_id, body.budget)
        except KeyError as exc:
            return JSONResponse(status_code=400, content={"error": f"unknown backend {exc}"})
        return {"session_id": session.session_id, "backend": session.backend_name}

    @app.get(API_PREFIX + "/sessions/{session_id}")
    def get_session(session_id: str) -> dict[str, Any]:
        session = runtime.get_session(session_id)
        artifacts = [a for a in runtime.ledger.artifacts.values()
                     if a.artifact_id.startswith(session_id + "/")]
        return {
            "session_id": session.session_id,
            "backend": session.backend_name,
            "active_artifact": session.active_artifact,
            "artifacts": [
                {
                    "artifact_id": a.artifact_id,
                    "figure_ids": list(a.figure_ids),
                    "head_version": a.head_version,
                    "coordination_edges": list(a.coordination_edges),
                }
                for a in artifacts
            ],
            "messages": [
                {"message_id": m.message_id, "seq": m.seq, "text": m.text}
                for m in runtime.ledger.messages_for(session_id)
            ],
        }

    @app.post(API_PREFIX + "/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageBody) -> StreamingResponse:
        session = runtime.get_session(session_id)  # 404 before the stream starts
        if session.lock.locked():
            raise InFlight(f"session {session_id} already has a request in flight")
        interaction = None
        if body.interaction is not None:
            interaction = _event_payload(body.interaction, body.interaction.figure_id)
            interaction.check()

        def work(on_event) -> None:
            runtime.post_message(
                session_id,
                text=body.text,
                interaction=interaction,
                target_figure=body.target_figure,
                on_event=on_event,
            )

        return StreamingResponse(_stream(work), media_type="text/event-stream",
                                 headers={"Cache-Control": "no-cache"})

    @app.post(API_PREFIX + "/figures/{figure_id:path}/gestures")
    def post_gesture(figure_id: str, body: GestureBody) -> StreamingResponse:
        ev = _event_payload(body, figure_id)
        ev.check()
        if runtime.ledger.find_figure(figure_id) is None:
            raise KeyError(figure_id)

        def work(on_event) -> None:
            runtime.post_gesture(figure_id, ev, on_event=on_event)

        return StreamingResponse(_stream(work), media_type="text/event-stream",
                                 headers={"Cache-Control": "no-cache"})

    @app.get(API_PREFIX + "/figures/{figure_id:path}/bundle")
    def figure_bundle(figure_id: str) -> dict[str, Any]:
        return runtime.figure_bundle(figure_id)

    @app.get(API_PREFIX + "/artifacts/{artifact_id:path}/versions")
    def artifact_versions(artifact_id: str) -> dict[str, Any]:
        artifact = runtime.ledger.artifact(artifact_id)
        nodes = sorted(runtime.ledger.versions_of(artifact_id), key=lambda n: n.created_at)
        return {
            "artifact_id": artifact_id,
            "head_version": artifact.head_version,
            "versions": [
                {
                    "version_id": n.version_id,
                    "parent": n.parent,
                    "created_at": n.created_at,
                    "figure_ids": list(n.snapshot.figure_ids()),
                    "trigger_text": n.trigger.raw_text,
                }
                for n in nodes
            ],
        }

    @app.post(API_PREFIX + "/artifacts/{artifact_id:path}/replay")
    def replay_artifact(artifact_id: str) -> dict[str, Any]:
        report = runtime.replay(artifact_id)
        return {
            "version_id": report.version_id,
            "all_match": report.all_match(),
            "acceptable": report.acceptable(),
            "figures": [
                {
                    "figure_id": r.figure_id,
                    "digest_match": r.digest_match,
                    "chart_match": r.chart_match,
                    "declared_nondeterministic": r.declared_nondeterministic,
                    "notes": list(r.notes),
                }
                for r in report.results
            ],
        }

    @app.get(API_PREFIX + "/artifacts/{artifact_id:path}/export")
    def export_artifact(artifact_id: str) -> Response:
        with tempfile.TemporaryDirectory() as tmp:
            path = runtime.export_artifact(artifact_id, Path(tmp) / "artifact.zip")
            data = path.read_bytes()
        return Response(content=data, media_type="application/zip")

    @app.post(API_PREFIX + "/artifacts/import")
    async def import_artifact(request: Request) -> dict[str, Any]:
        body = await request.body()
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "import.zip"
            path.write_bytes(body)
            artifact_id = runtime.import_artifact(path)
        return {"artifact_id": artifact_id}

    if static_dir is not None and Path(static_dir).exists():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
