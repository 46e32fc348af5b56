"""Session runtime: the glue between loop, ledger, and coordination.

One Runtime owns a catalog and a version ledger, serializes requests per
session, and guarantees crash consistency: a request that fails mid-loop
leaves the ledger exactly at its pre-request version, because commits only
happen after the loop (and all propagation) succeeded.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Mapping

from figstate.agent.backends import IntentBackend, make_backend
from figstate.agent.context import DataContext
from figstate.agent.loop import LoopConfig, Route, TraceEvent, run_loop, triage
from figstate.compiler.actions import ActionKind
from figstate.compiler.interactions import InteractionEvent, interaction_to_predicate
from figstate.compiler.predicates import predicate_to_jsonable
from figstate.coordination import (
    propagate,
    propagation_order,
    record_schema,
    refresh_target,
)
from figstate.engine.catalog import TableCatalog
from figstate.errors import EmptySelection, FigstateError, UnknownVersion
from figstate.ledger.bundle import export_bundle, import_bundle
from figstate.ledger.store import save_ledger
from figstate.ledger.versions import (
    ArtifactSnapshot,
    Conversation,
    Message,
    ReplayReport,
    UserInputRecord,
    VersionLedger,
)
from figstate.model.charts import chart_to_jsonable, to_chart_grammar
from figstate.model.figures import FigureState, mark_map_for, now_iso
from figstate.compiler.actions import program_to_jsonable

#: stream event kinds, in contract order
STREAM_KINDS = ("action_selected", "action_result", "evaluation", "figure_ready", "error", "done")


@dataclass(frozen=True)
class StreamEvent:
    kind: str
    payload: Mapping[str, Any]
    sequence: int

    def to_jsonable(self) -> dict[str, Any]:
        return {"kind": self.kind, "payload": dict(self.payload), "sequence": self.sequence}


class InFlight(FigstateError):
    """A streamed request is already running on this session."""


@dataclass
class Session:
    session_id: str
    backend_name: str
    backend: IntentBackend
    loop_config: LoopConfig
    context: DataContext = field(default_factory=DataContext)
    active_artifact: str | None = None
    artifact_count: int = 0
    message_seq: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)


@dataclass
class MessageOutcome:
    message_id: str
    route: str
    artifact_id: str | None = None
    version_id: str | None = None
    figure_ids: tuple[str, ...] = ()
    sub_questions: tuple[str, ...] = ()
    suggestions: tuple[str, ...] = ()
    insight: str = ""


@dataclass
class GestureOutcome:
    figure_id: str
    predicate: dict[str, Any]
    updated_figures: tuple[str, ...] = ()
    version_id: str | None = None
    note: str = ""


class Runtime:
    def __init__(
        self,
        catalog: TableCatalog,
        ledger: VersionLedger | None = None,
        *,
        default_backend: str = "deterministic",
        synonyms: Mapping[str, str] | None = None,
        loop_config: LoopConfig = LoopConfig(),
        ledger_path: str | Path | None = None,
    ):
        self.catalog = catalog
        self.ledger = ledger or VersionLedger()
        self.default_backend = default_backend
        self.synonyms = dict(synonyms or {})
        self.loop_config = loop_config
        self.ledger_path = Path(ledger_path) if ledger_path else None
        self.sessions: dict[str, Session] = {}
        self._commit_lock = threading.Lock()

    # -- session management -------------------------------------------------------

    def create_session(
        self,
        backend: str | None = None,
        session_id: str | None = None,
        budget: int | None = None,
    ) -> Session:
        name = backend or self.default_backend
        instance = make_backend(name, synonyms=self.synonyms)  # KeyError -> 400 upstream
        sid = session_id or uuid.uuid4().hex[:12]
        config = self.loop_config if budget is None else replace(self.loop_config, budget=budget)
        session = Session(session_id=sid, backend_name=name, backend=instance, loop_config=config)
        self.sessions[sid] = session
        self.ledger.add_conversation(Conversation(sid, now_iso(), backend=name))
        self._persist()
        return session

    def get_session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise KeyError(session_id)
        return session

    # -- message handling ---------------------------------------------------------------

    def post_message(
        self,
        session_id: str,
        text: str | None = None,
        interaction: InteractionEvent | None = None,
        target_figure: str | None = None,
        on_event: Callable[[StreamEvent], None] | None = None,
    ) -> MessageOutcome:
        session = self.get_session(session_id)
        if not session.lock.acquire(blocking=False):
            raise InFlight(f"session {session_id} already has a request in flight")
        try:
            return self._handle_message(session, text, interaction, target_figure, on_event)
        finally:
            session.lock.release()

    def _emitter(self, on_event):
        counter = [0]

        def emit(kind: str, **payload: Any) -> StreamEvent:
            event = StreamEvent(kind, payload, counter[0])
            counter[0] += 1
            if on_event is not None:
                on_event(event)
            return event

        return emit

    def _handle_message(self, session, text, interaction, target_figure, on_event) -> MessageOutcome:
        emit = self._emitter(on_event)
        message_id = f"{session.session_id}/m{session.message_seq}"
        trigger = UserInputRecord(input_id=message_id, raw_text=text, interaction=interaction)
        trigger.check()

        source_artifact: str | None = None
        figures: dict[str, FigureState] = {}
        if interaction is not None:
            interaction.check()
            located = self.ledger.find_figure(interaction.figure_id)
            if located is None:
                raise KeyError(interaction.figure_id)
            source_artifact = located[0]
        if target_figure is not None:
            located = self.ledger.find_figure(target_figure)
            if located is None:
                raise KeyError(target_figure)
            source_artifact = source_artifact or located[0]
        if source_artifact is None:
            source_artifact = session.active_artifact
        head_snapshot: ArtifactSnapshot | None = None
        if source_artifact is not None and source_artifact in self.ledger.artifacts:
            head_snapshot = self.ledger.checkout(self.ledger.artifact(source_artifact).head_version)
            figures = {f.figure_id: f for f in head_snapshot.figures}

        try:
            routed = triage(text, session.context, session.backend, self.catalog.schema_map(),
                            has_interaction=interaction is not None)
            if routed.route is Route.DECOMPOSE:
                emit("done", route="decompose", sub_questions=list(routed.sub_questions))
                self._record_message(session, message_id, text or "", interaction, ())
                return MessageOutcome(message_id, "decompose", sub_questions=routed.sub_questions)
            if routed.route is Route.RECOMMEND:
                emit("done", route="recommend", suggestions=list(routed.suggestions))
                self._record_message(session, message_id, text or "", interaction, ())
                return MessageOutcome(message_id, "recommend", suggestions=routed.suggestions)

            # Extensions and manipulations stay in the source figure's
            # artifact; fresh generations open a new one. The loop decides
            # the mode, so new figure ids are minted against the artifact a
            # gesture would extend, falling back to the next fresh id.
            new_artifact_id = f"{session.session_id}/a{session.artifact_count + 1}"
            id_home = source_artifact if (interaction is not None and head_snapshot is not None) else new_artifact_id
            minted = [len(figures)]

            def figure_id_factory() -> str:
                minted[0] += 1
                return f"{id_home}/f{minted[0]}"

            def forward(event: TraceEvent) -> None:
                if event.kind in ("action_selected", "action_result", "evaluation"):
                    emit(event.kind, **dict(event.payload))

            outcome = run_loop(
                text, interaction, session.context, self.catalog, session.backend,
                session.loop_config,
                artifact_id=id_home,
                figures=figures,
                target_figure=target_figure,
                figure_id_factory=figure_id_factory,
                on_event=forward,
            )
        except FigstateError as exc:
            emit("error", message=str(exc))
            self._record_message(session, message_id, text or "", interaction, ())
            raise

        figure = outcome.figures[0]
        seed = outcome.seeds[0] if outcome.seeds else None

        with self._commit_lock:
            if seed is not None and head_snapshot is not None:
                source_fig = figures[seed.source_figure]
                schema = record_schema(source_fig, figure, interaction, self.catalog,
                                       existing=head_snapshot.schemas)
                snapshot = ArtifactSnapshot(
                    artifact_id=head_snapshot.artifact_id,
                    user_input=head_snapshot.user_input,
                    figures=head_snapshot.figures + (figure,),
                    schemas=head_snapshot.schemas + (schema,),
                )
            elif head_snapshot is not None and figure.figure_id in figures:
                snapshot = ArtifactSnapshot(
                    artifact_id=head_snapshot.artifact_id,
                    user_input=head_snapshot.user_input,
                    figures=tuple(
                        figure if f.figure_id == figure.figure_id else f
                        for f in head_snapshot.figures
                    ),
                    schemas=head_snapshot.schemas,
                )
            else:
                session.artifact_count += 1
                snapshot = ArtifactSnapshot(
                    artifact_id=new_artifact_id,
                    user_input=trigger,
                    figures=(figure,),
                )
            version_id = self.ledger.commit(snapshot, trigger)
            session.active_artifact = snapshot.artifact_id
            session.context = replace(
                outcome.context,
                active_artifact=snapshot.artifact_id,
            ).with_focus(figure, snapshot.artifact_id)
            self._record_message(session, message_id, text or "", interaction,
                                 ((snapshot.artifact_id, version_id),))
            self._persist()

        emit("figure_ready", figure_id=figure.figure_id, version_id=figure.meta.version_id,
             artifact_id=snapshot.artifact_id, insight=figure.visualization.insight_text)
        emit("done", artifact_id=snapshot.artifact_id, version_id=version_id,
             figure_ids=[figure.figure_id])
        return MessageOutcome(
            message_id=message_id,
            route="execute",
            artifact_id=snapshot.artifact_id,
            version_id=version_id,
            figure_ids=(figure.figure_id,),
            insight=figure.visualization.insight_text,
        )

    def _record_message(self, session, message_id, text, interaction, links) -> None:
        self.ledger.add_message(Message(
            message_id=message_id,
            conversation_id=session.session_id,
            seq=session.message_seq,
            role="user",
            text=text,
            interaction=interaction,
            created_at=now_iso(),
            artifact_links=tuple(links),
        ))
        session.message_seq += 1

    # -- gestures and coordination ---------------------------------------------------------

    def post_gesture(
        self,
        figure_id: str,
        ev: InteractionEvent,
        on_event: Callable[[StreamEvent], None] | None = None,
    ) -> GestureOutcome:
        emit = self._emitter(on_event)
        located = self.ledger.find_figure(figure_id)
        if located is None:
            raise KeyError(figure_id)
        artifact_id, source = located
        ev.check()

        predicate = interaction_to_predicate(ev, mark_map_for(source), source.visualization)
        echo = predicate_to_jsonable(predicate)
        snapshot = self.ledger.checkout(self.ledger.artifact(artifact_id).head_version)
        outgoing_exists = any(s.source_figure == figure_id for s in snapshot.schemas)
        if not outgoing_exists:
            emit("done", predicate=echo, updated_figures=[])
            return GestureOutcome(figure_id, echo)

        figures = {f.figure_id: f for f in snapshot.figures}
        trigger = UserInputRecord(input_id=f"gesture/{uuid.uuid4().hex[:8]}", interaction=ev)
        updated: dict[str, FigureState] = {}
        note = ""
        try:
            for schema in propagation_order(snapshot.schemas):
                src = updated.get(schema.source_figure, figures[schema.source_figure])
                dst = updated.get(schema.target_figure, figures[schema.target_figure])
                if schema.source_figure == figure_id:
                    result = propagate(schema, ev, src, dst, self.catalog)
                elif schema.source_figure in updated:
                    result = refresh_target(schema, src, dst, self.catalog)
                else:
                    continue
                if result.changed:
                    updated[schema.target_figure] = result.figure
                    emit("figure_ready", figure_id=result.figure.figure_id,
                         version_id=result.figure.meta.version_id, artifact_id=artifact_id)
        except EmptySelection as exc:
            emit("done", predicate=echo, updated_figures=[], note=str(exc))
            return GestureOutcome(figure_id, echo, note=str(exc))

        if not updated:
            emit("done", predicate=echo, updated_figures=[])
            return GestureOutcome(figure_id, echo)

        with self._commit_lock:
            new_snapshot = ArtifactSnapshot(
                artifact_id=snapshot.artifact_id,
                user_input=snapshot.user_input,
                figures=tuple(updated.get(f.figure_id, f) for f in snapshot.figures),
                schemas=snapshot.schemas,
            )
            version_id = self.ledger.commit(new_snapshot, trigger)
            self._persist()

        emit("done", predicate=echo, updated_figures=sorted(updated), version_id=version_id)
        return GestureOutcome(
            figure_id, echo,
            updated_figures=tuple(sorted(updated)),
            version_id=version_id,
        )

    # -- bundles, replay, export -----------------------------------------------------------

    def figure_bundle(self, figure_id: str) -> dict[str, Any]:
        located = self.ledger.find_figure(figure_id)
        if located is None:
            raise KeyError(figure_id)
        _, fig = located
        query_text = ""
        for step in reversed(fig.code.steps):
            if step.generated_query_text and step.action.kind in (
                ActionKind.SELECT_TABLE, ActionKind.SELECT_COLUMNS, ActionKind.FILTER_ROWS,
                ActionKind.JOIN_TABLES, ActionKind.DERIVE_COLUMN, ActionKind.AGGREGATE,
                ActionKind.SORT_LIMIT, ActionKind.ANALYZE,
            ):
                query_text = step.generated_query_text
                break
        return {
            "figure_id": fig.figure_id,
            "chart": to_chart_grammar(fig.visualization, fig.data),
            "chart_doc": chart_to_jsonable(fig.visualization),
            "query_text": query_text,
            "data_csv": fig.data.to_csv(),
            "data_digest": fig.data.digest,
            "program": program_to_jsonable(fig.code),
            "meta": {
                "version_id": fig.meta.version_id,
                "parent_version": fig.meta.parent_version,
                "operation": fig.meta.operation.value,
                "operation_description": fig.meta.operation_description,
                "artifact_id": fig.meta.artifact_id,
                "created_at": fig.meta.created_at,
            },
        }

    def replay(self, version_or_artifact: str) -> ReplayReport:
        if version_or_artifact in self.ledger.artifacts:
            version_id = self.ledger.artifact(version_or_artifact).head_version
        else:
            version_id = version_or_artifact
        return self.ledger.replay_artifact(version_id, self.catalog)

    def export_artifact(self, artifact_id: str, out_path: str | Path) -> Path:
        return export_bundle(self.ledger, artifact_id, self.catalog, out_path)

    def import_artifact(self, path: str | Path) -> str:
        artifact_id = import_bundle(self.ledger, path)
        loaded = self.ledger.artifact(artifact_id)
        snapshot = self.ledger.checkout(loaded.head_version)
        for fig in snapshot.figures:
            for table_id in fig.data.lineage.source_tables:
                if not self.catalog.has_table(table_id):
                    raise UnknownVersion(table_id)
        self._persist()
        return artifact_id

    def _persist(self) -> None:
        if self.ledger_path is not None:
            save_ledger(self.ledger, self.ledger_path)
