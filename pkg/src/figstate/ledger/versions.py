"""Version-controlled artifact ledger: a DAG of reproducible exploration states.

Every commit snapshots the full artifact (figures + coordination schemas),
labels the edge with the user input that caused it, and derives the version
id from the snapshot content plus its parent, so identical commits dedupe
and revisited states can never close a cycle.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

from figstate.compiler.interactions import InteractionEvent
from figstate.compiler.pipeline import replay_figure
from figstate.coordination import CoordinationSchema, schema_from_jsonable, schema_to_jsonable
from figstate.engine.catalog import TableCatalog
from figstate.errors import CycleDetected, UnknownVersion, ValidationFailed
from figstate.model.figures import (
    FigureState,
    Operation,
    figure_from_jsonable,
    figure_to_jsonable,
    now_iso,
    validate_figure,
)


@dataclass(frozen=True)
class UserInputRecord:
    """What the user said or did: free text, a gesture, or both."""

    input_id: str
    raw_text: str | None = None
    interaction: InteractionEvent | None = None
    parsed: dict[str, Any] | None = None
    at: str = field(default_factory=now_iso)

    def check(self) -> None:
        if self.raw_text is None and self.interaction is None:
            raise ValidationFailed("user input needs raw_text or an interaction")

    def to_jsonable(self, with_timestamps: bool = True) -> dict[str, Any]:
        out: dict[str, Any] = {
            "input_id": self.input_id,
            "raw_text": self.raw_text,
            "interaction": self.interaction.to_jsonable() if self.interaction else None,
            "parsed": self.parsed,
        }
        if with_timestamps:
            out["at"] = self.at
        return out

    @staticmethod
    def from_jsonable(payload: dict[str, Any]) -> "UserInputRecord":
        interaction = payload.get("interaction")
        return UserInputRecord(
            input_id=payload["input_id"],
            raw_text=payload.get("raw_text"),
            interaction=InteractionEvent.from_jsonable(interaction) if interaction else None,
            parsed=payload.get("parsed"),
            at=payload.get("at", ""),
        )


@dataclass(frozen=True)
class ArtifactSnapshot:
    """Full immutable state of one artifact at one version."""

    artifact_id: str
    user_input: UserInputRecord
    figures: tuple[FigureState, ...]
    schemas: tuple[CoordinationSchema, ...] = ()

    def figure_ids(self) -> tuple[str, ...]:
        return tuple(f.figure_id for f in self.figures)

    def figure(self, figure_id: str) -> FigureState:
        for f in self.figures:
            if f.figure_id == figure_id:
                return f
        raise KeyError(figure_id)


@dataclass(frozen=True)
class Artifact:
    """Summary row: the current shape of an artifact."""

    artifact_id: str
    user_input: UserInputRecord
    figure_ids: tuple[str, ...]
    coordination_edges: tuple[str, ...]
    head_version: str


@dataclass(frozen=True)
class VersionNode:
    version_id: str
    artifact_id: str
    parent: str | None
    trigger: UserInputRecord
    snapshot: ArtifactSnapshot
    created_at: str


@dataclass(frozen=True)
class Conversation:
    conversation_id: str
    created_at: str
    title: str = ""
    backend: str = "deterministic"


@dataclass(frozen=True)
class Message:
    message_id: str
    conversation_id: str
    seq: int
    role: str
    text: str
    interaction: InteractionEvent | None
    created_at: str
    artifact_links: tuple[tuple[str, str], ...] = ()  # (artifact_id, version_id)


def snapshot_to_jsonable(snapshot: ArtifactSnapshot, with_timestamps: bool = True) -> dict[str, Any]:
    figures = []
    for fig in snapshot.figures:
        payload = figure_to_jsonable(fig)
        if not with_timestamps:
            payload["meta"] = {k: v for k, v in payload["meta"].items() if k != "created_at"}
        figures.append(payload)
    return {
        "artifact_id": snapshot.artifact_id,
        "user_input": snapshot.user_input.to_jsonable(with_timestamps=with_timestamps),
        "figures": figures,
        "schemas": [schema_to_jsonable(s) for s in snapshot.schemas],
    }


def snapshot_from_jsonable(payload: dict[str, Any]) -> ArtifactSnapshot:
    return ArtifactSnapshot(
        artifact_id=payload["artifact_id"],
        user_input=UserInputRecord.from_jsonable(payload["user_input"]),
        figures=tuple(figure_from_jsonable(f) for f in payload["figures"]),
        schemas=tuple(schema_from_jsonable(s) for s in payload.get("schemas", [])),
    )


def snapshot_content_key(snapshot: ArtifactSnapshot) -> str:
    payload = json.dumps(snapshot_to_jsonable(snapshot, with_timestamps=False),
                         sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def version_id_for(snapshot: ArtifactSnapshot, parent: str | None) -> str:
    body = snapshot_to_jsonable(snapshot, with_timestamps=False)
    body["parent"] = parent
    payload = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return "av-" + hashlib.sha256(payload.encode("utf-8")).hexdigest()[:20]


@dataclass(frozen=True)
class FigureReplayResult:
    figure_id: str
    version_id: str
    digest_match: bool
    chart_match: bool
    declared_nondeterministic: bool
    notes: tuple[str, ...]

    def acceptable(self) -> bool:
        return (self.digest_match and self.chart_match) or self.declared_nondeterministic


@dataclass(frozen=True)
class ReplayReport:
    version_id: str
    results: tuple[FigureReplayResult, ...]

    def all_match(self) -> bool:
        return all(r.digest_match and r.chart_match for r in self.results)

    def acceptable(self) -> bool:
        return all(r.acceptable() for r in self.results)


@dataclass(frozen=True)
class ChangeSet:
    added_figures: tuple[str, ...]
    removed_figures: tuple[str, ...]
    appended_steps: dict[str, int]
    added_schemas: tuple[str, ...]
    removed_schemas: tuple[str, ...]

    def empty(self) -> bool:
        return not (self.added_figures or self.removed_figures or self.appended_steps
                    or self.added_schemas or self.removed_schemas)


class VersionLedger:
    """Append-only store of artifact versions plus the conversation layer."""

    def __init__(self) -> None:
        self.nodes: dict[str, VersionNode] = {}
        self.children: dict[str, list[str]] = {}
        self.artifacts: dict[str, Artifact] = {}
        self.conversations: dict[str, Conversation] = {}
        self.messages: list[Message] = []

    # -- commits ----------------------------------------------------------------

    def commit(
        self,
        snapshot: ArtifactSnapshot,
        trigger: UserInputRecord,
        parent: str | None = None,
    ) -> str:
        """Append an immutable snapshot and advance the artifact head.

        `parent` defaults to the artifact's current head; committing from an
        older checkout branches the DAG. Committing an identical snapshot on
        the same parent is a no-op returning the existing version id.
        """
        trigger.check()
        coordination_targets = {s.target_figure for s in snapshot.schemas}
        for fig in snapshot.figures:
            try:
                validate_figure(fig)
            except ValidationFailed as exc:
                raise ValidationFailed(f"figure {fig.figure_id}: {exc}") from exc
            if fig.meta.operation is Operation.COORDINATE_UPDATE and fig.figure_id not in coordination_targets:
                raise ValidationFailed(
                    f"figure {fig.figure_id} is a coordinate_update but no schema targets it"
                )

        existing = self.artifacts.get(snapshot.artifact_id)
        if parent is None and existing is not None:
            parent = existing.head_version
        if parent is not None and parent not in self.nodes:
            raise UnknownVersion(parent)

        if parent is not None and snapshot_content_key(snapshot) == snapshot_content_key(
            self.nodes[parent].snapshot
        ):
            # No state change: dedupe against the parent instead of minting
            # an identical child.
            self._set_head(snapshot, parent)
            return parent

        version_id = version_id_for(snapshot, parent)
        if version_id not in self.nodes:
            node = VersionNode(
                version_id=version_id,
                artifact_id=snapshot.artifact_id,
                parent=parent,
                trigger=trigger,
                snapshot=snapshot,
                created_at=now_iso(),
            )
            self._insert_node(node)
        self._set_head(snapshot, version_id)
        return version_id

    def _insert_node(self, node: VersionNode) -> None:
        if node.parent is not None and self._would_cycle(node.parent, node.version_id):
            raise CycleDetected(f"edge {node.parent} -> {node.version_id} closes a cycle")
        self.nodes[node.version_id] = node
        if node.parent is not None:
            self.children.setdefault(node.parent, []).append(node.version_id)

    def _would_cycle(self, parent: str, child: str) -> bool:
        # child is an ancestor of parent -> cycle
        cursor: str | None = parent
        while cursor is not None:
            if cursor == child:
                return True
            node = self.nodes.get(cursor)
            cursor = node.parent if node else None
        return False

    def _set_head(self, snapshot: ArtifactSnapshot, version_id: str) -> None:
        creating = self.artifacts.get(snapshot.artifact_id)
        self.artifacts[snapshot.artifact_id] = Artifact(
            artifact_id=snapshot.artifact_id,
            user_input=creating.user_input if creating else snapshot.user_input,
            figure_ids=snapshot.figure_ids(),
            coordination_edges=tuple(s.schema_id for s in snapshot.schemas),
            head_version=version_id,
        )

    # -- reads ---------------------------------------------------------------------

    def checkout(self, version_id: str) -> ArtifactSnapshot:
        """Read-only: returns the committed snapshot; heads are unchanged."""
        node = self.nodes.get(version_id)
        if node is None:
            raise UnknownVersion(version_id)
        return node.snapshot

    def node(self, version_id: str) -> VersionNode:
        node = self.nodes.get(version_id)
        if node is None:
            raise UnknownVersion(version_id)
        return node

    def artifact(self, artifact_id: str) -> Artifact:
        artifact = self.artifacts.get(artifact_id)
        if artifact is None:
            raise UnknownVersion(artifact_id)
        return artifact

    def versions_of(self, artifact_id: str) -> tuple[VersionNode, ...]:
        return tuple(n for n in self.nodes.values() if n.artifact_id == artifact_id)

    def heads(self, artifact_id: str) -> tuple[str, ...]:
        owned = {v for v, n in self.nodes.items() if n.artifact_id == artifact_id}
        with_children = {v for v in owned if any(c in owned for c in self.children.get(v, ()))}
        return tuple(sorted(owned - with_children))

    def roots(self, artifact_id: str) -> tuple[str, ...]:
        return tuple(sorted(
            v for v, n in self.nodes.items()
            if n.artifact_id == artifact_id and n.parent is None
        ))

    def find_figure(self, figure_id: str) -> tuple[str, FigureState] | None:
        """Locate a figure in some artifact head; returns (artifact_id, figure)."""
        for artifact in self.artifacts.values():
            if figure_id in artifact.figure_ids:
                snapshot = self.checkout(artifact.head_version)
                return artifact.artifact_id, snapshot.figure(figure_id)
        return None

    # -- replay / diff ------------------------------------------------------------------

    def replay_artifact(self, version_id: str, catalog: TableCatalog) -> ReplayReport:
        snapshot = self.checkout(version_id)
        results = []
        for fig in snapshot.figures:
            outcome = replay_figure(fig, catalog)
            results.append(FigureReplayResult(
                figure_id=fig.figure_id,
                version_id=fig.meta.version_id,
                digest_match=outcome.figure.data.digest == fig.data.digest,
                chart_match=outcome.figure.visualization == fig.visualization,
                declared_nondeterministic=outcome.declared_nondeterministic,
                notes=outcome.notes,
            ))
        return ReplayReport(version_id=version_id, results=tuple(results))

    def diff(self, v1: str, v2: str) -> ChangeSet:
        a, b = self.checkout(v1), self.checkout(v2)
        ids_a, ids_b = set(a.figure_ids()), set(b.figure_ids())
        appended: dict[str, int] = {}
        for figure_id in ids_a & ids_b:
            steps_a = len(a.figure(figure_id).code.steps)
            steps_b = len(b.figure(figure_id).code.steps)
            if steps_b != steps_a:
                appended[figure_id] = steps_b - steps_a
            elif a.figure(figure_id).meta.version_id != b.figure(figure_id).meta.version_id:
                appended[figure_id] = 0
        schemas_a = {s.schema_id for s in a.schemas}
        schemas_b = {s.schema_id for s in b.schemas}
        return ChangeSet(
            added_figures=tuple(sorted(ids_b - ids_a)),
            removed_figures=tuple(sorted(ids_a - ids_b)),
            appended_steps=appended,
            added_schemas=tuple(sorted(schemas_b - schemas_a)),
            removed_schemas=tuple(sorted(schemas_a - schemas_b)),
        )

    # -- conversation layer ------------------------------------------------------------

    def add_conversation(self, conversation: Conversation) -> None:
        self.conversations[conversation.conversation_id] = conversation

    def add_message(self, message: Message) -> None:
        self.messages.append(message)

    def messages_for(self, conversation_id: str) -> tuple[Message, ...]:
        return tuple(sorted(
            (m for m in self.messages if m.conversation_id == conversation_id),
            key=lambda m: m.seq,
        ))

    # -- integrity -----------------------------------------------------------------------

    def check_integrity(self) -> None:
        """DAG shape plus cross-references; raises on the first violation."""
        for version_id, node in self.nodes.items():
            if node.parent is not None and node.parent not in self.nodes:
                raise ValidationFailed(f"version {version_id} has unknown parent {node.parent}")
        for artifact in self.artifacts.values():
            if artifact.head_version not in self.nodes:
                raise ValidationFailed(f"artifact {artifact.artifact_id} head {artifact.head_version} missing")
        # acyclicity via iterative DFS over parent links
        seen: set[str] = set()
        for start in self.nodes:
            if start in seen:
                continue
            path: set[str] = set()
            cursor: str | None = start
            while cursor is not None and cursor not in seen:
                if cursor in path:
                    raise CycleDetected(f"cycle through {cursor}")
                path.add(cursor)
                cursor = self.nodes[cursor].parent
            seen |= path
        for message in self.messages:
            if message.conversation_id not in self.conversations:
                raise ValidationFailed(f"message {message.message_id} references unknown conversation")
            for artifact_id, version_id in message.artifact_links:
                if artifact_id not in self.artifacts:
                    raise ValidationFailed(f"message {message.message_id} references unknown artifact {artifact_id}")
                if version_id not in self.nodes:
                    raise ValidationFailed(f"message {message.message_id} references unknown version {version_id}")
