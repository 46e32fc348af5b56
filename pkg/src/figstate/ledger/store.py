"""File-backed relational persistence for the exploration history.

Seven tables: conversations, messages, message_artifact, artifacts,
artifact_versions, figures, figure_versions. Figure payloads are stored once
per figure version; artifact version snapshots reference them by id, and
load re-checks every reference before handing the ledger back.
"""

from __future__ import annotations

import json
import sqlite3
from pathlib import Path
from typing import Any

from figstate.coordination import schema_from_jsonable, schema_to_jsonable
from figstate.errors import LedgerIntegrityError, StorageError
from figstate.ledger.versions import (
    Artifact,
    ArtifactSnapshot,
    Conversation,
    Message,
    UserInputRecord,
    VersionLedger,
    VersionNode,
)
from figstate.compiler.interactions import InteractionEvent
from figstate.model.figures import figure_from_jsonable, figure_to_jsonable

_DDL = """
CREATE TABLE conversations (
    conversation_id TEXT PRIMARY KEY,
    created_at TEXT NOT NULL,
    title TEXT NOT NULL DEFAULT '',
    backend TEXT NOT NULL DEFAULT 'deterministic'
);
CREATE TABLE messages (
    message_id TEXT PRIMARY KEY,
    conversation_id TEXT NOT NULL,
    seq INTEGER NOT NULL,
    role TEXT NOT NULL,
    text TEXT NOT NULL DEFAULT '',
    interaction_json TEXT,
    created_at TEXT NOT NULL
);
CREATE TABLE message_artifact (
    message_id TEXT NOT NULL,
    artifact_id TEXT NOT NULL,
    version_id TEXT NOT NULL
);
CREATE TABLE artifacts (
    artifact_id TEXT PRIMARY KEY,
    user_input_json TEXT NOT NULL,
    figure_ids_json TEXT NOT NULL,
    coordination_json TEXT NOT NULL,
    head_version TEXT NOT NULL
);
CREATE TABLE artifact_versions (
    version_id TEXT PRIMARY KEY,
    artifact_id TEXT NOT NULL,
    parent_version TEXT,
    trigger_json TEXT NOT NULL,
    user_input_json TEXT NOT NULL,
    figure_versions_json TEXT NOT NULL,
    schemas_json TEXT NOT NULL,
    created_at TEXT NOT NULL
);
CREATE TABLE figures (
    figure_id TEXT PRIMARY KEY,
    artifact_id TEXT NOT NULL,
    head_version TEXT NOT NULL
);
CREATE TABLE figure_versions (
    figure_version_id TEXT PRIMARY KEY,
    figure_id TEXT NOT NULL,
    parent_version TEXT,
    operation TEXT NOT NULL,
    payload_json TEXT NOT NULL,
    created_at TEXT NOT NULL
);
"""


def save_ledger(ledger: VersionLedger, path: str | Path) -> None:
    """Full atomic rewrite of the relational layout."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    if tmp.exists():
        tmp.unlink()
    try:
        con = sqlite3.connect(tmp)
        con.executescript(_DDL)
        with con:
            for c in ledger.conversations.values():
                con.execute(
                    "INSERT INTO conversations VALUES (?, ?, ?, ?)",
                    (c.conversation_id, c.created_at, c.title, c.backend),
                )
            for m in ledger.messages:
                con.execute(
                    "INSERT INTO messages VALUES (?, ?, ?, ?, ?, ?, ?)",
                    (
                        m.message_id, m.conversation_id, m.seq, m.role, m.text,
                        json.dumps(m.interaction.to_jsonable()) if m.interaction else None,
                        m.created_at,
                    ),
                )
                for artifact_id, version_id in m.artifact_links:
                    con.execute(
                        "INSERT INTO message_artifact VALUES (?, ?, ?)",
                        (m.message_id, artifact_id, version_id),
                    )
            for a in ledger.artifacts.values():
                con.execute(
                    "INSERT INTO artifacts VALUES (?, ?, ?, ?, ?)",
                    (
                        a.artifact_id,
                        json.dumps(a.user_input.to_jsonable()),
                        json.dumps(list(a.figure_ids)),
                        json.dumps(list(a.coordination_edges)),
                        a.head_version,
                    ),
                )

            figure_rows: dict[str, tuple[str, str]] = {}
            figure_versions: dict[str, tuple[str, str | None, str, str, str]] = {}
            for node in ledger.nodes.values():
                refs = []
                for fig in node.snapshot.figures:
                    refs.append(fig.meta.version_id)
                    figure_versions.setdefault(fig.meta.version_id, (
                        fig.figure_id,
                        fig.meta.parent_version,
                        fig.meta.operation.value,
                        json.dumps(figure_to_jsonable(fig)),
                        fig.meta.created_at,
                    ))
                con.execute(
                    "INSERT INTO artifact_versions VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
                    (
                        node.version_id,
                        node.artifact_id,
                        node.parent,
                        json.dumps(node.trigger.to_jsonable()),
                        json.dumps(node.snapshot.user_input.to_jsonable()),
                        json.dumps(refs),
                        json.dumps([schema_to_jsonable(s) for s in node.snapshot.schemas]),
                        node.created_at,
                    ),
                )
            for artifact in ledger.artifacts.values():
                head = ledger.nodes[artifact.head_version]
                for fig in head.snapshot.figures:
                    figure_rows[fig.figure_id] = (artifact.artifact_id, fig.meta.version_id)
            for figure_id, (artifact_id, head_version) in figure_rows.items():
                con.execute("INSERT INTO figures VALUES (?, ?, ?)", (figure_id, artifact_id, head_version))
            for version_id, row in figure_versions.items():
                con.execute(
                    "INSERT INTO figure_versions VALUES (?, ?, ?, ?, ?, ?)",
                    (version_id, *row),
                )
        con.close()
        tmp.replace(path)
    except sqlite3.Error as exc:
        raise StorageError(f"cannot save ledger: {exc}") from exc
    finally:
        if tmp.exists():
            tmp.unlink()


def load_ledger(path: str | Path) -> VersionLedger:
    path = Path(path)
    if not path.exists():
        raise StorageError(f"no ledger database at {path}")
    try:
        con = sqlite3.connect(path)
        con.row_factory = sqlite3.Row
        ledger = VersionLedger()

        figure_payloads: dict[str, dict[str, Any]] = {}
        for row in con.execute("SELECT * FROM figure_versions"):
            figure_payloads[row["figure_version_id"]] = json.loads(row["payload_json"])

        for row in con.execute("SELECT * FROM conversations"):
            ledger.add_conversation(Conversation(
                row["conversation_id"], row["created_at"], row["title"], row["backend"],
            ))

        links: dict[str, list[tuple[str, str]]] = {}
        for row in con.execute("SELECT * FROM message_artifact"):
            links.setdefault(row["message_id"], []).append((row["artifact_id"], row["version_id"]))

        for row in con.execute("SELECT * FROM messages ORDER BY conversation_id, seq"):
            interaction = row["interaction_json"]
            ledger.add_message(Message(
                message_id=row["message_id"],
                conversation_id=row["conversation_id"],
                seq=row["seq"],
                role=row["role"],
                text=row["text"],
                interaction=InteractionEvent.from_jsonable(json.loads(interaction)) if interaction else None,
                created_at=row["created_at"],
                artifact_links=tuple(links.get(row["message_id"], ())),
            ))

        for row in con.execute("SELECT * FROM artifact_versions"):
            figures = []
            for ref in json.loads(row["figure_versions_json"]):
                payload = figure_payloads.get(ref)
                if payload is None:
                    raise LedgerIntegrityError(
                        f"artifact version {row['version_id']} references missing figure version {ref}"
                    )
                figures.append(figure_from_jsonable(payload))
            snapshot = ArtifactSnapshot(
                artifact_id=row["artifact_id"],
                user_input=UserInputRecord.from_jsonable(json.loads(row["user_input_json"])),
                figures=tuple(figures),
                schemas=tuple(schema_from_jsonable(s) for s in json.loads(row["schemas_json"])),
            )
            node = VersionNode(
                version_id=row["version_id"],
                artifact_id=row["artifact_id"],
                parent=row["parent_version"],
                trigger=UserInputRecord.from_jsonable(json.loads(row["trigger_json"])),
                snapshot=snapshot,
                created_at=row["created_at"],
            )
            ledger.nodes[node.version_id] = node
            if node.parent is not None:
                ledger.children.setdefault(node.parent, []).append(node.version_id)

        figure_table: dict[str, str] = {}
        for row in con.execute("SELECT * FROM figures"):
            figure_table[row["figure_id"]] = row["artifact_id"]

        for row in con.execute("SELECT * FROM artifacts"):
            artifact = Artifact(
                artifact_id=row["artifact_id"],
                user_input=UserInputRecord.from_jsonable(json.loads(row["user_input_json"])),
                figure_ids=tuple(json.loads(row["figure_ids_json"])),
                coordination_edges=tuple(json.loads(row["coordination_json"])),
                head_version=row["head_version"],
            )
            for figure_id in artifact.figure_ids:
                if figure_id not in figure_table:
                    raise LedgerIntegrityError(
                        f"artifact {artifact.artifact_id} references missing figure {figure_id}"
                    )
            ledger.artifacts[artifact.artifact_id] = artifact

        con.close()
        ledger.check_integrity()
        return ledger
    except sqlite3.Error as exc:
        raise StorageError(f"cannot load ledger: {exc}") from exc
