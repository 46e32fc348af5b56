"""Self-contained artifact bundles: the unit shared between CLI, service,
and verifier.

A bundle is a zip holding the artifact's version subgraph (bundle.json), a
catalog manifest, and the source tables as CSV attachments, so a fresh
process can rebuild the catalog and replay every figure with nothing else.
"""

from __future__ import annotations

import hashlib
import json
import zipfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from figstate.engine.catalog import Column, SemanticType, TableCatalog, table_to_csv
from figstate.errors import BundleFormatError, UnknownVersion
from figstate.ledger.versions import (
    ReplayReport,
    UserInputRecord,
    VersionLedger,
    VersionNode,
    snapshot_from_jsonable,
    snapshot_to_jsonable,
)

FORMAT_VERSION = 1


def _node_to_jsonable(node: VersionNode) -> dict[str, Any]:
    return {
        "version_id": node.version_id,
        "artifact_id": node.artifact_id,
        "parent": node.parent,
        "trigger": node.trigger.to_jsonable(),
        "snapshot": snapshot_to_jsonable(node.snapshot),
        "created_at": node.created_at,
    }


def _node_from_jsonable(payload: dict[str, Any]) -> VersionNode:
    return VersionNode(
        version_id=payload["version_id"],
        artifact_id=payload["artifact_id"],
        parent=payload.get("parent"),
        trigger=UserInputRecord.from_jsonable(payload["trigger"]),
        snapshot=snapshot_from_jsonable(payload["snapshot"]),
        created_at=payload.get("created_at", ""),
    )


def export_bundle(
    ledger: VersionLedger,
    artifact_id: str,
    catalog: TableCatalog,
    out_path: str | Path,
) -> Path:
    """Write the artifact's full version subgraph plus its source tables."""
    artifact = ledger.artifact(artifact_id)
    nodes = sorted(ledger.versions_of(artifact_id), key=lambda n: n.version_id)
    if not nodes:
        raise UnknownVersion(artifact_id)

    table_ids: list[str] = []
    for node in nodes:
        for fig in node.snapshot.figures:
            for table_id in fig.data.lineage.source_tables:
                if table_id not in table_ids:
                    table_ids.append(table_id)

    tables = []
    csv_texts: dict[str, str] = {}
    for table_id in table_ids:
        table = catalog.get_table(table_id)
        text = table_to_csv(table)
        csv_texts[table_id] = text
        tables.append({
            "id": table_id,
            "schema": [[c.name, c.stype.value] for c in table.schema],
            "source": f"tables/{table_id}.csv",
            "digest": hashlib.sha256(text.encode("utf-8")).hexdigest(),
        })

    manifest = {
        "format_version": FORMAT_VERSION,
        "artifact_id": artifact_id,
        "head_version": artifact.head_version,
        "tables": tables,
    }
    body = {
        "artifact": {
            "artifact_id": artifact.artifact_id,
            "user_input": artifact.user_input.to_jsonable(),
            "figure_ids": list(artifact.figure_ids),
            "coordination_edges": list(artifact.coordination_edges),
            "head_version": artifact.head_version,
        },
        "versions": [_node_to_jsonable(n) for n in nodes],
    }

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(out_path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("manifest.json", json.dumps(manifest, indent=2, sort_keys=True))
        zf.writestr("bundle.json", json.dumps(body, indent=2, sort_keys=True))
        for table_id, text in csv_texts.items():
            zf.writestr(f"tables/{table_id}.csv", text)
    return out_path


@dataclass
class LoadedBundle:
    manifest: dict[str, Any]
    artifact_id: str
    head_version: str
    nodes: list[VersionNode]
    catalog: TableCatalog
    source_digest_mismatches: tuple[str, ...]


def load_bundle(path: str | Path) -> LoadedBundle:
    """Open a bundle and rebuild a standalone catalog from its attachments.

    Source-digest mismatches are recorded, not fatal: replay will name the
    figures the corruption actually breaks.
    """
    path = Path(path)
    try:
        zf = zipfile.ZipFile(path)
    except (zipfile.BadZipFile, FileNotFoundError, IsADirectoryError) as exc:
        raise BundleFormatError(f"cannot open bundle: {exc}") from exc
    with zf:
        try:
            manifest = json.loads(zf.read("manifest.json"))
            body = json.loads(zf.read("bundle.json"))
        except KeyError as exc:
            raise BundleFormatError(f"bundle is missing {exc}") from exc
        except json.JSONDecodeError as exc:
            raise BundleFormatError(f"bundle JSON is malformed: {exc}") from exc
        if manifest.get("format_version") != FORMAT_VERSION:
            raise BundleFormatError(f"unsupported format_version {manifest.get('format_version')!r}")

        catalog = TableCatalog()
        mismatches: list[str] = []
        for entry in manifest.get("tables", []):
            try:
                text = zf.read(entry["source"]).decode("utf-8")
            except KeyError:
                raise BundleFormatError(f"bundle is missing attachment {entry['source']!r}") from None
            digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
            if entry.get("digest") and digest != entry["digest"]:
                mismatches.append(entry["id"])
            schema = tuple(Column(n, SemanticType(t)) for n, t in entry["schema"])
            catalog.ingest_csv(entry["id"], text, schema, source_digest=digest)

        try:
            nodes = [_node_from_jsonable(n) for n in body["versions"]]
            artifact_id = body["artifact"]["artifact_id"]
            head_version = body["artifact"]["head_version"]
        except (KeyError, TypeError, ValueError) as exc:
            raise BundleFormatError(f"bundle body is malformed: {exc}") from exc

    return LoadedBundle(
        manifest=manifest,
        artifact_id=artifact_id,
        head_version=head_version,
        nodes=nodes,
        catalog=catalog,
        source_digest_mismatches=tuple(mismatches),
    )


def import_bundle(ledger: VersionLedger, path: str | Path) -> str:
    """Merge a bundle's version subgraph into a ledger; returns the artifact id.

    Existing version ids are kept as-is (content addressing makes them
    identical); the artifact head follows the bundle.
    """
    loaded = load_bundle(path)
    by_id = {n.version_id: n for n in loaded.nodes}
    ordered: list[VersionNode] = []
    seen: set[str] = set()

    def visit(version_id: str) -> None:
        if version_id in seen or version_id not in by_id:
            return
        node = by_id[version_id]
        if node.parent is not None:
            visit(node.parent)
        seen.add(version_id)
        ordered.append(node)

    for node in loaded.nodes:
        visit(node.version_id)

    for node in ordered:
        if node.version_id in ledger.nodes:
            continue
        if node.parent is not None and node.parent not in ledger.nodes:
            raise BundleFormatError(f"version {node.version_id} has dangling parent {node.parent}")
        ledger._insert_node(node)
    head = by_id.get(loaded.head_version)
    if head is None:
        raise BundleFormatError(f"bundle head {loaded.head_version} not among its versions")
    ledger._set_head(head.snapshot, head.version_id)
    ledger.check_integrity()
    return loaded.artifact_id


def verify_bundle(path: str | Path) -> tuple[ReplayReport, ...]:
    """Replay every version in a bundle against its attached sources."""
    loaded = load_bundle(path)
    ledger = VersionLedger()
    for node in sorted(loaded.nodes, key=lambda n: (n.parent is not None, n.version_id)):
        if node.version_id in ledger.nodes:
            continue
        ledger.nodes[node.version_id] = node
        if node.parent is not None:
            ledger.children.setdefault(node.parent, []).append(node.version_id)
    reports = []
    for version_id in sorted(ledger.nodes):
        reports.append(ledger.replay_artifact(version_id, loaded.catalog))
    return tuple(reports)
