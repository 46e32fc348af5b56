"""Table catalog: registration, CSV ingest, and the on-disk manifest.

Schemas are immutable once registered; re-registering an id raises. Ingest
rejects rows with missing cells (no three-valued logic downstream) and
normalizes quantitative cells to 64-bit floats. Temporal columns are stored
as ISO-8601 date strings plus derived numeric <col>_year/<col>_month columns.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import threading
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from figstate.compiler.actions import CatalogSchema, TableInfo
from figstate.errors import DuplicateTable, MissingSourceTable, SchemaMismatch, StorageError
from figstate.model.slices import Column, Row, SemanticType

MANIFEST_NAME = "catalog.json"
_NOMINAL_VALUE_CAP = 200


@dataclass(frozen=True)
class Table:
    table_id: str
    schema: tuple[Column, ...]
    rows: tuple[Row, ...]
    source_digest: str = ""


class TableCatalog:
    """In-memory table store with a monotonically increasing generation."""

    def __init__(self) -> None:
        self._tables: dict[str, Table] = {}
        self._generation = 0
        self._lock = threading.Lock()
        self._listeners: list[Callable[[str], None]] = []

    @property
    def generation(self) -> int:
        return self._generation

    def table_ids(self) -> tuple[str, ...]:
        return tuple(self._tables)

    def has_table(self, table_id: str) -> bool:
        return table_id in self._tables

    def get_table(self, table_id: str) -> Table:
        table = self._tables.get(table_id)
        if table is None:
            raise MissingSourceTable(table_id)
        for listener in self._listeners:
            listener(table_id)
        return table

    def listen(self, callback: Callable[[str], None]) -> Callable[[], None]:
        """Subscribe to table accesses; returns an unsubscribe function."""
        self._listeners.append(callback)

        def unsubscribe() -> None:
            self._listeners.remove(callback)

        return unsubscribe

    def register_table(
        self,
        table_id: str,
        schema: Iterable[Column],
        rows: Iterable[Sequence[Any]],
        source_digest: str = "",
    ) -> int:
        """Validate, coerce, derive temporal helper columns, and store.

        Returns the new catalog generation.
        """
        schema = tuple(schema)
        with self._lock:
            if table_id in self._tables:
                raise DuplicateTable(f"table {table_id!r} already registered")
            full_schema, typed_rows = _coerce_rows(schema, rows)
            keyed = tuple(
                Row(f"{table_id}:{i}", values) for i, values in enumerate(typed_rows)
            )
            self._generation += 1
            self._tables[table_id] = Table(table_id, full_schema, keyed, source_digest)
            return self._generation

    def schema_map(self) -> CatalogSchema:
        """Schema view handed to validators and intent backends: columns plus
        capped distinct values for nominal/ordinal columns."""
        out: dict[str, TableInfo] = {}
        for table_id, table in self._tables.items():
            nominal: dict[str, tuple[Any, ...]] = {}
            for i, col in enumerate(table.schema):
                if col.stype in (SemanticType.NOMINAL, SemanticType.ORDINAL):
                    seen: list[Any] = []
                    for row in table.rows:
                        v = row.values[i]
                        if v not in seen:
                            seen.append(v)
                            if len(seen) >= _NOMINAL_VALUE_CAP:
                                break
                    nominal[col.name] = tuple(seen)
            out[table_id] = TableInfo(table.schema, nominal)
        return out

    # -- CSV ingest ------------------------------------------------------------

    def ingest_csv(
        self,
        table_id: str,
        text: str,
        schema: Iterable[Column] | None = None,
        source_digest: str = "",
    ) -> int:
        """RFC-4180 CSV with a header row. When no schema is declared, types
        are inferred (numeric -> quantitative, ISO date -> temporal, else
        nominal)."""
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(0, "empty CSV") from None
        raw_rows = [row for row in reader if row]

        if schema is None:
            schema = _infer_schema(header, raw_rows)
        else:
            schema = tuple(schema)
            declared = [c.name for c in schema]
            if header != declared:
                raise SchemaMismatch(0, f"header {header!r} does not match declared columns {declared!r}")

        parsed = []
        for i, raw in enumerate(raw_rows):
            if len(raw) != len(schema):
                raise SchemaMismatch(i, f"expected {len(schema)} cells, got {len(raw)}")
            parsed.append([_parse_cell(schema[j], raw[j], i) for j in range(len(schema))])
        if not source_digest:
            source_digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        return self.register_table(table_id, schema, parsed, source_digest)

    # -- manifest + directory layout -----------------------------------------------

    def to_manifest(self) -> dict[str, Any]:
        return {
            "generation": self._generation,
            "tables": [
                {
                    "id": t.table_id,
                    "schema": [[c.name, c.stype.value] for c in t.schema],
                    "source": f"tables/{t.table_id}.csv",
                    "digest": t.source_digest,
                }
                for t in self._tables.values()
            ],
        }

    def save_dir(self, data_dir: str | Path) -> None:
        data_dir = Path(data_dir)
        (data_dir / "tables").mkdir(parents=True, exist_ok=True)
        manifest = self.to_manifest()
        for entry, table in zip(manifest["tables"], self._tables.values()):
            text = table_to_csv(table)
            digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
            entry["digest"] = digest
            (data_dir / entry["source"]).write_text(text, encoding="utf-8")
        (data_dir / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2), encoding="utf-8")

    @staticmethod
    def load_dir(data_dir: str | Path, verify: bool = True) -> "TableCatalog":
        data_dir = Path(data_dir)
        manifest_path = data_dir / MANIFEST_NAME
        if not manifest_path.exists():
            raise StorageError(f"no catalog manifest at {manifest_path}")
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        catalog = TableCatalog()
        for entry in manifest.get("tables", []):
            text = (data_dir / entry["source"]).read_text(encoding="utf-8")
            digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
            if verify and entry.get("digest") and digest != entry["digest"]:
                raise StorageError(f"source digest mismatch for table {entry['id']!r}")
            schema = tuple(Column(n, SemanticType(t)) for n, t in entry["schema"])
            catalog.ingest_csv(entry["id"], text, schema, source_digest=digest)
        return catalog


def table_to_csv(table: Table) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([c.name for c in table.schema])
    for row in table.rows:
        writer.writerow([repr(v) if isinstance(v, float) else str(v) for v in row.values])
    return buf.getvalue()


def _coerce_rows(
    schema: tuple[Column, ...],
    rows: Iterable[Sequence[Any]],
) -> tuple[tuple[Column, ...], list[tuple[Any, ...]]]:
    names = [c.name for c in schema]
    if len(set(names)) != len(names):
        raise SchemaMismatch(0, "duplicate column names in schema")

    derived: list[Column] = []
    derivations: list[tuple[int, str]] = []  # (source column index, year|month)
    for idx, col in enumerate(schema):
        if col.stype is not SemanticType.TEMPORAL:
            continue
        for part in ("year", "month"):
            derived_name = f"{col.name}_{part}"
            if derived_name not in names:
                derived.append(Column(derived_name, SemanticType.QUANTITATIVE))
                derivations.append((idx, part))
                names.append(derived_name)
    full_schema = schema + tuple(derived)

    typed: list[tuple[Any, ...]] = []
    for i, raw in enumerate(rows):
        raw = list(raw)
        if len(raw) != len(schema):
            raise SchemaMismatch(i, f"expected {len(schema)} cells, got {len(raw)}")
        cells: list[Any] = []
        dates: dict[int, date] = {}
        for idx, (col, value) in enumerate(zip(schema, raw)):
            if value is None or (isinstance(value, str) and value == ""):
                raise SchemaMismatch(i, f"missing cell in column {col.name!r}")
            if col.stype is SemanticType.QUANTITATIVE:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise SchemaMismatch(i, f"column {col.name!r} expects a number, got {value!r}")
                cells.append(float(value))
            elif col.stype is SemanticType.TEMPORAL:
                try:
                    d = date.fromisoformat(str(value))
                except ValueError:
                    raise SchemaMismatch(i, f"column {col.name!r} expects an ISO-8601 date, got {value!r}") from None
                dates[idx] = d
                cells.append(d.isoformat())
            else:
                cells.append(str(value))
        for idx, part in derivations:
            d = dates[idx]
            cells.append(float(d.year if part == "year" else d.month))
        typed.append(tuple(cells))
    return full_schema, typed


def _parse_cell(col: Column, token: str, row_index: int) -> Any:
    if token == "":
        raise SchemaMismatch(row_index, f"missing cell in column {col.name!r}")
    if col.stype is SemanticType.QUANTITATIVE:
        try:
            return float(token)
        except ValueError:
            raise SchemaMismatch(row_index, f"column {col.name!r} expects a number, got {token!r}") from None
    return token


def _infer_schema(header: list[str], rows: list[list[str]]) -> tuple[Column, ...]:
    columns = []
    for j, name in enumerate(header):
        values = [row[j] for row in rows if j < len(row) and row[j] != ""]
        if values and all(_is_float(v) for v in values):
            stype = SemanticType.QUANTITATIVE
        elif values and all(_is_iso_date(v) for v in values):
            stype = SemanticType.TEMPORAL
        else:
            stype = SemanticType.NOMINAL
        columns.append(Column(name, stype))
    return tuple(columns)


def _is_float(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def _is_iso_date(token: str) -> bool:
    try:
        date.fromisoformat(token)
        return True
    except ValueError:
        return False
