"""Tabular value objects: typed schemas, keyed rows, lineage, and content digests.

A DataSlice is the data leg of a figure. Its digest is the replay-verification
primitive for the whole system: canonical serialization (schema, then rows
sorted lexicographically with numbers rendered at full precision) hashed with
SHA-256, so equality is platform-independent and reorder-invariant.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable, Iterator

from figstate.errors import UnknownColumn

ROW_KEY_COLUMN = "__row_key"

_UNIT_SEP = "\x1f"
_RECORD_SEP = "\x1e"


class SemanticType(str, Enum):
    QUANTITATIVE = "quantitative"
    NOMINAL = "nominal"
    ORDINAL = "ordinal"
    TEMPORAL = "temporal"


@dataclass(frozen=True)
class Column:
    name: str
    stype: SemanticType


@dataclass(frozen=True)
class Row:
    """One keyed tuple; cell order follows the owning slice's schema."""

    key: str
    values: tuple[Any, ...]


@dataclass(frozen=True)
class Lineage:
    """Where a slice came from: scanned tables, filter text, transform
    descriptions. Enough, together with the provenance program, to replay."""

    source_tables: tuple[str, ...] = ()
    predicate_text: str = ""
    transforms: tuple[str, ...] = ()


def canonical_cell(value: Any) -> str:
    """Injective, platform-stable rendering of one cell.

    Floats use hex notation (exact bit pattern), strings are length-prefixed
    so separators cannot collide.
    """
    if isinstance(value, bool):
        return "b1" if value else "b0"
    if isinstance(value, float):
        return "f" + value.hex()
    if isinstance(value, int):
        return "i" + str(value)
    if isinstance(value, str):
        return f"s{len(value)}:{value}"
    raise TypeError(f"unsupported cell type {type(value).__name__}")


def _canonical_row(row: Row) -> str:
    cells = _UNIT_SEP.join(canonical_cell(v) for v in row.values)
    return cells + _UNIT_SEP + f"k{len(row.key)}:{row.key}"


def digest_rows(schema: Iterable[Column], rows: Iterable[Row]) -> str:
    header = _UNIT_SEP.join(f"{c.name}:{c.stype.value}" for c in schema)
    body = sorted(_canonical_row(r) for r in rows)
    payload = header + _RECORD_SEP + _RECORD_SEP.join(body)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def compute_digest(data: "DataSlice") -> str:
    """Recompute a slice's content digest from scratch (ignores the stored
    value); pure, platform-stable, reorder-invariant."""
    return digest_rows(data.schema, data.rows)


@dataclass(frozen=True)
class DataSlice:
    schema: tuple[Column, ...]
    rows: tuple[Row, ...]
    lineage: Lineage
    digest: str

    @staticmethod
    def build(
        schema: Iterable[Column],
        rows: Iterable[Row],
        lineage: Lineage = Lineage(),
    ) -> "DataSlice":
        schema = tuple(schema)
        rows = tuple(rows)
        return DataSlice(schema, rows, lineage, digest_rows(schema, rows))

    # -- schema helpers ------------------------------------------------------

    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.schema)

    def column_index(self, name: str) -> int:
        for i, c in enumerate(self.schema):
            if c.name == name:
                return i
        raise UnknownColumn(name, "slice")

    def stype_of(self, name: str) -> SemanticType:
        return self.schema[self.column_index(name)].stype

    def has_column(self, name: str) -> bool:
        return any(c.name == name for c in self.schema)

    def values(self, name: str) -> list[Any]:
        i = self.column_index(name)
        return [r.values[i] for r in self.rows]

    def row_keys(self) -> frozenset[str]:
        return frozenset(r.key for r in self.rows)

    def iter_envs(self) -> Iterator[dict[str, Any]]:
        """Rows as dicts, with the row key exposed under __row_key."""
        names = self.column_names()
        for r in self.rows:
            env = dict(zip(names, r.values))
            env[ROW_KEY_COLUMN] = r.key
            yield env

    # -- serialization ---------------------------------------------------------

    def to_csv(self) -> str:
        """RFC-4180 CSV with a header row and a leading __row_key column."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([ROW_KEY_COLUMN, *self.column_names()])
        for r in self.rows:
            writer.writerow([r.key, *(_csv_cell(v) for v in r.values)])
        return buf.getvalue()

    def to_jsonable(self) -> dict[str, Any]:
        return {
            "schema": [[c.name, c.stype.value] for c in self.schema],
            "rows": [[r.key, list(r.values)] for r in self.rows],
            "lineage": {
                "source_tables": list(self.lineage.source_tables),
                "predicate_text": self.lineage.predicate_text,
                "transforms": list(self.lineage.transforms),
            },
            "digest": self.digest,
        }

    @staticmethod
    def from_jsonable(payload: dict[str, Any]) -> "DataSlice":
        schema = tuple(Column(n, SemanticType(t)) for n, t in payload["schema"])
        rows = tuple(Row(k, _revive_cells(schema, vals)) for k, vals in payload["rows"])
        lin = payload.get("lineage", {})
        lineage = Lineage(
            tuple(lin.get("source_tables", ())),
            lin.get("predicate_text", ""),
            tuple(lin.get("transforms", ())),
        )
        return DataSlice(schema, rows, lineage, payload["digest"])


def _revive_cells(schema: tuple[Column, ...], values: list[Any]) -> tuple[Any, ...]:
    # JSON round-trips ints and floats distinctly, but quantitative cells are
    # floats by policy; guard against int leakage from hand-written payloads.
    out = []
    for col, v in zip(schema, values):
        if col.stype is SemanticType.QUANTITATIVE and isinstance(v, int) and not isinstance(v, bool):
            v = float(v)
        out.append(v)
    return tuple(out)


def _csv_cell(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)
