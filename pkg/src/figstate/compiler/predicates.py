"""Conjunctive row predicates: the relational half of the gesture bridge.

Three atom families only — membership (IN), inclusive range (BETWEEN), and
scalar comparison — so interval gestures and discrete selections stay
structurally distinct all the way down to the serialized query text.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Union

from figstate.errors import ValidationFailed
from figstate.model.slices import ROW_KEY_COLUMN, Column

_COMPARISON_OPS = ("<", "<=", "=", ">=", ">", "!=")


@dataclass(frozen=True)
class Membership:
    column: str
    values: tuple[Any, ...]


@dataclass(frozen=True)
class RangeAtom:
    """Inclusive on both bounds."""

    column: str
    lo: Any
    hi: Any


@dataclass(frozen=True)
class Comparison:
    column: str
    op: str
    value: Any


Atom = Union[Membership, RangeAtom, Comparison]


@dataclass(frozen=True)
class Predicate:
    atoms: tuple[Atom, ...] = ()

    def columns(self) -> tuple[str, ...]:
        seen: list[str] = []
        for atom in self.atoms:
            if atom.column not in seen:
                seen.append(atom.column)
        return tuple(seen)

    def matches(self, env: Mapping[str, Any]) -> bool:
        return all(_atom_matches(a, env) for a in self.atoms)


def _atom_matches(atom: Atom, env: Mapping[str, Any]) -> bool:
    value = env[atom.column]
    if isinstance(atom, Membership):
        return value in atom.values
    if isinstance(atom, RangeAtom):
        return atom.lo <= value <= atom.hi
    if isinstance(atom, Comparison):
        if atom.op == "<":
            return value < atom.value
        if atom.op == "<=":
            return value <= atom.value
        if atom.op == "=":
            return value == atom.value
        if atom.op == ">=":
            return value >= atom.value
        if atom.op == ">":
            return value > atom.value
        return value != atom.value
    raise TypeError(f"unknown atom {atom!r}")


def validate_predicate(pred: Predicate, schema: Iterable[Column]) -> list[str]:
    """Return violation messages (empty list means valid).

    __row_key is always addressable; it names the slice's key column.
    """
    names = {c.name for c in schema} | {ROW_KEY_COLUMN}
    problems = []
    for atom in pred.atoms:
        if atom.column not in names:
            problems.append(f"unknown column {atom.column!r} in predicate")
        if isinstance(atom, Membership) and not atom.values:
            problems.append(f"empty membership set on {atom.column!r}")
        if isinstance(atom, RangeAtom):
            try:
                inverted = atom.lo > atom.hi
            except TypeError:
                problems.append(f"range bounds on {atom.column!r} are not comparable")
                continue
            if inverted:
                problems.append(f"range on {atom.column!r} has lo > hi")
        if isinstance(atom, Comparison) and atom.op not in _COMPARISON_OPS:
            problems.append(f"unknown comparison operator {atom.op!r}")
    return problems


# --- SQL-dialect text (see docs/sql-dialect.md) ------------------------------------


def sql_literal(value: Any) -> str:
    if isinstance(value, bool):
        return "TRUE" if value else "FALSE"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    escaped = str(value).replace("'", "''")
    return f"'{escaped}'"


def atom_to_sql(atom: Atom) -> str:
    if isinstance(atom, Membership):
        vals = ", ".join(sql_literal(v) for v in atom.values)
        return f"{atom.column} IN ({vals})"
    if isinstance(atom, RangeAtom):
        return f"{atom.column} BETWEEN {sql_literal(atom.lo)} AND {sql_literal(atom.hi)}"
    if isinstance(atom, Comparison):
        op = "<>" if atom.op == "!=" else atom.op
        return f"{atom.column} {op} {sql_literal(atom.value)}"
    raise TypeError(f"unknown atom {atom!r}")


def predicate_to_sql(pred: Predicate) -> str:
    if not pred.atoms:
        return "TRUE"
    return " AND ".join(atom_to_sql(a) for a in pred.atoms)


# --- JSON round-trip ------------------------------------------------------------------


def predicate_to_jsonable(pred: Predicate) -> dict[str, Any]:
    atoms = []
    for atom in pred.atoms:
        if isinstance(atom, Membership):
            atoms.append({"kind": "membership", "column": atom.column, "values": list(atom.values)})
        elif isinstance(atom, RangeAtom):
            atoms.append({"kind": "range", "column": atom.column, "lo": atom.lo, "hi": atom.hi})
        else:
            atoms.append({"kind": "comparison", "column": atom.column, "op": atom.op, "value": atom.value})
    return {"atoms": atoms}


def predicate_from_jsonable(payload: dict[str, Any]) -> Predicate:
    atoms: list[Atom] = []
    for a in payload.get("atoms", []):
        kind = a["kind"]
        if kind == "membership":
            atoms.append(Membership(a["column"], tuple(_num(v) for v in a["values"])))
        elif kind == "range":
            atoms.append(RangeAtom(a["column"], _num(a["lo"]), _num(a["hi"])))
        elif kind == "comparison":
            atoms.append(Comparison(a["column"], a["op"], _num(a["value"])))
        else:
            raise ValidationFailed(f"unknown predicate atom kind {kind!r}")
    return Predicate(tuple(atoms))


def _num(v: Any) -> Any:
    # Quantitative values are 64-bit floats by policy; JSON may hand back ints.
    if isinstance(v, int) and not isinstance(v, bool):
        return float(v)
    return v
