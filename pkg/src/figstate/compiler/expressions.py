"""Closed derivation-expression grammar.

Column derivations are restricted to arithmetic, log(x + c), exp, abs, and
conditional bucketing — a deliberately small, replayable vocabulary instead
of arbitrary generated code. Evaluation yields 64-bit floats, except
bucketing, which passes its labels through.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping, Union

from figstate.errors import DivisionByZero, DomainError, ExpressionTypeError

_ARITH_OPS = ("add", "sub", "mul", "div")
_ARITH_SYMBOLS = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


@dataclass(frozen=True)
class ColumnRef:
    name: str


@dataclass(frozen=True)
class Literal:
    value: float


@dataclass(frozen=True)
class Arith:
    op: str  # add | sub | mul | div
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Log:
    """Natural log of (arg + offset); the offset is the zero-avoidance shift."""

    arg: "Expr"
    offset: float = 0.0


@dataclass(frozen=True)
class Exp:
    arg: "Expr"


@dataclass(frozen=True)
class Abs:
    arg: "Expr"


@dataclass(frozen=True)
class Bucket:
    """Threshold bucketing: value <= thresholds[i] -> labels[i], else labels[-1].

    len(labels) == len(thresholds) + 1; thresholds strictly increasing.
    """

    arg: "Expr"
    thresholds: tuple[float, ...]
    labels: tuple[str, ...]


Expr = Union[ColumnRef, Literal, Arith, Log, Exp, Abs, Bucket]


def referenced_columns(expr: Expr) -> tuple[str, ...]:
    if isinstance(expr, ColumnRef):
        return (expr.name,)
    if isinstance(expr, Literal):
        return ()
    if isinstance(expr, Arith):
        out = list(referenced_columns(expr.left))
        for name in referenced_columns(expr.right):
            if name not in out:
                out.append(name)
        return tuple(out)
    return referenced_columns(expr.arg)


def _numeric(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ExpressionTypeError(f"{where} expects a number, got {type(value).__name__}")
    return float(value)


def evaluate(expr: Expr, env: Mapping[str, Any]) -> Any:
    if isinstance(expr, ColumnRef):
        return env[expr.name]
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, Arith):
        left = _numeric(evaluate(expr.left, env), expr.op)
        right = _numeric(evaluate(expr.right, env), expr.op)
        if expr.op == "add":
            return left + right
        if expr.op == "sub":
            return left - right
        if expr.op == "mul":
            return left * right
        if right == 0.0:
            raise DivisionByZero(f"{to_text(expr)} with right operand 0")
        return left / right
    if isinstance(expr, Log):
        v = _numeric(evaluate(expr.arg, env), "log") + expr.offset
        if v <= 0.0:
            raise DomainError(f"log argument {v!r} <= 0")
        return math.log(v)
    if isinstance(expr, Exp):
        return math.exp(_numeric(evaluate(expr.arg, env), "exp"))
    if isinstance(expr, Abs):
        return abs(_numeric(evaluate(expr.arg, env), "abs"))
    if isinstance(expr, Bucket):
        v = _numeric(evaluate(expr.arg, env), "bucket")
        for threshold, label in zip(expr.thresholds, expr.labels):
            if v <= threshold:
                return label
        return expr.labels[-1]
    raise TypeError(f"unknown expression {expr!r}")


def to_text(expr: Expr) -> str:
    if isinstance(expr, ColumnRef):
        return expr.name
    if isinstance(expr, Literal):
        return f"{expr.value:g}"
    if isinstance(expr, Arith):
        return f"({to_text(expr.left)} {_ARITH_SYMBOLS[expr.op]} {to_text(expr.right)})"
    if isinstance(expr, Log):
        if expr.offset:
            return f"log({to_text(expr.arg)} + {expr.offset:g})"
        return f"log({to_text(expr.arg)})"
    if isinstance(expr, Exp):
        return f"exp({to_text(expr.arg)})"
    if isinstance(expr, Abs):
        return f"abs({to_text(expr.arg)})"
    if isinstance(expr, Bucket):
        pairs = ", ".join(f"<={t:g}:{label}" for t, label in zip(expr.thresholds, expr.labels))
        return f"bucket({to_text(expr.arg)}, {pairs}, else:{expr.labels[-1]})"
    raise TypeError(f"unknown expression {expr!r}")


def validate(expr: Expr) -> list[str]:
    problems = []
    if isinstance(expr, Arith):
        if expr.op not in _ARITH_OPS:
            problems.append(f"unknown arithmetic op {expr.op!r}")
        problems += validate(expr.left)
        problems += validate(expr.right)
    elif isinstance(expr, (Log, Exp, Abs)):
        problems += validate(expr.arg)
    elif isinstance(expr, Bucket):
        if len(expr.labels) != len(expr.thresholds) + 1:
            problems.append("bucket needs len(labels) == len(thresholds) + 1")
        if any(a >= b for a, b in zip(expr.thresholds, expr.thresholds[1:])):
            problems.append("bucket thresholds must be strictly increasing")
        problems += validate(expr.arg)
    elif not isinstance(expr, (ColumnRef, Literal)):
        problems.append(f"unknown expression node {type(expr).__name__}")
    return problems


def is_numeric(expr: Expr) -> bool:
    """Bucket yields labels; everything else yields floats."""
    return not isinstance(expr, Bucket)


# --- JSON round-trip ------------------------------------------------------------


def to_jsonable(expr: Expr) -> dict[str, Any]:
    if isinstance(expr, ColumnRef):
        return {"col": expr.name}
    if isinstance(expr, Literal):
        return {"lit": expr.value}
    if isinstance(expr, Arith):
        return {"op": expr.op, "left": to_jsonable(expr.left), "right": to_jsonable(expr.right)}
    if isinstance(expr, Log):
        return {"op": "log", "arg": to_jsonable(expr.arg), "offset": expr.offset}
    if isinstance(expr, Exp):
        return {"op": "exp", "arg": to_jsonable(expr.arg)}
    if isinstance(expr, Abs):
        return {"op": "abs", "arg": to_jsonable(expr.arg)}
    if isinstance(expr, Bucket):
        return {
            "op": "bucket",
            "arg": to_jsonable(expr.arg),
            "thresholds": list(expr.thresholds),
            "labels": list(expr.labels),
        }
    raise TypeError(f"unknown expression {expr!r}")


def from_jsonable(payload: Mapping[str, Any]) -> Expr:
    if "col" in payload:
        return ColumnRef(payload["col"])
    if "lit" in payload:
        return Literal(float(payload["lit"]))
    op = payload.get("op")
    if op in _ARITH_OPS:
        return Arith(op, from_jsonable(payload["left"]), from_jsonable(payload["right"]))
    if op == "log":
        return Log(from_jsonable(payload["arg"]), float(payload.get("offset", 0.0)))
    if op == "exp":
        return Exp(from_jsonable(payload["arg"]))
    if op == "abs":
        return Abs(from_jsonable(payload["arg"]))
    if op == "bucket":
        return Bucket(
            from_jsonable(payload["arg"]),
            tuple(float(t) for t in payload["thresholds"]),
            tuple(str(label) for label in payload["labels"]),
        )
    raise ExpressionTypeError(f"cannot parse expression payload {payload!r}")
