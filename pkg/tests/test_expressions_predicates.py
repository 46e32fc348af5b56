from __future__ import annotations

import math

import pytest

from figstate.compiler import expressions as xp
from figstate.compiler import predicates as pr
from figstate.errors import DivisionByZero, DomainError, ExpressionTypeError
from figstate.model.slices import Column, SemanticType

SCHEMA = (
    Column("x", SemanticType.QUANTITATIVE),
    Column("state", SemanticType.NOMINAL),
)


class TestExpressions:
    def test_log_of_zero_plus_one_is_zero(self):
        expr = xp.Log(xp.ColumnRef("x"), offset=1.0)
        assert xp.evaluate(expr, {"x": 0.0}) == 0.0

    def test_log1p_analytic_values(self):
        expr = xp.Log(xp.ColumnRef("x"), offset=1.0)
        assert xp.evaluate(expr, {"x": 0.0}) == 0.0
        assert xp.evaluate(expr, {"x": math.e - 1.0}) == pytest.approx(1.0, abs=1e-12)

    def test_log_domain_error(self):
        with pytest.raises(DomainError):
            xp.evaluate(xp.Log(xp.ColumnRef("x"), offset=1.0), {"x": -1.0})

    def test_division_by_zero_raises(self):
        expr = xp.Arith("div", xp.ColumnRef("x"), xp.Literal(0.0))
        with pytest.raises(DivisionByZero):
            xp.evaluate(expr, {"x": 3.0})

    def test_type_error_on_string(self):
        with pytest.raises(ExpressionTypeError):
            xp.evaluate(xp.Abs(xp.ColumnRef("state")), {"state": "FL"})

    def test_bucket_labels(self):
        expr = xp.Bucket(xp.ColumnRef("x"), thresholds=(0.0, 10.0), labels=("neg", "low", "high"))
        assert xp.evaluate(expr, {"x": -3.0}) == "neg"
        assert xp.evaluate(expr, {"x": 0.0}) == "neg"
        assert xp.evaluate(expr, {"x": 5.0}) == "low"
        assert xp.evaluate(expr, {"x": 11.0}) == "high"

    def test_text_rendering(self):
        expr = xp.Log(xp.Arith("add", xp.ColumnRef("x"), xp.Literal(0.0)), offset=1.0)
        assert xp.to_text(expr) == "log((x + 0) + 1)"

    def test_json_round_trip(self):
        expr = xp.Arith(
            "mul",
            xp.Abs(xp.ColumnRef("x")),
            xp.Bucket(xp.ColumnRef("x"), (1.0,), ("a", "b")),
        )
        assert xp.from_jsonable(xp.to_jsonable(expr)) == expr

    def test_validate_catches_bad_bucket(self):
        expr = xp.Bucket(xp.ColumnRef("x"), thresholds=(2.0, 1.0), labels=("a", "b", "c"))
        assert any("increasing" in p for p in xp.validate(expr))


class TestPredicates:
    def test_membership_and_range_matching(self):
        pred = pr.Predicate((
            pr.Membership("state", ("FL", "GA")),
            pr.RangeAtom("x", 1.0, 3.0),
        ))
        assert pred.matches({"state": "FL", "x": 1.0})
        assert pred.matches({"state": "GA", "x": 3.0})
        assert not pred.matches({"state": "MN", "x": 2.0})
        assert not pred.matches({"state": "FL", "x": 3.5})

    def test_comparison_ops(self):
        for op, value, expected in [("<", 2.0, True), ("<=", 1.0, True), ("=", 1.0, True),
                                    (">=", 1.5, False), (">", 1.0, False), ("!=", 2.0, True)]:
            pred = pr.Predicate((pr.Comparison("x", op, value),))
            assert pred.matches({"x": 1.0}) is expected, (op, value)

    def test_validation(self):
        problems = pr.validate_predicate(
            pr.Predicate((
                pr.Membership("nope", ("a",)),
                pr.Membership("state", ()),
                pr.RangeAtom("x", 5.0, 1.0),
            )),
            SCHEMA,
        )
        assert len(problems) == 3

    def test_row_key_is_always_addressable(self):
        pred = pr.Predicate((pr.Membership("__row_key", ("t:0",)),))
        assert pr.validate_predicate(pred, SCHEMA) == []
        assert pred.matches({"x": 0.0, "state": "FL", "__row_key": "t:0"})

    def test_sql_text_uses_in_and_between(self):
        pred = pr.Predicate((
            pr.Membership("state", ("Flo'rida",)),
            pr.RangeAtom("year", 2014.0, 2024.0),
            pr.Comparison("x", "!=", 0.0),
        ))
        text = pr.predicate_to_sql(pred)
        assert text == "state IN ('Flo''rida') AND year BETWEEN 2014.0 AND 2024.0 AND x <> 0.0"

    def test_json_round_trip(self):
        pred = pr.Predicate((
            pr.Membership("state", ("FL",)),
            pr.RangeAtom("x", 0.5, 2.5),
            pr.Comparison("x", ">", 1.0),
        ))
        assert pr.predicate_from_jsonable(pr.predicate_to_jsonable(pred)) == pred
