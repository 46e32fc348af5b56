from __future__ import annotations

import random

from hypothesis import given
from hypothesis import strategies as st

from figstate.model.slices import Column, DataSlice, Lineage, Row, SemanticType, digest_rows

SCHEMA = (
    Column("name", SemanticType.NOMINAL),
    Column("value", SemanticType.QUANTITATIVE),
)


def make_slice(rows):
    return DataSlice.build(SCHEMA, rows, Lineage(("t",)))


def test_digest_reorder_invariant():
    rows = [Row(f"t:{i}", (f"n{i}", float(i))) for i in range(20)]
    shuffled = list(rows)
    random.Random(7).shuffle(shuffled)
    assert make_slice(rows).digest == make_slice(shuffled).digest


def test_digest_sensitive_to_single_cell():
    rows = [Row(f"t:{i}", (f"n{i}", float(i))) for i in range(5)]
    changed = list(rows)
    changed[3] = Row("t:3", ("n3", 4.0))  # was 3.0
    assert make_slice(rows).digest != make_slice(changed).digest


def test_digest_distinguishes_negative_zero_and_int_float():
    a = make_slice([Row("t:0", ("n", 0.0))])
    b = make_slice([Row("t:0", ("n", -0.0))])
    assert a.digest != b.digest


@st.composite
def random_rows(draw):
    n = draw(st.integers(min_value=0, max_value=30))
    rows = []
    for i in range(n):
        name = draw(st.text(min_size=0, max_size=8))
        value = draw(st.floats(allow_nan=False, allow_infinity=False, width=64))
        rows.append(Row(f"t:{i}", (name, value)))
    return rows


@given(random_rows())
def test_digest_pure_function(rows):
    assert digest_rows(SCHEMA, rows) == digest_rows(SCHEMA, rows)


@given(random_rows(), st.randoms(use_true_random=False))
def test_digest_reorder_property(rows, rng):
    shuffled = list(rows)
    rng.shuffle(shuffled)
    assert digest_rows(SCHEMA, rows) == digest_rows(SCHEMA, shuffled)


def test_digest_many_random_slices_stable():
    rng = random.Random(123)
    for _ in range(1000):
        rows = [
            Row(f"t:{i}", (chr(97 + rng.randrange(26)), rng.random() * 1e6))
            for i in range(rng.randrange(0, 12))
        ]
        assert digest_rows(SCHEMA, rows) == digest_rows(SCHEMA, rows)


def test_csv_has_header_and_row_key_column():
    s = make_slice([Row("t:0", ("alpha, beta", 1.5))])
    text = s.to_csv()
    lines = text.splitlines()
    assert lines[0] == "__row_key,name,value"
    assert lines[1] == 't:0,"alpha, beta",1.5'


def test_jsonable_round_trip():
    s = make_slice([Row("t:0", ("a", 1.0)), Row("t:1", ("b", 2.25))])
    revived = DataSlice.from_jsonable(s.to_jsonable())
    assert revived == s
    assert revived.digest == s.digest


def test_float_precision_survives_csv():
    value = 0.1 + 0.2  # not representable exactly; repr must round-trip
    s = make_slice([Row("t:0", ("a", value))])
    cell = s.to_csv().splitlines()[1].split(",")[2]
    assert float(cell) == value


def test_compute_digest_matches_stored_and_is_pure():
    from figstate.model.slices import compute_digest

    s = make_slice([Row("t:0", ("a", 1.5)), Row("t:1", ("b", 2.5))])
    assert compute_digest(s) == s.digest
    assert compute_digest(s) == compute_digest(s)
