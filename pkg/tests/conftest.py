from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from figstate.demo import demo_catalog
from figstate.engine.catalog import TableCatalog
from figstate.model.slices import Column, SemanticType

settings.register_profile(
    "suite",
    max_examples=30,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def demo():
    """Full demo catalog (temps, faculty, disclosures); read-only."""
    return demo_catalog()


@pytest.fixture()
def mini_catalog() -> TableCatalog:
    """Small hand-auditable fixture: a 3-state climate table plus a 5-person
    faculty/disclosures pair for join oracles."""
    catalog = TableCatalog()
    temps_schema = (
        Column("state", SemanticType.NOMINAL),
        Column("year", SemanticType.QUANTITATIVE),
        Column("month", SemanticType.QUANTITATIVE),
        Column("temp", SemanticType.QUANTITATIVE),
    )
    rows = []
    base = {"FL": 70.0, "GA": 60.0, "MN": 40.0}
    for state in ("FL", "GA", "MN"):
        for year in (2023, 2024):
            for month in range(1, 13):
                temp = base[state] + (month - 6.5) + (0.5 if year == 2024 else 0.0)
                rows.append((state, float(year), float(month), temp))
    catalog.register_table("temps_small", temps_schema, rows)

    faculty_schema = (
        Column("person_id", SemanticType.NOMINAL),
        Column("name", SemanticType.NOMINAL),
        Column("department", SemanticType.NOMINAL),
        Column("papers", SemanticType.QUANTITATIVE),
    )
    catalog.register_table("faculty_small", faculty_schema, [
        ("p1", "Ada", "chemistry", 5.0),
        ("p2", "Ben", "chemistry", 2.0),
        ("p3", "Cam", "physics", 7.0),
        ("p4", "Dee", "biology", 1.0),
        ("p5", "Eli", "physics", 0.0),
    ])
    disclosures_schema = (
        Column("disclosure_id", SemanticType.NOMINAL),
        Column("person_id", SemanticType.NOMINAL),
        Column("year", SemanticType.QUANTITATIVE),
    )
    catalog.register_table("disclosures_small", disclosures_schema, [
        ("d1", "p1", 2020.0),
        ("d2", "p1", 2021.0),
        ("d3", "p2", 2021.0),
        ("d4", "p3", 2022.0),
        ("d5", "p9", 2022.0),  # no matching faculty row
    ])
    return catalog


def brute_force_group_mean(rows, group_idx: int, value_idx: int) -> dict:
    """Independent group-by oracle over raw tuples."""
    sums: dict = {}
    counts: dict = {}
    for row in rows:
        key = row[group_idx]
        sums[key] = sums.get(key, 0.0) + row[value_idx]
        counts[key] = counts.get(key, 0) + 1
    return {k: sums[k] / counts[k] for k in sums}
