"""Bundled demo datasets, generated from fixed seeds rather than shipped as
binary fixtures.

Two fixtures: a climate table (50 states x 11 years x 12 months, seasonal
structure with July peaks) and an innovation fixture (faculty roster plus
per-event invention disclosures) shaped for join/aggregate walkthroughs,
including a guaranteed band of faculty whose papers are patent-cited but who
disclosed nothing themselves.
"""

from __future__ import annotations

import math
import random
from typing import Any

from figstate.engine.catalog import TableCatalog
from figstate.model.slices import Column, SemanticType

DEFAULT_SEED = 947

CLIMATE_TABLE = "temps"
FACULTY_TABLE = "faculty"
DISCLOSURES_TABLE = "disclosures"

YEARS = tuple(range(2014, 2025))  # 2014..2024 inclusive

US_STATES = (
    "Alabama", "Alaska", "Arizona", "Arkansas", "California", "Colorado",
    "Connecticut", "Delaware", "Florida", "Georgia", "Hawaii", "Idaho",
    "Illinois", "Indiana", "Iowa", "Kansas", "Kentucky", "Louisiana",
    "Maine", "Maryland", "Massachusetts", "Michigan", "Minnesota",
    "Mississippi", "Missouri", "Montana", "Nebraska", "Nevada",
    "New Hampshire", "New Jersey", "New Mexico", "New York",
    "North Carolina", "North Dakota", "Ohio", "Oklahoma", "Oregon",
    "Pennsylvania", "Rhode Island", "South Carolina", "South Dakota",
    "Tennessee", "Texas", "Utah", "Vermont", "Virginia", "Washington",
    "West Virginia", "Wisconsin", "Wyoming",
)

DEPARTMENTS = (
    "chemistry", "materials science", "computer science", "physics",
    "biology", "mathematics", "mechanical engineering",
    "electrical engineering", "economics", "psychology", "medicine",
    "statistics",
)

_FIRST_NAMES = (
    "Alex", "Sam", "Jordan", "Taylor", "Morgan", "Casey", "Riley", "Avery",
    "Quinn", "Rowan", "Sage", "Emerson", "Harper", "Reese", "Dana", "Kai",
)
_LAST_NAMES = (
    "Rivera", "Chen", "Okafor", "Silva", "Novak", "Haddad", "Kim", "Larsen",
    "Moreau", "Ivanov", "Tanaka", "Osei", "Garcia", "Weber", "Rossi", "Patel",
)


def climate_schema() -> tuple[Column, ...]:
    return (
        Column("state", SemanticType.NOMINAL),
        Column("year", SemanticType.QUANTITATIVE),
        Column("month", SemanticType.QUANTITATIVE),
        Column("temp", SemanticType.QUANTITATIVE),
    )


def make_climate_rows(seed: int = DEFAULT_SEED) -> list[tuple[Any, ...]]:
    """Monthly mean temperatures with per-state baselines and a July-peaked
    seasonal cycle; amplitude always dominates noise, so any state's July
    mean beats its January mean by construction."""
    rng = random.Random(seed)
    rows: list[tuple[Any, ...]] = []
    for state in US_STATES:
        base = 35.0 + 40.0 * rng.random()
        amplitude = 6.0 + 8.0 * rng.random()
        for year in YEARS:
            for month in range(1, 13):
                seasonal = -math.cos(2.0 * math.pi * (month - 1) / 12.0)
                noise = rng.uniform(-1.5, 1.5)
                temp = base + amplitude * seasonal + noise
                rows.append((state, float(year), float(month), temp))
    return rows


def faculty_schema() -> tuple[Column, ...]:
    return (
        Column("person_id", SemanticType.NOMINAL),
        Column("name", SemanticType.NOMINAL),
        Column("department", SemanticType.NOMINAL),
        Column("rank", SemanticType.NOMINAL),
        Column("tenure_status", SemanticType.NOMINAL),
        Column("papers_cited_by_patents", SemanticType.QUANTITATIVE),
        Column("invention_disclosures", SemanticType.QUANTITATIVE),
    )


def disclosures_schema() -> tuple[Column, ...]:
    return (
        Column("disclosure_id", SemanticType.NOMINAL),
        Column("person_id", SemanticType.NOMINAL),
        Column("disclosed_on", SemanticType.TEMPORAL),
        Column("status", SemanticType.NOMINAL),
    )


def make_innovation_rows(
    seed: int = DEFAULT_SEED,
    n_faculty: int = 240,
) -> tuple[list[tuple[Any, ...]], list[tuple[Any, ...]]]:
    """Faculty roster plus one disclosure event per disclosed invention.

    Roughly a quarter of faculty land in the cited-but-no-disclosure band
    (papers_cited_by_patents > 0, invention_disclosures == 0); disclosure
    propensity is higher in chemistry/materials science, mirroring the
    uneven patenting activity the walkthrough explores.
    """
    rng = random.Random(seed + 1)
    faculty: list[tuple[Any, ...]] = []
    events: list[tuple[Any, ...]] = []
    event_no = 0
    for i in range(n_faculty):
        person_id = f"p{i + 1:04d}"
        name = f"{rng.choice(_FIRST_NAMES)} {rng.choice(_LAST_NAMES)}"
        department = rng.choice(DEPARTMENTS)
        rank = rng.choices(("assistant", "associate", "full"), weights=(4, 3, 3))[0]
        if rank == "assistant":
            tenure = "pre_tenure"
        else:
            tenure = "attained" if rng.random() < 0.85 else "pre_tenure"
        papers = float(int(rng.paretovariate(1.2))) if rng.random() < 0.8 else 0.0

        band_roll = rng.random()
        if band_roll < 0.25:
            # untapped band: patent-cited papers, no own disclosures
            papers = max(papers, 1.0)
            n_disclosures = 0
        else:
            propensity = 0.75 if department in ("chemistry", "materials science") else 0.4
            n_disclosures = int(rng.paretovariate(1.5)) if rng.random() < propensity else 0
        faculty.append((person_id, name, department, rank, tenure, papers, float(n_disclosures)))

        for _ in range(n_disclosures):
            event_no += 1
            year = rng.randint(2015, 2024)
            month = rng.randint(1, 12)
            day = rng.randint(1, 28)
            status = rng.choices(("filed", "licensed", "abandoned"), weights=(6, 3, 1))[0]
            events.append((
                f"d{event_no:05d}",
                person_id,
                f"{year:04d}-{month:02d}-{day:02d}",
                status,
            ))
    return faculty, events


def register_demo(catalog: TableCatalog, seed: int = DEFAULT_SEED) -> None:
    """Register the three demo tables on a catalog."""
    catalog.register_table(CLIMATE_TABLE, climate_schema(), make_climate_rows(seed))
    faculty, events = make_innovation_rows(seed)
    catalog.register_table(FACULTY_TABLE, faculty_schema(), faculty)
    catalog.register_table(DISCLOSURES_TABLE, disclosures_schema(), events)


def demo_catalog(seed: int = DEFAULT_SEED) -> TableCatalog:
    catalog = TableCatalog()
    register_demo(catalog, seed)
    return catalog


WALKTHROUGH = """\
Demo data registered. Try the scripted walkthrough against a running server:

  1. Generate the monthly climate line:
       "plot mean of temp by month for state Florida as line"
  2. Brush the summer months (x between 5.6 and 8.4), then follow up:
       "rank state by mean temp as bar"
  3. Re-select winter (click the month marks for 12, 1, 2) and watch the
     linked ranking update in place.
  4. Innovation fixture: "plot invention_disclosures vs papers_cited_by_patents"
     then "make x log scale", brush a region, and ask
     "show the department distribution as bar".
"""
