"""Acceptance criteria, one test per criterion, each printing a PASS line.

Tolerances are pinned here: replay, round-trip, coordination-equivalence,
and engine-vs-oracle runs demand exact digest equality (0 mismatches);
robustness runs demand terminating outcomes on 100% of trials.
"""

from __future__ import annotations

import dataclasses
import json
import random
import subprocess
import sys
import time


from conftest import brute_force_group_mean
from figstate.agent.backends import Proposal, RequestFacts, ScriptedBackend
from figstate.agent.loop import LoopConfig
from figstate.compiler.actions import (
    AddChartType,
    AddData,
    AddEncoding,
    AggregateRows,
    AggSpec,
    FilterRows,
    SelectTable,
    SortKey,
    SortLimit,
)
from figstate.compiler.interactions import GestureKind, InteractionEvent, geometric_selection
from figstate.compiler.pipeline import build_figure, extend_from_selection
from figstate.compiler.predicates import Membership, Predicate
from figstate.coordination import propagate, record_schema
from figstate.demo import make_climate_rows
from figstate.engine.catalog import TableCatalog
from figstate.errors import AllBranchesFailed, BudgetExhausted, FigstateError
from figstate.harness import generate_suite
from figstate.harness.reference import compare_results
from figstate.ledger.versions import (
    ArtifactSnapshot,
    UserInputRecord,
    VersionLedger,
    snapshot_to_jsonable,
)
from figstate.model.charts import (
    Aggregate,
    Channel,
    ChartDoc,
    ChartType,
    EncodingSpec,
    Scale,
    materialize_marks,
)
from figstate.model.figures import Operation
from figstate.model.slices import Column, DataSlice, Lineage, Row, SemanticType
from figstate.runtime import Runtime

MINI_STATES = ("Alder", "Birch", "Cedar", "Dunes", "Elm", "Fir", "Grove", "Holly")


def mini_climate_catalog(seed: int = 401) -> TableCatalog:
    rng = random.Random(seed)
    rows = []
    for state in MINI_STATES:
        base = 35.0 + 40.0 * rng.random()
        amplitude = 6.0 + 8.0 * rng.random()
        for year in (2014, 2015, 2016):
            for month in range(1, 13):
                seasonal = -1.0 if month == 1 else (1.0 if month == 7 else (month - 6.5) / 6.0)
                rows.append((state, float(year), float(month),
                             base + amplitude * seasonal + rng.uniform(-1.5, 1.5)))
    catalog = TableCatalog()
    catalog.register_table("temps", (
        Column("state", SemanticType.NOMINAL),
        Column("year", SemanticType.QUANTITATIVE),
        Column("month", SemanticType.QUANTITATIVE),
        Column("temp", SemanticType.QUANTITATIVE),
    ), rows)
    return catalog


def month_click_event(figure, months) -> InteractionEvent:
    marks = [m for m in figure.visualization.marks if m.channel_values[Channel.X] in months]
    return InteractionEvent(figure.figure_id, GestureKind.CLICK,
                            mark_ids=tuple(m.mark_id for m in marks))


# --- 1. replay determinism --------------------------------------------------------------


def drive_session(runtime: Runtime, rng: random.Random, i: int) -> str:
    """One randomized exploration: generate -> (manipulate) -> extend ->
    coordinate-update, through the deterministic backend."""
    session = runtime.create_session(session_id=f"s{i}")
    sid = session.session_id
    state = rng.choice(MINI_STATES)
    first = runtime.post_message(sid, text=f"plot mean temp by month for state {state} as line")
    figure_id = first.figure_ids[0]

    if rng.random() < 0.6:
        lo, hi = sorted(rng.sample((2014, 2015, 2016), 2))
        runtime.post_message(sid, text=f"filter to year between {lo} and {hi}",
                             target_figure=figure_id)

    lo_m, hi_m = sorted(rng.sample(range(1, 13), 2))
    brush = {"figure_id": figure_id, "kind": "brush1d", "channel": Channel.X,
             "lo": lo_m - 0.4, "hi": hi_m + 0.4}
    extended = runtime.post_message(
        sid, text="rank state by mean temp as bar",
        interaction=InteractionEvent(figure_id, GestureKind.BRUSH_1D,
                                     channel=Channel.X, lo=lo_m - 0.4, hi=hi_m + 0.4),
    )

    source = runtime.ledger.find_figure(figure_id)[1]
    months = set(rng.sample([float(m) for m in range(1, 13)], k=rng.randint(1, 3)))
    runtime.post_gesture(figure_id, month_click_event(source, months))
    return extended.artifact_id


def test_acceptance_replay_determinism(tmp_path):
    started = time.time()
    catalog = mini_climate_catalog()
    runtime = Runtime(catalog)
    rng = random.Random(2024)
    bundles = tmp_path / "bundles"
    bundles.mkdir()
    for i in range(200):
        artifact_id = drive_session(runtime, rng, i)
        runtime.export_artifact(artifact_id, bundles / f"session{i:03d}.zip")

    driver = (
        "import json, sys\n"
        "from pathlib import Path\n"
        "from figstate.ledger.bundle import verify_bundle\n"
        "out = {}\n"
        "for p in sorted(Path(sys.argv[1]).glob('*.zip')):\n"
        "    reports = verify_bundle(p)\n"
        "    out[p.name] = all(r.all_match() for r in reports)\n"
        "print(json.dumps(out))\n"
    )
    fresh = subprocess.run([sys.executable, "-c", driver, str(bundles)],
                           capture_output=True, text=True, timeout=600)
    assert fresh.returncode == 0, fresh.stderr
    results = json.loads(fresh.stdout)
    assert len(results) == 200
    mismatched = [name for name, ok in results.items() if not ok]
    assert mismatched == [], f"replay mismatches: {mismatched}"
    elapsed = time.time() - started
    assert elapsed < 120, f"took {elapsed:.1f}s, budget is 120s"
    print(f"\nACCEPTANCE replay-determinism: PASS (200 sessions, 0 mismatches, {elapsed:.1f}s)")


# --- 2. bidirectional round-trip -----------------------------------------------------------


def _random_slice(rng: random.Random, n: int) -> DataSlice:
    schema = (
        Column("cat", SemanticType.NOMINAL),
        Column("grp", SemanticType.QUANTITATIVE),
        Column("x", SemanticType.QUANTITATIVE),
        Column("y", SemanticType.QUANTITATIVE),
    )
    cats = [f"c{k}" for k in range(rng.randint(2, 8))]
    rows = [
        Row(f"t:{i}", (
            rng.choice(cats),
            float(rng.randint(1, 12)),
            round(rng.uniform(-50, 50), 2),
            round(rng.uniform(-50, 50), 2),
        ))
        for i in range(n)
    ]
    return DataSlice.build(schema, rows, Lineage(("t",)))


def _aggregated_slice(data: DataSlice) -> DataSlice:
    """Pre-aggregated view (count by cat) for plain pie/table variants."""
    counts: dict[str, float] = {}
    for env in data.iter_envs():
        counts[env["cat"]] = counts.get(env["cat"], 0.0) + 1.0
    schema = (Column("cat", SemanticType.NOMINAL), Column("n", SemanticType.QUANTITATIVE))
    rows = [Row(f"g:{k}", (k, v)) for k, v in sorted(counts.items())]
    return DataSlice.build(schema, rows, Lineage(("t",)))


def _figure_variants(data: DataSlice):
    lin = Scale.LINEAR
    ord_ = Scale.ORDINAL
    agg_slice = _aggregated_slice(data)
    return [
        # (chart_type, encodings, slice, allowed gestures)
        (ChartType.BAR, {Channel.X: EncodingSpec("cat", ord_),
                         Channel.Y: EncodingSpec("y", lin, Aggregate.MEAN)}, data, ("click",)),
        (ChartType.BAR, {Channel.X: EncodingSpec("grp", lin),
                         Channel.Y: EncodingSpec("y", lin, Aggregate.MEAN)}, data, ("click", "brush1d_x")),
        (ChartType.BAR, {Channel.X: EncodingSpec("x", lin),
                         Channel.Y: EncodingSpec("y", lin)}, data, ("click", "brush1d_x", "brush1d_y", "brush2d")),
        (ChartType.LINE, {Channel.X: EncodingSpec("grp", lin),
                          Channel.Y: EncodingSpec("y", lin, Aggregate.MEAN)}, data, ("click", "brush1d_x")),
        (ChartType.LINE, {Channel.X: EncodingSpec("x", lin),
                          Channel.Y: EncodingSpec("y", lin)}, data, ("click", "brush1d_x", "brush1d_y", "brush2d")),
        (ChartType.AREA, {Channel.X: EncodingSpec("grp", lin),
                          Channel.Y: EncodingSpec("y", lin, Aggregate.SUM)}, data, ("click", "brush1d_x")),
        (ChartType.AREA, {Channel.X: EncodingSpec("x", lin),
                          Channel.Y: EncodingSpec("y", lin)}, data, ("click", "brush1d_x", "brush1d_y", "brush2d")),
        (ChartType.SCATTER, {Channel.X: EncodingSpec("x", lin),
                             Channel.Y: EncodingSpec("y", lin)}, data, ("click", "brush1d_x", "brush1d_y", "brush2d")),
        (ChartType.PIE, {Channel.THETA: EncodingSpec("cat", lin, Aggregate.COUNT),
                         Channel.COLOR: EncodingSpec("cat", ord_)}, data, ("click",)),
        (ChartType.PIE, {Channel.THETA: EncodingSpec("n", lin),
                         Channel.COLOR: EncodingSpec("cat", ord_)}, agg_slice, ("click", "brush1d_theta")),
        (ChartType.TABLE, {Channel.ROW_LABEL: EncodingSpec("x", lin)}, data, ("click", "brush1d_row_label")),
    ]


def test_acceptance_bidirectional_round_trip():
    rng = random.Random(31415)
    covered_types: set[str] = set()
    covered_kinds: set[str] = set()
    mismatches = 0
    trials = 0
    while trials < 1000:
        data = _random_slice(rng, rng.choice((20, 80, 300, 1000, 2500)))
        variants = _figure_variants(data)
        chart_type, encodings, slice_, allowed = variants[rng.randrange(len(variants))]
        chart = ChartDoc(chart_type, encodings)
        marks, mark_map = materialize_marks(chart, slice_)
        chart = ChartDoc(chart_type, encodings, marks=marks)
        gesture = rng.choice(allowed)

        if gesture == "click":
            k = rng.randint(1, min(3, len(marks)))
            ids = tuple(m.mark_id for m in rng.sample(list(marks), k))
            ev = InteractionEvent("f", GestureKind.CLICK, mark_ids=ids)
        elif gesture.startswith("brush1d"):
            channel = Channel(gesture.split("_", 1)[1])
            lo, hi = sorted((rng.uniform(-60, 60), rng.uniform(-60, 60)))
            if channel in (Channel.THETA,):
                lo, hi = sorted((rng.uniform(0, len(slice_.rows)), rng.uniform(0, len(slice_.rows))))
            ev = InteractionEvent("f", GestureKind.BRUSH_1D, channel=channel, lo=lo, hi=hi)
        else:
            x_lo, x_hi = sorted((rng.uniform(-60, 60), rng.uniform(-60, 60)))
            y_lo, y_hi = sorted((rng.uniform(-60, 60), rng.uniform(-60, 60)))
            ev = InteractionEvent("f", GestureKind.BRUSH_2D, x_lo=x_lo, x_hi=x_hi, y_lo=y_lo, y_hi=y_hi)

        from figstate.compiler.interactions import interaction_to_predicate

        predicate = interaction_to_predicate(ev, mark_map, chart)
        selected = frozenset(
            env["__row_key"] for env in slice_.iter_envs() if predicate.matches(env)
        )
        if selected != geometric_selection(ev, chart):
            mismatches += 1
        covered_types.add(chart_type.value)
        covered_kinds.add(ev.kind.value)
        trials += 1

    assert covered_types == {"bar", "line", "scatter", "pie", "area", "table"}
    assert covered_kinds == {"click", "brush1d", "brush2d"}
    assert mismatches == 0
    print(f"\nACCEPTANCE bidirectional-round-trip: PASS (1000 pairs, 0 mismatches)")


# --- 3. coordination equivalence ---------------------------------------------------------


def test_acceptance_coordination_equivalence():
    catalog = mini_climate_catalog()
    rng = random.Random(777)
    line = build_figure(
        [SelectTable("temps"),
         AddChartType(ChartType.LINE), AddData(),
         AddEncoding(Channel.X, EncodingSpec("month", Scale.LINEAR)),
         AddEncoding(Channel.Y, EncodingSpec("temp", Scale.LINEAR, Aggregate.MEAN))],
        catalog, "f1", "a1", "line",
    )
    steps = [
        SelectTable("temps"),
        AggregateRows(("state",), (AggSpec(Aggregate.MEAN, "temp"),)),
        SortLimit((SortKey("temp_mean", descending=True),)),
        AddChartType(ChartType.BAR), AddData(),
        AddEncoding(Channel.X, EncodingSpec("state", Scale.ORDINAL)),
        AddEncoding(Channel.Y, EncodingSpec("temp_mean", Scale.LINEAR)),
    ]
    seed_ev = InteractionEvent("f1", GestureKind.BRUSH_1D, channel=Channel.X, lo=5.6, hi=8.4)
    target, _ = extend_from_selection(line, seed_ev, steps, catalog, "f2", "ranking")
    schema = record_schema(line, target, seed_ev, catalog)

    mismatches = 0
    current = target
    for trial in range(300):
        if rng.random() < 0.5:
            lo_m, hi_m = sorted(rng.sample(range(1, 13), 2))
            ev = InteractionEvent("f1", GestureKind.BRUSH_1D, channel=Channel.X,
                                  lo=lo_m - 0.3, hi=hi_m + 0.3)
        else:
            months = {float(m) for m in rng.sample(range(1, 13), k=rng.randint(1, 4))}
            ev = month_click_event(line, months)
        result = propagate(schema, ev, line, current, catalog)
        fresh, _ = extend_from_selection(line, ev, steps, catalog, "f2", "fresh")
        if result.figure.data.digest != fresh.data.digest or result.figure.visualization != fresh.visualization:
            mismatches += 1
        current = result.figure
    assert mismatches == 0
    print(f"\nACCEPTANCE coordination-equivalence: PASS (300 propagations, 0 mismatches)")


# --- 4. engine vs oracle -------------------------------------------------------------------


def test_acceptance_engine_vs_oracle(demo):
    from figstate.compiler.pipeline import compile_to_query
    from figstate.engine.executor import execute_plan

    cases = generate_suite(demo)
    assert len(cases) == 60
    checked = 0
    failures = []
    for case in cases:
        steps = [
            ("initial", case.initial_oracle_actions, case.initial_oracle_digest),
            ("followup", case.followup_oracle_actions, case.followup_oracle_digest),
        ]
        if case.coordination_gesture is not None:
            steps.append(("coordination", case.coordination_oracle_actions, case.coordination_oracle_digest))
        for phase, actions, digest in steps:
            plan = compile_to_query(actions, demo.schema_map())
            produced = execute_plan(plan, demo)
            checked += 1
            if not compare_results(produced, digest):
                failures.append((case.case_id, phase))
    assert not failures, failures
    print(f"\nACCEPTANCE engine-vs-oracle: PASS ({checked} plans over 60 cases, 100% match)")


# --- 5. the climate walkthrough -------------------------------------------------------------


def test_acceptance_climate_walkthrough(demo):
    runtime = Runtime(demo, synonyms={"temperature": "temp"})
    session = runtime.create_session(session_id="walkthrough")

    # (a) the Florida line with 12 vertices
    first = runtime.post_message(
        "walkthrough",
        text="plot mean of temp by month for state Florida and year from 2014 to 2024 as line",
    )
    figure_id = first.figure_ids[0]
    line = runtime.ledger.find_figure(figure_id)[1]
    assert line.visualization.chart_type is ChartType.LINE
    assert len(line.visualization.marks) == 12

    # (b) summer brush + state ranking: 50 bars ordered like the oracle
    summer = runtime.post_message(
        "walkthrough", text="rank state by mean temp as bar",
        interaction=InteractionEvent(figure_id, GestureKind.BRUSH_1D,
                                     channel=Channel.X, lo=5.6, hi=8.4),
    )
    ranking_id = summer.figure_ids[0]
    ranking = runtime.ledger.find_figure(ranking_id)[1]
    assert len(ranking.visualization.marks) == 50
    raw = [r for r in make_climate_rows() if r[2] in (6.0, 7.0, 8.0)]
    oracle = brute_force_group_mean(raw, group_idx=0, value_idx=3)
    expected = sorted(oracle, key=lambda s: -oracle[s])
    assert [m.channel_values[Channel.X] for m in ranking.visualization.marks] == expected

    # (c) winter re-selection propagates to the oracle winter ranking
    source = runtime.ledger.find_figure(figure_id)[1]
    outcome = runtime.post_gesture(figure_id, month_click_event(source, {12.0, 1.0, 2.0}))
    assert outcome.updated_figures == (ranking_id,)
    updated = runtime.ledger.find_figure(ranking_id)[1]
    assert updated.meta.operation is Operation.COORDINATE_UPDATE
    raw = [r for r in make_climate_rows() if r[2] in (12.0, 1.0, 2.0)]
    oracle = brute_force_group_mean(raw, group_idx=0, value_idx=3)
    expected = sorted(oracle, key=lambda s: -oracle[s])
    assert [m.channel_values[Channel.X] for m in updated.visualization.marks] == expected
    print("\nACCEPTANCE climate-walkthrough: PASS (line, summer ranking, winter coordinate-update)")


# --- 6. agent-loop robustness ----------------------------------------------------------------


def _fault_backends(rng: random.Random):
    good_actions = (
        SelectTable("temps"), AddChartType(ChartType.TABLE), AddData(),
        AddEncoding(Channel.ROW_LABEL, EncodingSpec("state", Scale.ORDINAL)),
    )
    bad_column = dataclasses.replace(
        Proposal(good_actions, "good", "generate",
                 RequestFacts("list_rows", ChartType.TABLE, (), is_filter=True)),
        actions=(SelectTable("temps"), AddChartType(ChartType.TABLE), AddData(),
                 AddEncoding(Channel.ROW_LABEL, EncodingSpec("missing_col", Scale.ORDINAL))),
    )
    good = Proposal(good_actions, "good", "generate",
                    RequestFacts("list_rows", ChartType.TABLE, (), is_filter=True))
    empty_result = Proposal(
        (SelectTable("temps"),
         FilterRows(Predicate((Membership("state", ("Nowhere",)),))),
         AddChartType(ChartType.BAR), AddData(),
         AddEncoding(Channel.X, EncodingSpec("state", Scale.ORDINAL)),
         AddEncoding(Channel.Y, EncodingSpec("temp", Scale.LINEAR, Aggregate.MEAN))),
        "empty", "generate", None,
    )
    unknown_table = Proposal(
        (SelectTable("never_registered"), AddChartType(ChartType.TABLE), AddData(),
         AddEncoding(Channel.ROW_LABEL, EncodingSpec("state", Scale.ORDINAL))),
        "bad table", "generate", None,
    )
    oversized = Proposal(good_actions * 4, "oversized", "generate", None)

    flavors = [
        ScriptedBackend([[bad_column, good]]),
        ScriptedBackend([[unknown_table]], repeat_last=True),
        ScriptedBackend([[empty_result]], repeat_last=True),
        ScriptedBackend([[oversized]], repeat_last=True),
        ScriptedBackend([[bad_column], [empty_result], [good]]),
        ScriptedBackend([[]], repeat_last=True),
    ]
    return flavors[rng.randrange(len(flavors))]


def test_acceptance_agent_loop_robustness():
    catalog = mini_climate_catalog()
    rng = random.Random(606)
    config = LoopConfig(budget=8, max_depth=4, retries=1)
    incomplete = 0
    for trial in range(500):
        runtime = Runtime(catalog, loop_config=config)
        session = runtime.create_session(session_id=f"t{trial}")
        session.backend = _fault_backends(rng)
        ledger_before = _ledger_fingerprint(runtime.ledger)
        try:
            outcome = runtime.post_message(f"t{trial}", text="anything")
            head = runtime.ledger.artifact(outcome.artifact_id).head_version
            report = runtime.ledger.replay_artifact(head, catalog)
            assert report.all_match()  # committed versions are never partial
        except (BudgetExhausted, AllBranchesFailed):
            assert _ledger_fingerprint(runtime.ledger) == ledger_before
        except FigstateError:
            incomplete += 1
    assert incomplete == 0
    print("\nACCEPTANCE agent-loop-robustness: PASS (500 trials, all terminated, no partial commits)")


def _ledger_fingerprint(ledger: VersionLedger) -> str:
    return json.dumps(sorted(ledger.nodes), sort_keys=True)


# --- 7. ledger integrity ------------------------------------------------------------------------


def test_acceptance_ledger_integrity(tmp_path):
    catalog = mini_climate_catalog()
    variants = []
    for i, state in enumerate(MINI_STATES[:6]):
        variants.append(build_figure(
            [SelectTable("temps"),
             FilterRows(Predicate((Membership("state", (state,)),))),
             AddChartType(ChartType.TABLE), AddData(),
             AddEncoding(Channel.ROW_LABEL, EncodingSpec("state", Scale.ORDINAL))],
            catalog, "f1", "a1", f"table {state}",
        ))

    ledger = VersionLedger()
    rng = random.Random(99)
    first_seen: dict[str, str] = {}
    versions: list[str] = []
    ops = 0
    while ops < 10_000:
        op = rng.random()
        if op < 0.55 or not versions:
            fig = variants[rng.randrange(len(variants))]
            parent = rng.choice(versions) if versions and rng.random() < 0.4 else None
            snapshot = ArtifactSnapshot("a1", UserInputRecord(f"in{ops}", raw_text="x"), (fig,))
            v = ledger.commit(snapshot, UserInputRecord(f"in{ops}", raw_text="x"), parent=parent)
            if v not in first_seen:
                first_seen[v] = json.dumps(snapshot_to_jsonable(ledger.checkout(v)), sort_keys=True)
            versions.append(v)
        else:
            v = rng.choice(versions)
            snapshot = ledger.checkout(v)
            # immutability: the snapshot bytes never change after first sight
            assert json.dumps(snapshot_to_jsonable(snapshot), sort_keys=True) == first_seen[v]
        ops += 1

    ledger.check_integrity()

    # end-to-end immutability sweep
    for v, frozen in first_seen.items():
        assert json.dumps(snapshot_to_jsonable(ledger.checkout(v)), sort_keys=True) == frozen

    from figstate.ledger.store import load_ledger, save_ledger

    path = tmp_path / "ledger.db"
    save_ledger(ledger, path)
    loaded = load_ledger(path)
    loaded.check_integrity()
    assert set(loaded.nodes) == set(ledger.nodes)
    print(f"\nACCEPTANCE ledger-integrity: PASS (10000 ops, DAG + immutability + 7-table integrity)")
