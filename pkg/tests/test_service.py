from __future__ import annotations

import json
import zipfile
from concurrent.futures import ThreadPoolExecutor

import pytest
from fastapi.testclient import TestClient

from figstate.demo import demo_catalog
from figstate.ledger.versions import snapshot_to_jsonable
from figstate.runtime import Runtime
from figstate.service import create_app

FLORIDA_LINE = "plot mean of temp by month for state Florida and year from 2014 to 2024 as line"
RANKING = "rank state by mean temp as bar"


@pytest.fixture()
def runtime():
    return Runtime(demo_catalog())


@pytest.fixture()
def client(runtime):
    return TestClient(create_app(runtime), raise_server_exceptions=False)


def parse_sse(text: str) -> list[dict]:
    events = []
    for block in text.strip().split("\n\n"):
        lines = block.splitlines()
        data = next((l[6:] for l in lines if l.startswith("data: ")), None)
        if data:
            events.append(json.loads(data))
    return events


def send_message(client, session_id, **body) -> list[dict]:
    with client.stream("POST", f"/api/v1/sessions/{session_id}/messages", json=body) as response:
        assert response.status_code == 200
        text = "".join(chunk for chunk in response.iter_text())
    return parse_sse(text)


def send_gesture(client, figure_id, **body) -> list[dict]:
    with client.stream("POST", f"/api/v1/figures/{figure_id}/gestures", json=body) as response:
        assert response.status_code == 200
        text = "".join(chunk for chunk in response.iter_text())
    return parse_sse(text)


def make_session(client) -> str:
    response = client.post("/api/v1/sessions", json={})
    assert response.status_code == 200
    return response.json()["session_id"]


class TestSessions:
    def test_create_and_get(self, client):
        sid = make_session(client)
        got = client.get(f"/api/v1/sessions/{sid}")
        assert got.status_code == 200
        assert got.json()["backend"] == "deterministic"

    def test_unknown_session_404(self, client):
        assert client.get("/api/v1/sessions/nope").status_code == 404

    def test_invalid_backend_400(self, client):
        response = client.post("/api/v1/sessions", json={"backend": "quantum"})
        assert response.status_code == 400
        assert "error" in response.json()

    def test_concurrent_creations_distinct_ids(self, client):
        with ThreadPoolExecutor(max_workers=16) as pool:
            ids = list(pool.map(lambda _: make_session(client), range(100)))
        assert len(set(ids)) == 100


class TestMessages:
    def test_climate_question_streams_to_done(self, runtime, client):
        sid = make_session(client)
        events = parse = send_message(client, sid, text=FLORIDA_LINE)
        kinds = [e["kind"] for e in events]
        assert kinds[-1] == "done"
        assert "figure_ready" in kinds
        assert kinds.count("done") + kinds.count("error") == 1
        sequences = [e["sequence"] for e in events]
        assert sequences == list(range(len(events)))

        done = events[-1]["payload"]
        artifact = runtime.ledger.artifact(done["artifact_id"])
        assert artifact.head_version == done["version_id"]
        assert len(artifact.figure_ids) == 1

    def test_brush_followup_creates_coordinated_figure(self, runtime, client):
        sid = make_session(client)
        events = send_message(client, sid, text=FLORIDA_LINE)
        figure_id = events[-1]["payload"]["figure_ids"][0]

        events = send_message(
            client, sid, text=RANKING,
            interaction={"figure_id": figure_id, "kind": "brush1d", "channel": "x", "lo": 5.6, "hi": 8.4},
        )
        done = events[-1]
        assert done["kind"] == "done"
        new_figure = done["payload"]["figure_ids"][0]
        artifact = runtime.ledger.artifact(done["payload"]["artifact_id"])
        assert set(artifact.figure_ids) == {figure_id, new_figure}
        assert len(artifact.coordination_edges) == 1

    def test_malformed_brush_is_422_and_leaves_ledger_alone(self, runtime, client):
        sid = make_session(client)
        events = send_message(client, sid, text=FLORIDA_LINE)
        figure_id = events[-1]["payload"]["figure_ids"][0]
        before = _ledger_key(runtime)
        response = client.post(
            f"/api/v1/sessions/{sid}/messages",
            json={"text": RANKING,
                  "interaction": {"figure_id": figure_id, "kind": "brush1d",
                                   "channel": "x", "lo": 9.0, "hi": 2.0}},
        )
        assert response.status_code == 422
        assert _ledger_key(runtime) == before

    def test_unparseable_question_streams_error_without_commit(self, runtime, client):
        sid = make_session(client)
        before = _ledger_key(runtime)
        events = send_message(client, sid, text="what is the meaning of life")
        assert events[-1]["kind"] == "error"
        assert sum(1 for e in events if e["kind"] in ("done", "error")) == 1
        assert _ledger_key(runtime) == before

    def test_second_request_while_in_flight_is_409(self, runtime, client):
        sid = make_session(client)
        session = runtime.get_session(sid)
        assert session.lock.acquire()
        try:
            response = client.post(f"/api/v1/sessions/{sid}/messages", json={"text": FLORIDA_LINE})
            assert response.status_code == 409
        finally:
            session.lock.release()

    def test_decompose_route_returns_subquestions(self, client):
        sid = make_session(client)
        events = send_message(
            client, sid,
            text="compare innovation across all departments over time and explain drivers",
        )
        assert events[-1]["kind"] == "done"
        assert len(events[-1]["payload"]["sub_questions"]) >= 2


class TestFigureEndpoints:
    def _figure(self, client) -> tuple[str, str]:
        sid = make_session(client)
        events = send_message(client, sid, text=FLORIDA_LINE)
        return sid, events[-1]["payload"]["figure_ids"][0]

    def test_bundle_is_replay_sufficient_and_stable(self, runtime, client):
        _, figure_id = self._figure(client)
        a = client.get(f"/api/v1/figures/{figure_id}/bundle")
        b = client.get(f"/api/v1/figures/{figure_id}/bundle")
        assert a.status_code == 200
        assert a.content == b.content
        bundle = a.json()
        assert bundle["query_text"].startswith("SELECT")
        assert bundle["data_csv"].splitlines()[0].startswith("__row_key,")
        # CSV digest must match the stored slice digest
        located = runtime.ledger.find_figure(figure_id)
        assert located[1].data.digest == bundle["data_digest"]

    def test_unknown_figure_404(self, client):
        assert client.get("/api/v1/figures/none/f9/bundle").status_code == 404

    def test_gesture_echo_without_schemas(self, client):
        _, figure_id = self._figure(client)
        events = send_gesture(client, figure_id, kind="brush1d", channel="x", lo=5.6, hi=8.4)
        done = events[-1]
        assert done["kind"] == "done"
        assert done["payload"]["updated_figures"] == []
        atoms = done["payload"]["predicate"]["atoms"]
        assert atoms == [{"kind": "range", "column": "month", "lo": 6.0, "hi": 8.0}]

    def test_winter_gesture_updates_linked_figure(self, runtime, client):
        sid, figure_id = self._figure(client)
        send_message(
            client, sid, text=RANKING,
            interaction={"figure_id": figure_id, "kind": "brush1d", "channel": "x", "lo": 5.6, "hi": 8.4},
        )
        located = runtime.ledger.find_figure(figure_id)
        source = located[1]
        winter_marks = [m.mark_id for m in source.visualization.marks
                        if m.channel_values[list(m.channel_values)[0]] in (12.0, 1.0, 2.0)]
        events = send_gesture(client, figure_id, kind="click", mark_ids=winter_marks)
        done = events[-1]
        assert done["payload"]["updated_figures"], events
        kinds = [e["kind"] for e in events]
        assert "figure_ready" in kinds

    def test_zero_row_gesture_is_nonfatal(self, runtime, client):
        sid, figure_id = self._figure(client)
        send_message(
            client, sid, text=RANKING,
            interaction={"figure_id": figure_id, "kind": "brush1d", "channel": "x", "lo": 5.6, "hi": 8.4},
        )
        artifact_id = runtime.ledger.find_figure(figure_id)[0]
        head_before = runtime.ledger.artifact(artifact_id).head_version
        events = send_gesture(client, figure_id, kind="brush1d", channel="x", lo=6.2, hi=6.8)
        done = events[-1]
        assert done["kind"] == "done"
        assert done["payload"]["updated_figures"] == []
        assert "note" in done["payload"]
        assert runtime.ledger.artifact(artifact_id).head_version == head_before


class TestArtifactEndpoints:
    def _artifact(self, runtime, client) -> str:
        sid = make_session(client)
        events = send_message(client, sid, text=FLORIDA_LINE)
        return events[-1]["payload"]["artifact_id"]

    def test_versions_listing(self, runtime, client):
        artifact_id = self._artifact(runtime, client)
        response = client.get(f"/api/v1/artifacts/{artifact_id}/versions")
        assert response.status_code == 200
        body = response.json()
        assert body["head_version"] == runtime.ledger.artifact(artifact_id).head_version
        assert len(body["versions"]) == 1

    def test_replay_endpoint_matches(self, runtime, client):
        artifact_id = self._artifact(runtime, client)
        response = client.post(f"/api/v1/artifacts/{artifact_id}/replay")
        assert response.status_code == 200
        assert response.json()["all_match"] is True

    def test_replay_unknown_404(self, client):
        assert client.post("/api/v1/artifacts/none/replay").status_code == 404

    def test_export_import_round_trip(self, runtime, client):
        artifact_id = self._artifact(runtime, client)
        exported = client.get(f"/api/v1/artifacts/{artifact_id}/export")
        assert exported.status_code == 200
        assert zipfile.ZipFile.__name__  # sanity: content is a zip
        fresh_runtime = Runtime(demo_catalog())
        fresh_client = TestClient(create_app(fresh_runtime), raise_server_exceptions=False)
        imported = fresh_client.post("/api/v1/artifacts/import", content=exported.content)
        assert imported.status_code == 200
        assert imported.json()["artifact_id"] == artifact_id
        replay = fresh_client.post(f"/api/v1/artifacts/{artifact_id}/replay")
        assert replay.json()["all_match"] is True

    def test_gets_are_side_effect_free(self, runtime, client):
        artifact_id = self._artifact(runtime, client)
        before = _ledger_key(runtime)
        figure_id = runtime.ledger.artifact(artifact_id).figure_ids[0]
        client.get(f"/api/v1/sessions/{artifact_id.split('/')[0]}")
        client.get(f"/api/v1/figures/{figure_id}/bundle")
        client.get(f"/api/v1/artifacts/{artifact_id}/versions")
        client.get(f"/api/v1/artifacts/{artifact_id}/export")
        assert _ledger_key(runtime) == before


def _ledger_key(runtime) -> str:
    parts = []
    for version_id in sorted(runtime.ledger.nodes):
        parts.append(version_id)
        parts.append(json.dumps(snapshot_to_jsonable(runtime.ledger.nodes[version_id].snapshot), sort_keys=True))
    return json.dumps(parts)


def test_openapi_description_is_committed(client, tmp_path):
    committed = json.loads((__import__("pathlib").Path(__file__).parent.parent / "docs" / "openapi.json").read_text())
    live = client.get("/openapi.json").json()
    assert committed == live
