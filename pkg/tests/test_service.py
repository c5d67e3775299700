"""Service API: endpoints, SSE stream, time travel, error mapping."""

from __future__ import annotations

import json
import socket
import threading
import time

import pytest
import requests
import uvicorn
from fastapi.testclient import TestClient

from conftest import LIFECYCLE
from mdtdebate import wire
from mdtdebate.events import Event
from mdtdebate.service import ServiceConfig, create_app
from mdtdebate.state import fold_events
from mdtdebate.views import state_doc

CASE_DOC = json.loads((LIFECYCLE / "case.json").read_text())
AGENTS_DOC = json.loads((LIFECYCLE / "agents.json").read_text())


def make_client(tmp_path, auto_advance=False, heartbeat=15.0, fixtures=None) -> TestClient:
    config = ServiceConfig(
        transport_mode="scripted",
        fixtures_dir=str(fixtures or (LIFECYCLE / "replies")),
        data_dir=str(tmp_path / "data"),
        heartbeat_interval=heartbeat,
        auto_advance=auto_advance,
    )
    return TestClient(create_app(config))


def create_session(client, config_overrides=None) -> dict:
    body = {"case": CASE_DOC, "agents": AGENTS_DOC}
    if config_overrides:
        body["config"] = config_overrides
    resp = client.post("/api/v1/sessions", json=body)
    assert resp.status_code == 201, resp.text
    return resp.json()


class _live_server:
    """uvicorn in a daemon thread on an ephemeral port."""

    def __init__(self, config: ServiceConfig):
        self.app = create_app(config)
        with socket.socket() as s:
            s.bind(("127.0.0.1", 0))
            self.port = s.getsockname()[1]
        self.server = uvicorn.Server(
            uvicorn.Config(self.app, host="127.0.0.1", port=self.port, log_level="error")
        )

    def __enter__(self) -> str:
        self.thread = threading.Thread(target=self.server.run, daemon=True)
        self.thread.start()
        deadline = time.monotonic() + 10
        while not self.server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("server did not start")
            time.sleep(0.01)
        return f"http://127.0.0.1:{self.port}"

    def __exit__(self, *exc) -> None:
        self.server.should_exit = True
        self.thread.join(timeout=5)


def read_frames(client, session_id, from_seq=0, tail=False):
    frames = []
    with client.stream(
        "GET", f"/api/v1/sessions/{session_id}/events",
        params={"from": from_seq, "tail": "1" if tail else "0"},
    ) as resp:
        assert resp.status_code == 200
        current_id = None
        for line in resp.iter_lines():
            if line.startswith("id: "):
                current_id = int(line[4:])
            elif line.startswith("data: ") and current_id is not None:
                frames.append((current_id, json.loads(line[6:])))
                current_id = None
    return frames


class TestSessionCreation:
    def test_create_returns_id_stream_url_and_runs_initial_round(self, tmp_path):
        with make_client(tmp_path) as client:
            created = create_session(client)
            assert created["session_id"].startswith("s-")
            assert created["stream_url"].endswith("/events")
            state = client.get(f"/api/v1/sessions/{created['session_id']}/views/state").json()
            assert len(state["rounds"]) == 1
            assert state["rounds"][0]["kind"] == "initial"

    def test_one_agent_is_400_too_few(self, tmp_path):
        with make_client(tmp_path) as client:
            resp = client.post("/api/v1/sessions", json={"case": CASE_DOC, "agents": AGENTS_DOC[:1]})
            assert resp.status_code == 400
            assert resp.json()["code"] == "TooFewAgents"

    def test_missing_fixture_is_503_and_session_stays_with_zero_rounds(self, tmp_path):
        empty = tmp_path / "nofixtures"
        empty.mkdir()
        with make_client(tmp_path, fixtures=empty) as client:
            resp = client.post("/api/v1/sessions", json={"case": CASE_DOC, "agents": AGENTS_DOC})
            assert resp.status_code == 503
            body = resp.json()
            assert body["code"] == "TransportDown"
            state = client.get(f"/api/v1/sessions/{body['session_id']}/views/state").json()
            assert state["rounds"] == []

    def test_auto_advance_runs_debate_rounds(self, tmp_path):
        with make_client(tmp_path, auto_advance=True) as client:
            created = create_session(client)
            deadline = time.monotonic() + 5
            while time.monotonic() < deadline:
                state = client.get(f"/api/v1/sessions/{created['session_id']}/views/state").json()
                if len(state["rounds"]) >= 3:
                    break
                time.sleep(0.02)
            assert len(state["rounds"]) == 3  # budget: initial + 2 debate


class TestStream:
    def test_replay_from_zero(self, tmp_path):
        with make_client(tmp_path) as client:
            created = create_session(client)
            frames = read_frames(client, created["session_id"])
            assert [seq for seq, _ in frames] == list(range(1, created["seq"] + 1))
            assert frames[0][1]["kind"] == "SessionCreated"

    def test_resume_from_midpoint(self, tmp_path):
        with make_client(tmp_path) as client:
            created = create_session(client)
            frames = read_frames(client, created["session_id"], from_seq=3)
            assert [seq for seq, _ in frames] == list(range(4, created["seq"] + 1))

    def test_unknown_session_404(self, tmp_path):
        with make_client(tmp_path) as client:
            resp = client.get("/api/v1/sessions/s-ghost/events")
            assert resp.status_code == 404

    def test_from_beyond_latest_416(self, tmp_path):
        with make_client(tmp_path) as client:
            created = create_session(client)
            resp = client.get(
                f"/api/v1/sessions/{created['session_id']}/events",
                params={"from": created["seq"] + 100, "tail": "0"},
            )
            assert resp.status_code == 416

    def test_tail_delivers_heartbeats_and_new_events(self, tmp_path):
        """True streaming (replay, heartbeat, live frame) over a real server;
        the in-process test transport buffers responses and cannot tail."""
        config = ServiceConfig(
            transport_mode="scripted",
            fixtures_dir=str(LIFECYCLE / "replies"),
            heartbeat_interval=0.05,
            auto_advance=False,
        )
        with _live_server(config) as base:
            created = requests.post(
                f"{base}/api/v1/sessions", json={"case": CASE_DOC, "agents": AGENTS_DOC}, timeout=10
            ).json()
            sid = created["session_id"]

            def poster():
                time.sleep(0.3)
                requests.post(
                    f"{base}/api/v1/sessions/{sid}/interventions",
                    json={"items": ["i4"], "instruction": "go", "targets": ["d3"]},
                    timeout=10,
                )

            threading.Thread(target=poster, daemon=True).start()
            got_heartbeat = False
            new_event_seq = 0
            with requests.get(
                f"{base}/api/v1/sessions/{sid}/events", params={"from": 0}, stream=True, timeout=10
            ) as resp:
                assert resp.headers["content-type"].startswith("text/event-stream")
                for raw in resp.iter_lines():
                    line = raw.decode("utf-8")
                    if line.startswith("event: heartbeat"):
                        got_heartbeat = True
                    elif line.startswith("id: "):
                        new_event_seq = int(line[4:])
                        if got_heartbeat and new_event_seq > created["seq"]:
                            break
            assert got_heartbeat
            assert new_event_seq > created["seq"]

    def test_stream_rest_coherence(self, tmp_path):
        """A client folding frames 1..s reconstructs the /views/state?at=s doc."""
        with make_client(tmp_path) as client:
            created = create_session(client)
            sid = created["session_id"]
            client.post(
                f"/api/v1/sessions/{sid}/interventions",
                json={"items": ["i4"], "instruction": "go", "targets": ["d3"]},
            )
            frames = read_frames(client, sid)
            events = [
                Event(seq=doc["seq"], ts=doc["ts"], kind=doc["kind"], payload=doc["payload"])
                for _, doc in frames
            ]
            folded = fold_events(events)
            served = client.get(
                f"/api/v1/sessions/{sid}/views/state", params={"at": events[-1].seq}
            ).json()
            assert wire.dumps(state_doc(folded)) == wire.dumps(served)


class TestActions:
    def test_intervention_returns_round_and_read_your_writes(self, tmp_path):
        with make_client(tmp_path) as client:
            created = create_session(client)
            sid = created["session_id"]
            resp = client.post(
                f"/api/v1/sessions/{sid}/interventions",
                json={"items": ["i4"], "instruction": "reweigh", "targets": ["d3"]},
            )
            assert resp.status_code == 200
            body = resp.json()
            assert body["round_index"] == 1
            state = client.get(f"/api/v1/sessions/{sid}/views/state", params={"at": body["seq"]}).json()
            assert len(state["rounds"]) == 2
            assert state["rounds"][1]["kind"] == "revision"

    def test_reeval_on_resolved_conflict_409(self, tmp_path):
        with make_client(tmp_path, auto_advance=True) as client:
            created = create_session(client)
            sid = created["session_id"]
            deadline = time.monotonic() + 5
            while time.monotonic() < deadline:
                state = client.get(f"/api/v1/sessions/{sid}/views/state").json()
                if len(state["rounds"]) >= 3:
                    break
                time.sleep(0.02)
            # resolve c1 via the targeted revision
            client.post(
                f"/api/v1/sessions/{sid}/interventions",
                json={"items": ["i4"], "instruction": "reconsider", "targets": ["d3"]},
            )
            resp = client.post(f"/api/v1/sessions/{sid}/conflicts/c1/reeval")
            assert resp.status_code == 409
            assert resp.json()["code"] == "ConflictAlreadyResolved"

    def test_pause_then_intervention_is_409_wrong_phase(self, tmp_path):
        with make_client(tmp_path) as client:
            created = create_session(client)
            sid = created["session_id"]
            assert client.post(f"/api/v1/sessions/{sid}/control", json={"action": "pause"}).status_code == 200
            resp = client.post(
                f"/api/v1/sessions/{sid}/interventions",
                json={"items": ["i4"], "instruction": "x", "targets": ["d3"]},
            )
            assert resp.status_code == 409
            assert resp.json()["code"] == "WrongPhase"

    def test_mute_control(self, tmp_path):
        with make_client(tmp_path) as client:
            created = create_session(client)
            sid = created["session_id"]
            resp = client.post(f"/api/v1/sessions/{sid}/control", json={"action": "mute", "agent_id": "d4"})
            assert resp.status_code == 200
            assert resp.json()["muted_agents"] == ["d4"]

    def test_case_edit_endpoint(self, tmp_path):
        with make_client(tmp_path) as client:
            created = create_session(client)
            sid = created["session_id"]
            resp = client.post(
                f"/api/v1/sessions/{sid}/case-edits",
                json={"kind": "add", "category": "Labs", "label": "ANA", "value": "1:320"},
            )
            assert resp.status_code == 200
            case = resp.json()["case"]
            assert case["revision"] == 1
            assert case["items"][-1]["label"] == "ANA"

    def test_case_edit_remove_cited_item_409(self, tmp_path):
        with make_client(tmp_path) as client:
            created = create_session(client)
            sid = created["session_id"]
            resp = client.post(f"/api/v1/sessions/{sid}/case-edits", json={"kind": "remove", "target": "i2"})
            assert resp.status_code == 409
            assert resp.json()["code"] == "ItemInUse"


class TestViews:
    def test_flow_on_single_round_is_409_too_few(self, tmp_path):
        with make_client(tmp_path) as client:
            created = create_session(client)
            resp = client.get(f"/api/v1/sessions/{created['session_id']}/views/flow")
            assert resp.status_code == 409
            assert resp.json()["code"] == "TooFewRounds"

    def test_round_view_pinned_at_boundary_equals_live_retrieval(self, tmp_path):
        with make_client(tmp_path) as client:
            created = create_session(client)
            sid = created["session_id"]
            live_doc = client.get(f"/api/v1/sessions/{sid}/views/round", params={"i": 0}).json()
            boundary = created["seq"]
            client.post(
                f"/api/v1/sessions/{sid}/interventions",
                json={"items": ["i4"], "instruction": "go", "targets": ["d3"]},
            )
            pinned = client.get(
                f"/api/v1/sessions/{sid}/views/round", params={"i": 0, "at": boundary}
            ).json()
            assert wire.dumps(pinned) == wire.dumps(live_doc)

    def test_conflicts_view_sorted_and_flagged(self, tmp_path):
        with make_client(tmp_path, auto_advance=True) as client:
            created = create_session(client)
            sid = created["session_id"]
            deadline = time.monotonic() + 5
            while time.monotonic() < deadline:
                doc = client.get(f"/api/v1/sessions/{sid}/views/conflicts").json()
                if doc["active"]:
                    break
                time.sleep(0.02)
            assert [c["conflict_id"] for c in doc["active"]] == ["c1"]
            assert doc["active"][0]["hypothesis_pair"] == ["h1", "h2"]
            assert doc["active"][0]["comparison"]["rows"][0]["item_id"] == "i4"

    def test_provenance_view_flags(self, tmp_path):
        with make_client(tmp_path) as client:
            created = create_session(client)
            doc = client.get(f"/api/v1/sessions/{created['session_id']}/views/provenance").json()
            by_id = {row["id"]: row for row in doc["items"]}
            assert by_id["i4"]["flag"] == "none"  # no conflict at round 0
            assert {b["agent_id"] for b in by_id["i2"]["badges"]} == {"d1", "d2", "d4"}

    def test_consensus_view(self, tmp_path):
        with make_client(tmp_path) as client:
            created = create_session(client)
            doc = client.get(f"/api/v1/sessions/{created['session_id']}/views/consensus").json()
            assert doc["consensus"]["converged"] is False
            assert doc["consensus"]["support_share"] == 0.75

    def test_unknown_view_404(self, tmp_path):
        with make_client(tmp_path) as client:
            created = create_session(client)
            resp = client.get(f"/api/v1/sessions/{created['session_id']}/views/nonsense")
            assert resp.status_code == 404


class TestConfigFile:
    def test_load_json_config(self, tmp_path):
        p = tmp_path / "svc.json"
        p.write_text(json.dumps({
            "transport_mode": "scripted",
            "fixtures_dir": "/tmp/fx",
            "debate": {"max_debate_rounds": 5},
            "live": {"base_url": "http://example", "model": "m", "api_key_env": "KEY"},
        }))
        config = ServiceConfig.load(p)
        assert config.default_debate.max_debate_rounds == 5
        assert config.fixtures_dir == "/tmp/fx"
        assert config.live_api_key_env == "KEY"

    def test_load_toml_config(self, tmp_path):
        p = tmp_path / "svc.toml"
        p.write_text(
            'transport_mode = "scripted"\nfixtures_dir = "/tmp/fx"\n\n[debate]\nconsensus_threshold = 0.75\n'
        )
        config = ServiceConfig.load(p)
        assert config.default_debate.consensus_threshold == 0.75

    def test_scripted_mode_requires_fixtures(self):
        with pytest.raises(ValueError):
            ServiceConfig(transport_mode="scripted", fixtures_dir=None).validate()
