"""Regenerate the UI test fixtures by driving the real service API.

Runs the lifecycle scenario through the HTTP surface (session creation,
auto-advanced debate rounds, the clinician intervention) and dumps the event
frames plus every round boundary's view documents exactly as served.

Usage: python tools/make_fixtures.py  (from frontend/, with mdtdebate installed)
"""

from __future__ import annotations

import json
import time
from pathlib import Path

from fastapi.testclient import TestClient

from mdtdebate.service import ServiceConfig, create_app

FRONTEND = Path(__file__).resolve().parent.parent
LIFECYCLE = FRONTEND.parent / "tests" / "fixtures" / "lifecycle"
OUT = FRONTEND / "tests" / "fixtures"

VIEW_NAMES = ("state", "conflicts", "provenance", "consensus")


def main() -> None:
    config = ServiceConfig(
        transport_mode="scripted",
        fixtures_dir=str(LIFECYCLE / "replies"),
        auto_advance=True,
        fixed_clock_epoch=1704067200.0,
    )
    case = json.loads((LIFECYCLE / "case.json").read_text())
    agents = json.loads((LIFECYCLE / "agents.json").read_text())

    with TestClient(create_app(config)) as client:
        created = client.post("/api/v1/sessions", json={"case": case, "agents": agents})
        assert created.status_code == 201, created.text
        sid = created.json()["session_id"]

        deadline = time.monotonic() + 10
        while time.monotonic() < deadline:
            state = client.get(f"/api/v1/sessions/{sid}/views/state").json()
            if len(state["rounds"]) >= 3:
                break
            time.sleep(0.02)
        assert len(state["rounds"]) == 3, "debate rounds did not auto-advance"

        resp = client.post(
            f"/api/v1/sessions/{sid}/interventions",
            json={
                "items": ["i4"],
                "instruction": (
                    "CRP elevation is nonspecific here and the bone-marrow biopsy "
                    "was negative; weigh lymphoma lower."
                ),
                "targets": ["d3"],
            },
        )
        assert resp.status_code == 200, resp.text

        frames = []
        with client.stream(
            "GET", f"/api/v1/sessions/{sid}/events", params={"from": 0, "tail": "0"}
        ) as stream:
            for line in stream.iter_lines():
                if line.startswith("data: "):
                    frames.append(json.loads(line[6:]))
        (OUT / "frames.json").write_text(json.dumps(frames, indent=1) + "\n")

        boundaries = {
            str(f["payload"]["round_index"]): f["seq"]
            for f in frames
            if f["kind"] == "RoundCommitted"
        }
        (OUT / "boundaries.json").write_text(json.dumps(boundaries, indent=1) + "\n")

        views: dict[str, dict] = {}
        for seq in sorted(set(boundaries.values())):
            per_seq = {}
            for name in VIEW_NAMES:
                doc = client.get(
                    f"/api/v1/sessions/{sid}/views/{name}", params={"at": seq}
                )
                assert doc.status_code == 200, (name, seq, doc.text)
                per_seq[name] = doc.json()
            flow = client.get(f"/api/v1/sessions/{sid}/views/flow", params={"at": seq})
            per_seq["flow"] = flow.json() if flow.status_code == 200 else None
            views[str(seq)] = per_seq
        (OUT / "views_by_seq.json").write_text(json.dumps(views, indent=1) + "\n")
        (OUT / "session.json").write_text(
            json.dumps({"session_id": sid, "final_seq": frames[-1]["seq"]}, indent=1) + "\n"
        )
    print(f"wrote fixtures for {sid}: {len(frames)} frames, {len(boundaries)} boundaries")


if __name__ == "__main__":
    main()
