from __future__ import annotations

import json
from pathlib import Path

import pytest

from mdtdebate.case import CaseItem, CaseRecord
from mdtdebate.engine import DebateEngine
from mdtdebate.events import fixed_clock
from mdtdebate.model import AgentProfile, DebateConfig

FIXTURES = Path(__file__).parent / "fixtures"
LIFECYCLE = FIXTURES / "lifecycle"


def make_reply(hypothesis: str, items: list[str], evidence: list[dict] | None = None, summary: str = "") -> str:
    return json.dumps(
        {
            "hypothesis": hypothesis,
            "steps": [
                {"text": "because", "items": items, "evidence": [e["id"] for e in (evidence or [])]}
            ],
            "summary": summary or f"supports {hypothesis}",
            "evidence": evidence or [],
        }
    )


def simple_case(n_items: int = 4) -> CaseRecord:
    items = tuple(
        CaseItem(item_id=f"i{k}", category="Labs", label=f"lab {k}", value=str(k))
        for k in range(1, n_items + 1)
    )
    return CaseRecord(case_id="case-t", narrative="test case", items=items, next_ordinal=n_items + 1)


def make_engine(
    script: dict[tuple[str, int], str],
    n_agents: int = 3,
    config: DebateConfig | None = None,
    case: CaseRecord | None = None,
    log_path=None,
) -> DebateEngine:
    """Engine with a dict-scripted transport keyed by (agent_id, round_index)."""

    def transport(profile, bundle):
        return script[(profile.agent_id, bundle.round_index)]

    agents = [AgentProfile(f"a{k}", f"spec-{k}", f"role {k}") for k in range(1, n_agents + 1)]
    return DebateEngine.create_session(
        case or simple_case(),
        agents,
        config or DebateConfig(convergence_stops_debate=False),
        transport,
        session_id="s-test",
        log_path=log_path,
        clock=fixed_clock(),
        parallel_agents=False,
    )


@pytest.fixture
def lifecycle_paths() -> dict:
    return {
        "case": LIFECYCLE / "case.json",
        "agents": LIFECYCLE / "agents.json",
        "directives": LIFECYCLE / "directives.json",
        "replies": LIFECYCLE / "replies",
        "golden": LIFECYCLE / "golden",
    }
