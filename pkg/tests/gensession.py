"""Seeded random session generator for property and acceptance tests.

Drives the real engine through randomized debates: fresh hypotheses and
citations per round, invalid replies exercising the repair loop, abstains,
interventions, re-evals, mutes/unmutes, pause/resume. Fully deterministic per
seed (per-call transport randomness is keyed on agent/round/attempt so thread
scheduling cannot change anything).
"""

from __future__ import annotations

import json
import random
import zlib

from mdtdebate.case import CaseItem, CaseRecord
from mdtdebate.engine import DebateEngine
from mdtdebate.events import fixed_clock
from mdtdebate.model import AgentProfile, DebateConfig

HYPOTHESIS_POOL = ("Alpha syndrome", "Beta disease", "Gamma disorder", "Delta infection")
CATEGORY_CYCLE = ("Labs", "Symptoms", "Exam", "History", "Imaging", "Demographics")


def make_case(n_items: int) -> CaseRecord:
    items = tuple(
        CaseItem(
            item_id=f"i{k}",
            category=CATEGORY_CYCLE[k % len(CATEGORY_CYCLE)],
            label=f"finding {k}",
            value=str(k),
        )
        for k in range(1, n_items + 1)
    )
    return CaseRecord(case_id="case-gen", narrative="generated case", items=items, next_ordinal=n_items + 1)


def _sub_rng(seed: int, agent_id: str, round_index: int, attempt: int) -> random.Random:
    key = f"{seed}:{agent_id}:{round_index}:{attempt}"
    return random.Random(zlib.crc32(key.encode("utf-8")))


class RandomAgentTransport:
    """Generates replies deterministically per (agent, round, attempt).

    Invalid replies (non-JSON, unknown item references) appear with some
    probability; in round 0 the last allowed attempt is always valid so every
    agent has an opinion to carry forward later. In later rounds an agent may
    exhaust all attempts and abstain.
    """

    def __init__(self, seed: int, item_ids: list[str], max_repairs: int, invalid_rate: float = 0.15):
        self.seed = seed
        self.item_ids = item_ids
        self.max_repairs = max_repairs
        self.invalid_rate = invalid_rate

    def __call__(self, profile, bundle) -> str:
        rng = _sub_rng(self.seed, profile.agent_id, bundle.round_index, bundle.attempt)
        must_be_valid = bundle.round_index == 0 and bundle.attempt >= self.max_repairs
        if not must_be_valid and rng.random() < self.invalid_rate:
            if rng.random() < 0.5:
                return "sorry, I cannot answer in the requested format"
            return json.dumps(
                {
                    "hypothesis": rng.choice(HYPOTHESIS_POOL),
                    "steps": [{"text": "cites a ghost item", "items": ["i999"], "evidence": []}],
                    "summary": "",
                    "evidence": [],
                }
            )
        hypothesis = rng.choice(HYPOTHESIS_POOL)
        cited = rng.sample(self.item_ids, k=rng.randint(1, min(3, len(self.item_ids))))
        evidence = []
        step_ev = []
        if rng.random() < 0.6:
            applies = rng.sample(self.item_ids, k=rng.randint(1, 2))
            evidence.append(
                {
                    "id": "e1",
                    "type": rng.choice(["guideline", "literature"]),
                    "citation": f"source {rng.randint(1, 3)}",
                    "snippet": "relevant passage",
                    "items": applies,
                }
            )
            step_ev = ["e1"]
        return json.dumps(
            {
                "hypothesis": hypothesis,
                "steps": [{"text": f"reasoning of {profile.agent_id}", "items": cited, "evidence": step_ev}],
                "summary": f"{profile.agent_id} supports {hypothesis}",
                "evidence": evidence,
            }
        )


def build_random_session(seed: int, max_rounds: int = 6, log_path=None) -> DebateEngine:
    """Create and drive one randomized session; returns the engine with all
    rounds committed and per-commit snapshots recorded."""
    rng = random.Random(seed)
    n_agents = rng.randint(2, 6)
    n_items = rng.randint(3, 12)
    case = make_case(n_items)
    agents = [AgentProfile(f"a{k}", f"specialty-{k}", f"role {k}") for k in range(1, n_agents + 1)]
    config = DebateConfig(
        max_debate_rounds=rng.randint(1, 4),
        convergence_stops_debate=rng.random() < 0.3,
        max_repairs=rng.randint(0, 2),
        consensus_threshold=rng.choice((0.6, 0.75, 1.0)),
    )
    transport = RandomAgentTransport(seed, [it.item_id for it in case.items], config.max_repairs)
    engine = DebateEngine.create_session(
        case,
        agents,
        config,
        transport,
        session_id=f"s-gen-{seed}",
        log_path=log_path,
        clock=fixed_clock(),
        parallel_agents=rng.random() < 0.5,
    )
    engine.run_round("initial")

    while len(engine.state.rounds) < max_rounds:
        st = engine.state
        choices = []
        if st.status.phase == "running" and st.debate_rounds_used() < st.config.max_debate_rounds:
            choices += ["debate"] * 4
        if st.status.phase in ("running", "converged"):
            choices += ["intervention"] * 2
            if any(c.status == "Active" for c in st.conflicts.values()):
                choices += ["reeval"] * 2
        if len(st.unmuted_agents()) > 2:
            choices.append("mute")
        if st.status.muted_agents:
            choices.append("unmute")
        if st.status.phase == "running":
            choices.append("pause-resume")
        round_actions = {"debate", "intervention", "reeval"}
        if not round_actions & set(choices):
            break
        action = rng.choice(choices)
        if action == "debate":
            engine.run_round("debate")
        elif action == "intervention":
            targets = rng.sample(list(st.unmuted_agents()), k=rng.randint(1, len(st.unmuted_agents())))
            items = rng.sample([it.item_id for it in st.case.items], k=rng.randint(1, 2))
            engine.submit_intervention(items, "re-examine the selected findings", targets)
        elif action == "reeval":
            active = sorted(c.conflict_id for c in st.conflicts.values() if c.status == "Active")
            from mdtdebate.errors import EmptyTargets

            try:
                engine.request_reeval(rng.choice(active))
            except EmptyTargets:
                pass  # every involved agent muted; legal outcome
        elif action == "mute":
            engine.control("mute", rng.choice(list(st.unmuted_agents())))
        elif action == "unmute":
            engine.control("unmute", rng.choice(sorted(st.status.muted_agents)))
        elif action == "pause-resume":
            engine.control("pause")
            engine.control("resume")
    return engine
