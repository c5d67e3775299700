"""Agent transport: one function (AgentProfile, ContextBundle) -> raw text.

Two shipped implementations: a scripted transport replaying fixture files for
deterministic offline runs, and a live transport speaking an OpenAI-style
chat-completions endpoint. Any callable with the same shape works (tests pass
closures).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import requests

from .case import CaseRecord, DraftItem
from .errors import ExtractorUnavailable, TransportDown
from .model import AgentProfile, Trigger
from .wire import Reason


@dataclass(frozen=True)
class OpinionDigest:
    """Compact rendering of one prior opinion for the context bundle."""

    agent_id: str
    specialty: str
    round_index: int
    hypothesis_label: str
    summary: str
    cited_item_ids: tuple[str, ...]


@dataclass(frozen=True)
class ContextBundle:
    """Everything an agent sees when asked for a statement.

    Contents per round kind: initial = case + role prompt; debate = + all
    prior opinion digests; revision = + selected items and the clinician's
    instruction (targets only); reeval = + the conflict description (involved
    agents only). ``attempt`` > 0 marks a repair re-prompt and
    ``repair_reasons`` carries the machine-readable failures to fix.
    """

    kind: str
    round_index: int
    attempt: int
    case: CaseRecord
    role_prompt: str
    prior_opinions: tuple[OpinionDigest, ...] = ()
    intervention: tuple[tuple[str, ...], str] | None = None  # (item ids, instruction)
    conflict: dict | None = None
    repair_reasons: tuple[Reason, ...] = ()
    trigger: Trigger | None = None


Transport = Callable[[AgentProfile, ContextBundle], str]

REPLY_CONTRACT = (
    "Reply with a single JSON object and nothing else: "
    '{"hypothesis": str, "steps": [{"text": str, "items": [case item id], '
    '"evidence": [evidence id]}], "summary": str, "evidence": [{"id": str, '
    '"type": "guideline"|"literature", "citation": str, "snippet": str, '
    '"items": [case item id]}]}. Cite only existing case item ids.'
)


def render_messages(profile: AgentProfile, bundle: ContextBundle) -> list[dict]:
    """Chat messages for the live transport."""
    system = (
        f"You are the {profile.specialty} specialist in a multidisciplinary "
        f"diagnostic team. {bundle.role_prompt}\n{REPLY_CONTRACT}"
    )
    lines = ["Patient case items:"]
    for it in bundle.case.items:
        lines.append(f"- [{it.item_id}] ({it.category}) {it.label}: {it.value}")
    if bundle.prior_opinions:
        lines.append("\nPrior statements:")
        for d in bundle.prior_opinions:
            lines.append(
                f"- round {d.round_index}, {d.agent_id} ({d.specialty}): "
                f"{d.hypothesis_label} — {d.summary} [cites {','.join(d.cited_item_ids)}]"
            )
    if bundle.intervention is not None:
        items, instruction = bundle.intervention
        lines.append(f"\nClinician instruction regarding items {','.join(items)}: {instruction}")
    if bundle.conflict is not None:
        lines.append(
            f"\nA conflict between {bundle.conflict['hypothesis_a']} and "
            f"{bundle.conflict['hypothesis_b']} over items "
            f"{','.join(bundle.conflict['contested_item_ids'])} needs re-evaluation."
        )
    if bundle.repair_reasons:
        lines.append("\nYour previous reply was rejected; fix these problems and resend:")
        for r in bundle.repair_reasons:
            lines.append(f"- {r.code}: {r.message}")
    lines.append("\nState your current diagnostic hypothesis with stepwise reasoning.")
    return [
        {"role": "system", "content": system},
        {"role": "user", "content": "\n".join(lines)},
    ]


class ScriptedTransport:
    """Fixture-backed transport: ``<fixtures>/<agent_id>/<round_index>.json``.

    A fixture file is either one agent-wire payload object, or
    ``{"attempts": [...]}`` where each attempt is a payload object or a raw
    string returned verbatim (for exercising the repair loop). Repair
    re-prompts consume successive attempts; the last one repeats when
    exhausted. A missing file is a transport failure.
    """

    def __init__(self, fixtures_dir: str | Path):
        self.fixtures_dir = Path(fixtures_dir)

    def __call__(self, profile: AgentProfile, bundle: ContextBundle) -> str:
        path = self.fixtures_dir / profile.agent_id / f"{bundle.round_index}.json"
        if not path.exists():
            raise TransportDown(f"missing fixture {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise TransportDown(f"unreadable fixture {path}: {exc}") from exc
        if isinstance(doc, dict) and "attempts" in doc:
            attempts = doc["attempts"]
            if not attempts:
                raise TransportDown(f"fixture {path} has no attempts")
            entry = attempts[min(bundle.attempt, len(attempts) - 1)]
        else:
            entry = doc
        return entry if isinstance(entry, str) else json.dumps(entry)


@dataclass
class LiveEndpoint:
    """OpenAI-style chat-completions endpoint; the key comes from the named
    environment variable, never from config values."""

    base_url: str
    model: str
    api_key_env: str = ""
    timeout: float = 120.0

    def complete(self, messages: list[dict]) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env)
            if not key:
                raise TransportDown(f"environment variable {self.api_key_env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        try:
            resp = requests.post(
                self.base_url.rstrip("/") + "/chat/completions",
                json={"model": self.model, "messages": messages, "temperature": 0},
                headers=headers,
                timeout=self.timeout,
            )
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        except requests.RequestException as exc:
            raise TransportDown(f"chat endpoint failure: {exc}") from exc
        except (KeyError, IndexError, ValueError) as exc:
            raise TransportDown(f"malformed chat endpoint response: {exc}") from exc


class LiveTransport:
    def __init__(self, endpoint: LiveEndpoint):
        self.endpoint = endpoint

    def __call__(self, profile: AgentProfile, bundle: ContextBundle) -> str:
        return self.endpoint.complete(render_messages(profile, bundle))


EXTRACTION_PROMPT = (
    "Parse the clinical narrative into structured case items. Reply with a "
    'single JSON object: {"items": [{"category": one of Demographics|Symptoms'
    '|Exam|History|Labs|Imaging, "label": str, "value": str}]}. Keep every '
    "piece of information; put anything unclassifiable into one History item "
    'labeled "narrative".'
)


class LiveCaseExtractor:
    """Narrative extraction through the chat endpoint, same wire schema as
    the rule-based extractor's output."""

    def __init__(self, endpoint: LiveEndpoint):
        self.endpoint = endpoint

    def extract(self, narrative: str) -> list[DraftItem]:
        if not narrative.strip():
            return []
        try:
            raw = self.endpoint.complete(
                [
                    {"role": "system", "content": EXTRACTION_PROMPT},
                    {"role": "user", "content": narrative},
                ]
            )
        except TransportDown as exc:
            raise ExtractorUnavailable(str(exc)) from exc
        try:
            doc = json.loads(raw)
            items = doc["items"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ExtractorUnavailable(f"extractor reply is not in the case wire schema: {exc}") from exc
        out = []
        for it in items:
            label = str(it.get("label", "")).strip()
            value = str(it.get("value", ""))
            start = narrative.find(value) if value else -1
            out.append(
                DraftItem(
                    category=str(it.get("category", "History")),
                    label=label or "narrative",
                    value=value,
                    source_span=(start, start + len(value)) if start >= 0 else None,
                )
            )
        return out
