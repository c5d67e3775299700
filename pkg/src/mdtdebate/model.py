"""Domain types for the debate: agents, opinions, rounds, conflicts, analytics.

Everything here is an immutable value; session state evolves only by folding
events (see ``state``). Wire encodings live in ``wire``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

from .errors import EmptyHypothesis, InvalidConfig

# Fixed palette size; hypothesis colors wrap, agent colors are list positions.
HYPOTHESIS_PALETTE_SIZE = 10

ROUND_KINDS = ("initial", "debate", "revision", "reeval")
PHASES = ("configuring", "running", "paused", "converged", "terminated")
SOURCE_TYPES = ("Guideline", "Literature")


@dataclass(frozen=True)
class AgentProfile:
    agent_id: str
    specialty: str
    role_prompt: str
    color_index: int = 0


@dataclass(frozen=True)
class DebateConfig:
    max_debate_rounds: int = 3
    convergence_stops_debate: bool = True
    max_repairs: int = 2
    consensus_threshold: float = 1.0
    hypothesis_aliases: tuple[tuple[str, str], ...] = ()

    def validate(self) -> None:
        if self.max_debate_rounds < 1:
            raise InvalidConfig("max_debate_rounds must be >= 1")
        if self.max_repairs < 0:
            raise InvalidConfig("max_repairs must be >= 0")
        if not (0.5 < self.consensus_threshold <= 1.0):
            raise InvalidConfig("consensus_threshold must lie in (0.5, 1.0]")

    def alias_map(self) -> dict[str, str]:
        """Alias table with both sides normalized."""
        return {normalize_label(k): normalize_label(v) for k, v in self.hypothesis_aliases}


@dataclass(frozen=True)
class ReasoningStep:
    text: str
    cited_item_ids: tuple[str, ...] = ()
    cited_evidence_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class EvidenceRef:
    evidence_id: str
    source_type: str  # Guideline | Literature
    citation: str
    snippet: str
    applies_to_item_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class Opinion:
    """One agent's statement in one round.

    ``changed_from`` is computed by the engine from the opinion history and
    never trusted from agent output. ``invalid_output`` marks an opinion that
    stands in for a statement the agent failed to produce (abstain after the
    repair budget); it persists through verbatim carries until the agent
    speaks fresh again.
    """

    agent_id: str
    round_index: int
    hypothesis_id: str
    hypothesis_label_raw: str
    reasoning_steps: tuple[ReasoningStep, ...] = ()
    summary: str = ""
    evidence: tuple[EvidenceRef, ...] = ()
    changed_from: str | None = None
    carried_forward: bool = False
    invalid_output: bool = False

    def cited_item_ids(self) -> frozenset[str]:
        """All case items this opinion relies on: step citations plus the
        items its evidence applies to."""
        ids: set[str] = set()
        for step in self.reasoning_steps:
            ids.update(step.cited_item_ids)
        for ev in self.evidence:
            ids.update(ev.applies_to_item_ids)
        return frozenset(ids)

    def evidence_ids_for_item(self, item_id: str) -> tuple[str, ...]:
        return tuple(
            sorted(ev.evidence_id for ev in self.evidence if item_id in ev.applies_to_item_ids)
        )


@dataclass(frozen=True)
class Trigger:
    kind: str  # "intervention" | "reeval"
    ref_id: str


@dataclass(frozen=True)
class Round:
    """One atomic commit of opinions.

    ``spoke`` is the solicited set (all unmuted agents for initial/debate,
    the targets for revision/reeval); an abstaining solicited agent stays in
    it, flagged via its opinion. ``opinions`` holds one entry per agent
    active in the round, in session agent order.
    """

    round_index: int
    kind: str
    spoke: tuple[str, ...]
    opinions: tuple[Opinion, ...]
    trigger: Trigger | None = None

    def opinion_of(self, agent_id: str) -> Opinion | None:
        for op in self.opinions:
            if op.agent_id == agent_id:
                return op
        return None


@dataclass(frozen=True)
class Intervention:
    intervention_id: str
    selected_item_ids: tuple[str, ...]
    instruction: str
    target_agent_ids: tuple[str, ...]


@dataclass(frozen=True)
class SessionStatus:
    phase: str = "running"
    muted_agents: frozenset[str] = frozenset()


@dataclass(frozen=True)
class HypothesisRecord:
    hypothesis_id: str
    canonical_key: str
    display_label: str
    color_index: int


def normalize_label(label: str) -> str:
    """Trim, case-fold, collapse internal whitespace."""
    return re.sub(r"\s+", " ", label.strip()).casefold()


class HypothesisRegistry:
    """Canonical hypothesis identities with first-seen display labels and colors."""

    def __init__(self, records: tuple[HypothesisRecord, ...] = ()):
        self._records: list[HypothesisRecord] = list(records)
        self._by_key = {r.canonical_key: r for r in self._records}
        self._by_id = {r.hypothesis_id: r for r in self._records}

    @property
    def records(self) -> tuple[HypothesisRecord, ...]:
        return tuple(self._records)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, HypothesisRegistry) and self.records == other.records

    def __len__(self) -> int:
        return len(self._records)

    def canonical_key(self, label: str, aliases: Mapping[str, str]) -> str:
        key = normalize_label(label)
        if not key:
            raise EmptyHypothesis("hypothesis label is empty after trimming")
        return aliases.get(key, key)

    def lookup(self, label: str, aliases: Mapping[str, str]) -> HypothesisRecord | None:
        return self._by_key.get(self.canonical_key(label, aliases))

    def by_id(self, hypothesis_id: str) -> HypothesisRecord:
        return self._by_id[hypothesis_id]

    def display_label(self, hypothesis_id: str) -> str:
        return self._by_id[hypothesis_id].display_label

    def resolve(self, label: str, aliases: Mapping[str, str]) -> HypothesisRecord:
        """Return the record for ``label``, registering it on first sighting.

        First sighting fixes the display label (raw form) and the next
        palette color; later sightings of any normalization/alias-equivalent
        label return the same record.
        """
        key = self.canonical_key(label, aliases)
        rec = self._by_key.get(key)
        if rec is None:
            rec = HypothesisRecord(
                hypothesis_id=f"h{len(self._records) + 1}",
                canonical_key=key,
                display_label=label,
                color_index=len(self._records) % HYPOTHESIS_PALETTE_SIZE,
            )
            self._records.append(rec)
            self._by_key[key] = rec
            self._by_id[rec.hypothesis_id] = rec
        return rec

    def copy(self) -> HypothesisRegistry:
        return HypothesisRegistry(self.records)


# -- analytics value types ---------------------------------------------------

@dataclass(frozen=True)
class LifecycleEvent:
    kind: str  # Opened | AgentJoined | StanceChanged | ReEvalRequested | Resolved
    round_index: int
    detail: str = ""


@dataclass(frozen=True)
class Conflict:
    """A first-class disagreement between two hypotheses grounded in shared items.

    ``agent_rounds`` / ``item_rounds`` record the round at which each agent or
    item joined the conflict, enabling as-of-round queries without refolding.
    """

    conflict_id: str
    hypothesis_pair: tuple[str, str]
    involved_agents: frozenset[str]
    contested_item_ids: frozenset[str]
    status: str  # Active | Resolved
    lifecycle: tuple[LifecycleEvent, ...]
    supersedes: str | None = None
    agent_rounds: tuple[tuple[str, int], ...] = ()
    item_rounds: tuple[tuple[str, int], ...] = ()

    @property
    def opened_round(self) -> int:
        return self.lifecycle[0].round_index

    @property
    def resolved_round(self) -> int | None:
        if self.status == "Resolved":
            return self.lifecycle[-1].round_index
        return None

    def involved_at(self, round_index: int) -> frozenset[str]:
        return frozenset(a for a, r in self.agent_rounds if r <= round_index)

    def contested_at(self, round_index: int) -> frozenset[str]:
        return frozenset(i for i, r in self.item_rounds if r <= round_index)

    def active_at(self, round_index: int) -> bool:
        if self.opened_round > round_index:
            return False
        resolved = self.resolved_round
        return resolved is None or resolved > round_index


@dataclass(frozen=True)
class ProvenanceBadge:
    item_id: str
    agent_id: str
    hypothesis_id: str
    round_index: int
    evidence_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class OpinionChange:
    agent_id: str
    from_hypothesis: str
    to_hypothesis: str


@dataclass(frozen=True)
class RoundSummary:
    round_index: int
    support: tuple[tuple[str, int], ...]  # hypothesis_id -> agent count, key-sorted
    new_conflicts: int
    resolved_conflicts: int
    opinion_changes: tuple[OpinionChange, ...]

    def support_map(self) -> dict[str, int]:
        return dict(self.support)


@dataclass(frozen=True)
class FlowEdge:
    from_round: int
    from_hypothesis: str
    to_round: int
    to_hypothesis: str
    weight: int


@dataclass(frozen=True)
class SideEntry:
    agent_id: str
    evidence: tuple[tuple[str, str, str], ...]  # (evidence_id, citation, snippet)


@dataclass(frozen=True)
class ComparisonRow:
    item_id: str
    side_a: tuple[SideEntry, ...]
    side_b: tuple[SideEntry, ...]
    divergence_kind: str  # DifferentEvidence | SameEvidenceDifferentReading


@dataclass(frozen=True)
class EvidenceComparison:
    conflict_id: str
    rows: tuple[ComparisonRow, ...]


@dataclass(frozen=True)
class ConsensusSummary:
    converged: bool
    hypothesis_id: str | None
    support_share: float
    dissenting_agents: frozenset[str]
    as_of_round: int


@dataclass(frozen=True)
class ConflictDelta:
    """Outcome of conflict detection for one committed round."""

    opened: tuple[Conflict, ...] = ()
    updated: tuple[ConflictUpdate, ...] = ()
    resolved: tuple[ConflictResolution, ...] = ()


@dataclass(frozen=True)
class ConflictUpdate:
    conflict_id: str
    added_agents: tuple[str, ...]
    added_items: tuple[str, ...]
    lifecycle: tuple[LifecycleEvent, ...]


@dataclass(frozen=True)
class ConflictResolution:
    conflict_id: str
    lifecycle: tuple[LifecycleEvent, ...]  # StanceChanged*, then Resolved
