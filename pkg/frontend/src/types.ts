// Wire documents of the /api/v1 service. The UI renders these verbatim and
// never re-derives conflicts or summaries client-side.

export interface CaseItemDoc {
  id: string;
  category: string;
  label: string;
  value: string;
  span: [number, number] | null;
}

export interface CaseDoc {
  v: number;
  case_id: string;
  narrative: string;
  revision: number;
  items: CaseItemDoc[];
}

export interface AgentDoc {
  agent_id: string;
  specialty: string;
  role_prompt: string;
  color_index: number;
}

export interface ReasoningStepDoc {
  text: string;
  cited_item_ids: string[];
  cited_evidence_ids: string[];
}

export interface EvidenceRefDoc {
  evidence_id: string;
  source_type: "Guideline" | "Literature";
  citation: string;
  snippet: string;
  applies_to_item_ids: string[];
}

export interface OpinionDoc {
  agent_id: string;
  round_index: number;
  hypothesis_id: string;
  hypothesis_label_raw: string;
  reasoning_steps: ReasoningStepDoc[];
  summary: string;
  evidence: EvidenceRefDoc[];
  changed_from: string | null;
  carried_forward: boolean;
  invalid_output: boolean;
}

export interface TriggerDoc {
  kind: "intervention" | "reeval";
  id: string;
}

export interface RoundDoc {
  round_index: number;
  kind: "initial" | "debate" | "revision" | "reeval";
  spoke: string[];
  trigger: TriggerDoc | null;
  opinions: OpinionDoc[];
}

export interface OpinionChangeDoc {
  agent_id: string;
  from: string;
  to: string;
}

export interface RoundSummaryDoc {
  round_index: number;
  support: Record<string, number>;
  new_conflicts: number;
  resolved_conflicts: number;
  opinion_changes: OpinionChangeDoc[];
}

export interface HypothesisDoc {
  hypothesis_id: string;
  canonical_key: string;
  display_label: string;
  color_index: number;
}

export interface ConsensusDoc {
  converged: boolean;
  hypothesis_id: string | null;
  support_share: number;
  dissenting_agents: string[];
  as_of_round: number;
}

export interface StatusDoc {
  phase: "configuring" | "running" | "paused" | "converged" | "terminated";
  muted_agents: string[];
}

export interface StateDoc {
  v: number;
  session_id: string;
  seq: number;
  case: CaseDoc;
  agents: AgentDoc[];
  config: Record<string, unknown>;
  status: StatusDoc;
  rounds: RoundDoc[];
  summaries: RoundSummaryDoc[];
  hypotheses: HypothesisDoc[];
  consensus: ConsensusDoc | null;
}

export interface LifecycleEventDoc {
  kind: "Opened" | "AgentJoined" | "StanceChanged" | "ReEvalRequested" | "Resolved";
  round_index: number;
  detail: string;
}

export interface ComparisonEvidenceDoc {
  evidence_id: string;
  citation: string;
  snippet: string;
}

export interface ComparisonSideDoc {
  agent_id: string;
  evidence: ComparisonEvidenceDoc[];
}

export interface ComparisonRowDoc {
  item_id: string;
  side_a: ComparisonSideDoc[];
  side_b: ComparisonSideDoc[];
  divergence_kind: "DifferentEvidence" | "SameEvidenceDifferentReading";
}

export interface ComparisonDoc {
  conflict_id: string;
  rows: ComparisonRowDoc[];
}

export interface ConflictDoc {
  conflict_id: string;
  hypothesis_pair: [string, string];
  involved_agents: string[];
  contested_item_ids: string[];
  status: "Active" | "Resolved";
  lifecycle: LifecycleEventDoc[];
  supersedes: string | null;
  comparison: ComparisonDoc;
}

export interface ConflictsDoc {
  active: ConflictDoc[];
  resolved: ConflictDoc[];
}

export interface BadgeDoc {
  item_id: string;
  agent_id: string;
  hypothesis_id: string;
  round_index: number;
  evidence_ids: string[];
}

export interface ProvenanceRowDoc {
  id: string;
  flag: "none" | "conflict" | "resolved";
  badges: BadgeDoc[];
}

export interface ProvenanceDoc {
  items: ProvenanceRowDoc[];
}

export interface FlowEdgeDoc {
  from: { round_index: number; hypothesis_id: string };
  to: { round_index: number; hypothesis_id: string };
  weight: number;
}

export interface FlowDoc {
  edges: FlowEdgeDoc[];
}

export interface ConsensusViewDoc {
  consensus: ConsensusDoc | null;
}

/** One SSE frame: the wire-encoded event line. */
export interface EventFrame {
  seq: number;
  ts: number;
  kind: string;
  v: number;
  payload: Record<string, any>;
  crc: number;
}

/** The documents a render pass consumes, all pinned to one seq. */
export interface ViewDocs {
  seq: number;
  state: StateDoc;
  conflicts: ConflictsDoc;
  provenance: ProvenanceDoc;
  consensus: ConsensusDoc | null;
  flow: FlowDoc | null;
}
