"""Multi-round specialist-agent diagnostic debates as inspectable, event-sourced state."""

from .case import (
    CaseItem,
    CaseRecord,
    ItemEdit,
    RuleBasedExtractor,
    apply_item_edit,
    extract_case_items,
    validate_case,
)
from .engine import DebateEngine, ValidationFailure
from .events import Event, EventLog, load_session, replay_events
from .model import AgentProfile, DebateConfig, HypothesisRegistry, Opinion, Round
from .state import SessionState, fold_events
from .transport import ContextBundle, LiveEndpoint, LiveTransport, ScriptedTransport

__all__ = [
    "AgentProfile",
    "CaseItem",
    "CaseRecord",
    "ContextBundle",
    "DebateConfig",
    "DebateEngine",
    "Event",
    "EventLog",
    "HypothesisRegistry",
    "ItemEdit",
    "LiveEndpoint",
    "LiveTransport",
    "Opinion",
    "Round",
    "RuleBasedExtractor",
    "ScriptedTransport",
    "SessionState",
    "ValidationFailure",
    "apply_item_edit",
    "extract_case_items",
    "fold_events",
    "load_session",
    "replay_events",
    "validate_case",
]
