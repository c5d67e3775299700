"""Error vocabulary shared by the engine, event store, service, and CLI.

Every error carries a stable machine-readable ``code`` (its class name) so the
service can map it onto ``{"code", "message"}`` bodies and the CLI onto exit
statuses without string matching.
"""

from __future__ import annotations


class DebateError(Exception):
    """Base class; ``code`` is the stable identifier used on the wire."""

    code = "DebateError"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


# -- case model ------------------------------------------------------------

class InvalidCase(DebateError):
    code = "InvalidCase"


class UnknownItem(DebateError):
    code = "UnknownItem"


class InvalidCategory(DebateError):
    code = "InvalidCategory"


class ItemInUse(DebateError):
    """Removal of a case item that a committed opinion has cited."""

    code = "ItemInUse"


class ExtractorUnavailable(DebateError):
    code = "ExtractorUnavailable"


# -- engine ----------------------------------------------------------------

class DuplicateAgent(DebateError):
    code = "DuplicateAgent"


class TooFewAgents(DebateError):
    code = "TooFewAgents"


class UnknownAgent(DebateError):
    code = "UnknownAgent"


class WrongPhase(DebateError):
    code = "WrongPhase"


class IllegalTransition(DebateError):
    code = "IllegalTransition"


class RoundBudgetExhausted(DebateError):
    code = "RoundBudgetExhausted"


class EmptyTargets(DebateError):
    code = "EmptyTargets"


class EmptyHypothesis(DebateError):
    code = "EmptyHypothesis"


class InvalidIntervention(DebateError):
    code = "InvalidIntervention"


class UnknownConflict(DebateError):
    code = "UnknownConflict"


class ConflictAlreadyResolved(DebateError):
    code = "ConflictAlreadyResolved"


class NoRounds(DebateError):
    code = "NoRounds"


class UnknownRound(DebateError):
    code = "UnknownRound"


class TooFewRounds(DebateError):
    code = "TooFewRounds"


class TransportDown(DebateError):
    code = "TransportDown"


class InvalidAgentReply(DebateError):
    """An agent exhausted its repairs and has no prior opinion to fall back on."""

    code = "InvalidAgentReply"


class InvalidConfig(DebateError):
    code = "InvalidConfig"


# -- event store -----------------------------------------------------------

class IllegalEvent(DebateError):
    code = "IllegalEvent"


class OutOfRange(DebateError):
    code = "OutOfRange"


class StorageFailure(DebateError):
    code = "StorageFailure"


class CorruptFile(DebateError):
    code = "CorruptFile"


class InvariantViolation(DebateError):
    """Recorded analytics disagree with recomputation on a live engine path."""

    code = "InvariantViolation"


# -- service ---------------------------------------------------------------

class UnknownSession(DebateError):
    code = "UnknownSession"


class UnknownView(DebateError):
    code = "UnknownView"
