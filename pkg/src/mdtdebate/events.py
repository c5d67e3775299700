"""Append-only event log and the .mdtlog file format.

File layout: one header line then one JSON object per event, newline
delimited. Each event line carries ``{"seq","ts","kind","v","payload","crc"}``
where ``crc`` is the CRC32 of the canonical encoding of the other five
fields; the header carries the magic, schema version, and session id. The
format is append-friendly and prefix-recoverable: any complete-line prefix is
a valid log.
"""

from __future__ import annotations

import json
import os
import threading
import time
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import state as state_mod
from . import wire
from .errors import CorruptFile, IllegalEvent, OutOfRange, StorageFailure
from .state import Divergence, SessionState

MAGIC = "MDTROOM1"
LOG_SCHEMA_VERSION = 1
FILE_EXTENSION = ".mdtlog"

Clock = Callable[[], float]

# Fixed epoch used by scripted runs so golden files are stable.
SCRIPTED_EPOCH = 1704067200.0


def fixed_clock(epoch: float = SCRIPTED_EPOCH) -> Clock:
    return lambda: epoch


@dataclass(frozen=True)
class Event:
    seq: int
    ts: float
    kind: str
    payload: dict

    def line(self) -> str:
        body = {"seq": self.seq, "ts": self.ts, "kind": self.kind, "v": LOG_SCHEMA_VERSION, "payload": self.payload}
        return wire.dumps({**body, "crc": zlib.crc32(wire.dumps(body).encode("utf-8"))})


def _parse_event_line(line: str, lineno: int) -> Event:
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorruptFile(f"line {lineno}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "crc" not in doc:
        raise CorruptFile(f"line {lineno}: missing crc")
    crc = doc.pop("crc")
    if zlib.crc32(wire.dumps(doc).encode("utf-8")) != crc:
        raise CorruptFile(f"line {lineno}: crc mismatch")
    if doc.get("v") != LOG_SCHEMA_VERSION:
        raise CorruptFile(
            f"line {lineno}: log schema version {doc.get('v')!r} not supported (expected {LOG_SCHEMA_VERSION})"
        )
    return Event(seq=doc["seq"], ts=doc["ts"], kind=doc["kind"], payload=doc["payload"])


def _parse_header(line: str) -> dict:
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorruptFile(f"header: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("magic") != MAGIC:
        raise CorruptFile("header: bad magic")
    if doc.get("v") != LOG_SCHEMA_VERSION:
        raise CorruptFile(f"header: schema version {doc.get('v')!r} not supported (expected {LOG_SCHEMA_VERSION})")
    return doc


def load_session(path: str | Path, recover: bool = False) -> tuple[dict, list[Event]]:
    """Load (header, events) from a .mdtlog file.

    Strict by default: a truncated or tampered line raises CorruptFile. With
    ``recover=True`` a partial trailing line is dropped and the valid prefix
    returned; corruption before the tail still raises. Either way no partial
    event is ever surfaced.
    """
    p = Path(path)
    if not p.exists():
        raise StorageFailure(f"no such log file: {p}")
    raw = p.read_text(encoding="utf-8")
    if not raw:
        raise CorruptFile("empty log file")
    complete, _, tail = raw.rpartition("\n")
    lines = complete.split("\n") if complete else []
    if tail:
        if not recover:
            raise CorruptFile("trailing partial line (file truncated mid-event)")
    if not lines:
        raise CorruptFile("no complete header line")
    header = _parse_header(lines[0])
    events: list[Event] = []
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            raise CorruptFile(f"line {n}: blank line inside log")
        events.append(_parse_event_line(line, n))
    for expected, ev in enumerate(events, start=1):
        if ev.seq != expected:
            raise CorruptFile(f"seq {ev.seq} out of order (expected {expected})")
    return header, events


class EventLog:
    """Single-writer append-only log folding into a live SessionState.

    Appends are batched and atomic: legality and analytics verification run
    against a staged fold before anything is written or published, so a
    failed batch leaves no trace. Readers take immutable snapshots; a
    condition variable lets streams wait for new events.
    """

    def __init__(self, session_id: str, path: str | Path | None = None, clock: Clock = time.time):
        self.session_id = session_id
        self.clock = clock
        self._events: list[Event] = []
        self._state: SessionState | None = None
        self._path = Path(path) if path is not None else None
        self._fh = None
        self._cond = threading.Condition()
        if self._path is not None:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self._path, "w", encoding="utf-8")
            self._fh.write(wire.dumps({"magic": MAGIC, "v": LOG_SCHEMA_VERSION, "session_id": session_id}) + "\n")
            self._fh.flush()
            os.fsync(self._fh.fileno())

    # -- reading ------------------------------------------------------------

    @property
    def state(self) -> SessionState:
        if self._state is None:
            raise IllegalEvent("log has no events yet")
        return self._state

    @property
    def last_seq(self) -> int:
        return len(self._events)

    def events(self, from_seq: int = 0) -> list[Event]:
        """Events with seq > from_seq, in order."""
        if from_seq > len(self._events):
            raise OutOfRange(f"from_seq {from_seq} beyond latest {len(self._events)}")
        return self._events[from_seq:]

    def fold_at(self, upto_seq: int) -> SessionState:
        return state_mod.fold_events(self._events, upto_seq=upto_seq)

    def boundary_seq(self, round_index: int) -> int:
        return state_mod.round_boundary_seq(self._events, round_index)

    def wait_beyond(self, seq: int, timeout: float) -> bool:
        """Block until the log grows past ``seq`` or the timeout elapses."""
        with self._cond:
            return self._cond.wait_for(lambda: len(self._events) > seq, timeout=timeout)

    # -- writing ------------------------------------------------------------

    def append(self, kind: str, payload: dict) -> int:
        return self.append_batch([(kind, payload)])[-1]

    def append_batch(self, batch: Sequence[tuple[str, dict]]) -> list[int]:
        """Atomically append a batch; returns the assigned sequence numbers.

        The whole batch is folded against a staged state first: an illegal
        event or an analytics mismatch raises and nothing is written.
        """
        ts = self.clock()
        staged_events = [
            Event(seq=len(self._events) + n + 1, ts=ts, kind=kind, payload=payload)
            for n, (kind, payload) in enumerate(batch)
        ]
        staged_state = self._state
        for ev in staged_events:
            staged_state = state_mod.apply_event(staged_state, ev)
        if self._fh is not None:
            try:
                for ev in staged_events:
                    self._fh.write(ev.line() + "\n")
                self._fh.flush()
                os.fsync(self._fh.fileno())
            except OSError as exc:
                raise StorageFailure(f"cannot append to {self._path}: {exc}") from exc
        with self._cond:
            self._events.extend(staged_events)
            self._state = staged_state
            self._cond.notify_all()
        return [ev.seq for ev in staged_events]

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def save_session(log: EventLog, path: str | Path) -> None:
    """Write the full event sequence to ``path`` (header + one line per event)."""
    if log.last_seq == 0:
        raise StorageFailure("refusing to save an empty log")
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(p, "w", encoding="utf-8") as fh:
            fh.write(wire.dumps({"magic": MAGIC, "v": LOG_SCHEMA_VERSION, "session_id": log.session_id}) + "\n")
            for ev in log.events():
                fh.write(ev.line() + "\n")
            fh.flush()
            os.fsync(fh.fileno())
    except OSError as exc:
        raise StorageFailure(f"cannot write {p}: {exc}") from exc


def replay_events(events: Iterable[Event]) -> tuple[SessionState, list[Divergence]]:
    """Fold a loaded log, recomputing all derived analytics and collecting
    every disagreement with the recorded values."""
    divergences: list[Divergence] = []
    final = state_mod.fold_events(events, on_divergence=divergences.append)
    return final, divergences


def determinism_hash(events: Iterable[Event]) -> str:
    """Content hash of a log with timestamps excluded."""
    import hashlib

    h = hashlib.sha256()
    for ev in events:
        h.update(wire.dumps({"seq": ev.seq, "kind": ev.kind, "payload": ev.payload}).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()
