"""HTTP service: session lifecycle, actions, views, and the SSE event stream.

All endpoints live under /api/v1 with JSON bodies; errors are
``{"code", "message"}`` with the engine's machine-readable codes. The event
stream is server-sent events ("id:" = seq, "data:" = event JSON) resumable
from any sequence number; per-session actions serialize through the engine's
single-writer commit path, so an action's effects are on the stream before
its response returns.
"""

from __future__ import annotations

import asyncio
import json
import threading
import time
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from . import views, wire
from .case import ItemEdit
from .engine import DebateEngine
from .errors import DebateError, OutOfRange, TransportDown, UnknownSession, UnknownView
from .events import Clock, fixed_clock
from .model import DebateConfig
from .state import SessionState
from .transport import LiveEndpoint, LiveTransport, ScriptedTransport, Transport

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

_STATUS_BY_CODE = {
    "InvalidCase": 400, "DuplicateAgent": 400, "TooFewAgents": 400,
    "UnknownItem": 400, "UnknownAgent": 400, "InvalidIntervention": 400,
    "EmptyTargets": 400, "EmptyHypothesis": 400, "InvalidCategory": 400,
    "InvalidConfig": 400,
    "UnknownSession": 404, "UnknownConflict": 404, "UnknownRound": 404,
    "UnknownView": 404,
    "OutOfRange": 416,
    "WrongPhase": 409, "IllegalTransition": 409, "RoundBudgetExhausted": 409,
    "ConflictAlreadyResolved": 409, "TooFewRounds": 409, "NoRounds": 409,
    "ItemInUse": 409,
    "TransportDown": 503, "ExtractorUnavailable": 503, "InvalidAgentReply": 503,
}


@dataclass
class ServiceConfig:
    """Process configuration (file via --config, TOML or JSON)."""

    host: str = "127.0.0.1"
    port: int = 8400
    transport_mode: str = "scripted"  # "live" | "scripted"
    live_base_url: str = ""
    live_model: str = ""
    live_api_key_env: str = ""
    fixtures_dir: str | None = None
    data_dir: str | None = None
    default_debate: DebateConfig = field(default_factory=DebateConfig)
    heartbeat_interval: float = 15.0
    auto_advance: bool = True
    round_delay: float = 0.0
    fixed_clock_epoch: float | None = None

    def validate(self) -> None:
        if self.transport_mode == "scripted" and not self.fixtures_dir:
            raise ValueError("scripted mode requires fixtures_dir")
        if self.transport_mode == "live" and not (self.live_base_url and self.live_model):
            raise ValueError("live mode requires live_base_url and live_model")

    def make_transport(self) -> Transport:
        if self.transport_mode == "scripted":
            return ScriptedTransport(self.fixtures_dir)
        return LiveTransport(
            LiveEndpoint(
                base_url=self.live_base_url,
                model=self.live_model,
                api_key_env=self.live_api_key_env,
            )
        )

    def clock(self) -> Clock:
        if self.fixed_clock_epoch is not None:
            return fixed_clock(self.fixed_clock_epoch)
        return time.time

    @classmethod
    def from_dict(cls, doc: dict) -> "ServiceConfig":
        live = doc.get("live", {})
        return cls(
            host=doc.get("host", "127.0.0.1"),
            port=doc.get("port", 8400),
            transport_mode=doc.get("transport_mode", "scripted"),
            live_base_url=live.get("base_url", ""),
            live_model=live.get("model", ""),
            live_api_key_env=live.get("api_key_env", ""),
            fixtures_dir=doc.get("fixtures_dir"),
            data_dir=doc.get("data_dir"),
            default_debate=wire.decode_config(doc.get("debate", {})),
            heartbeat_interval=doc.get("heartbeat_interval", 15.0),
            auto_advance=doc.get("auto_advance", True),
            round_delay=doc.get("round_delay", 0.0),
            fixed_clock_epoch=doc.get("fixed_clock_epoch"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ServiceConfig":
        p = Path(path)
        if p.suffix == ".json":
            doc = json.loads(p.read_text(encoding="utf-8"))
        else:
            with open(p, "rb") as fh:
                doc = tomllib.load(fh)
        return cls.from_dict(doc)


class SessionRuntime:
    """One live session plus its background debate driver."""

    def __init__(self, engine: DebateEngine, auto_advance: bool, round_delay: float):
        self.engine = engine
        self.round_delay = round_delay
        self.last_error: str | None = None
        self._stop = threading.Event()
        self._driver: threading.Thread | None = None
        if auto_advance:
            self._driver = threading.Thread(target=self._drive, daemon=True)
            self._driver.start()

    def _can_advance(self) -> bool:
        st = self.engine.state
        return (
            st.status.phase == "running"
            and bool(st.rounds)
            and st.debate_rounds_used() < st.config.max_debate_rounds
        )

    def _drive(self) -> None:
        while not self._stop.is_set():
            if self._can_advance():
                try:
                    self.engine.run_round("debate")
                except DebateError as exc:
                    self.last_error = f"{exc.code}: {exc.message}"
                    return
                if self.round_delay:
                    self._stop.wait(self.round_delay)
            else:
                if self.engine.state.status.phase == "terminated":
                    return
                self._stop.wait(0.02)

    def stop(self) -> None:
        self._stop.set()
        if self._driver is not None:
            self._driver.join(timeout=2.0)


def _error_response(exc: DebateError) -> JSONResponse:
    return JSONResponse(
        status_code=_STATUS_BY_CODE.get(exc.code, 500),
        content={"code": exc.code, "message": exc.message},
    )


def create_app(config: ServiceConfig) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        for rt in app.state.sessions.values():
            rt.stop()
            rt.engine.log.close()

    app = FastAPI(title="mdtdebate", version="1", lifespan=lifespan)
    app.state.config = config
    app.state.sessions: dict[str, SessionRuntime] = {}
    transport = config.make_transport()

    def runtime(session_id: str) -> SessionRuntime:
        rt = app.state.sessions.get(session_id)
        if rt is None:
            raise UnknownSession(f"no session {session_id!r}")
        return rt

    def pinned_state(rt: SessionRuntime, at: int | None) -> SessionState:
        if at is None:
            return rt.engine.state
        return rt.engine.log.fold_at(at)

    @app.exception_handler(DebateError)
    async def _debate_error(_req: Request, exc: DebateError):
        return _error_response(exc)

    @app.post("/api/v1/sessions", status_code=201)
    async def create_session(request: Request):
        body = await request.json()
        case = wire.decode_case(body["case"])
        agents = [wire.decode_agent(a) for a in body.get("agents", [])]
        debate_doc = wire.encode_config(config.default_debate)
        debate_doc.update(body.get("config", {}))
        session_id = f"s-{uuid.uuid4().hex[:12]}"
        log_path = (
            str(Path(config.data_dir) / f"{session_id}.mdtlog") if config.data_dir else None
        )
        engine = DebateEngine.create_session(
            case,
            agents,
            wire.decode_config(debate_doc),
            transport,
            session_id=session_id,
            log_path=log_path,
            clock=config.clock(),
        )
        try:
            engine.run_round("initial")
        except TransportDown as exc:
            # the session stays, with zero rounds; the client may retry later
            app.state.sessions[session_id] = SessionRuntime(engine, auto_advance=False, round_delay=0)
            return JSONResponse(
                status_code=503,
                content={"code": exc.code, "message": exc.message, "session_id": session_id},
            )
        app.state.sessions[session_id] = SessionRuntime(
            engine, auto_advance=config.auto_advance, round_delay=config.round_delay
        )
        return JSONResponse(
            status_code=201,
            content={
                "session_id": session_id,
                "stream_url": f"/api/v1/sessions/{session_id}/events",
                "seq": engine.log.last_seq,
            },
        )

    @app.get("/api/v1/sessions/{session_id}/events")
    async def stream_events(session_id: str, request: Request):
        rt = runtime(session_id)
        try:
            from_seq = int(request.query_params.get("from", 0))
        except ValueError:
            from_seq = 0
        tail = request.query_params.get("tail", "1") not in ("0", "false")
        log = rt.engine.log
        if from_seq > log.last_seq:
            raise OutOfRange(f"from={from_seq} beyond latest seq {log.last_seq}")

        poll = min(0.05, config.heartbeat_interval / 4)

        async def frames():
            last = from_seq
            last_sent = time.monotonic()
            while True:
                for ev in log.events(last):
                    yield f"id: {ev.seq}\ndata: {ev.line()}\n\n"
                    last = ev.seq
                    last_sent = time.monotonic()
                if not tail and last >= log.last_seq:
                    return
                if await request.is_disconnected():
                    return
                if tail and time.monotonic() - last_sent >= config.heartbeat_interval:
                    yield "event: heartbeat\ndata: {}\n\n"
                    last_sent = time.monotonic()
                await asyncio.sleep(poll)

        return StreamingResponse(frames(), media_type="text/event-stream")

    @app.post("/api/v1/sessions/{session_id}/interventions")
    async def submit_intervention(session_id: str, request: Request):
        rt = runtime(session_id)
        body = await request.json()
        rnd = rt.engine.submit_intervention(
            selected_item_ids=body.get("items", []),
            instruction=body.get("instruction", ""),
            target_agent_ids=body.get("targets", []),
        )
        return {"round_index": rnd.round_index, "seq": rt.engine.log.last_seq}

    @app.post("/api/v1/sessions/{session_id}/conflicts/{conflict_id}/reeval")
    async def request_reeval(session_id: str, conflict_id: str):
        rt = runtime(session_id)
        rnd = rt.engine.request_reeval(conflict_id)
        return {"round_index": rnd.round_index, "seq": rt.engine.log.last_seq}

    @app.post("/api/v1/sessions/{session_id}/control")
    async def control(session_id: str, request: Request):
        rt = runtime(session_id)
        body = await request.json()
        status = rt.engine.control(body.get("action", ""), body.get("agent_id"))
        return {**wire.encode_status(status), "seq": rt.engine.log.last_seq}

    @app.post("/api/v1/sessions/{session_id}/case-edits")
    async def case_edit(session_id: str, request: Request):
        rt = runtime(session_id)
        body = await request.json()
        edit = ItemEdit(
            kind=body.get("kind", ""),
            target=body.get("target"),
            category=body.get("category"),
            label=body.get("label"),
            value=body.get("value"),
            source_span=tuple(body["span"]) if body.get("span") else None,
        )
        case = rt.engine.apply_case_edit(edit)
        return {"case": wire.encode_case(case), "seq": rt.engine.log.last_seq}

    @app.get("/api/v1/sessions/{session_id}/views/{name}")
    async def get_view(session_id: str, name: str, request: Request):
        rt = runtime(session_id)
        at = request.query_params.get("at")
        st = pinned_state(rt, int(at) if at is not None else None)
        if name == "round":
            index = int(request.query_params.get("i", -1))
            return views.round_doc(st, index)
        builder = views.VIEW_BUILDERS.get(name)
        if builder is None:
            raise UnknownView(f"no view named {name!r}")
        return builder(st)

    return app


def run_service(config: ServiceConfig) -> None:  # pragma: no cover
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port)
