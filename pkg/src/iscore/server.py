"""Live-performance session service.

A session owns one engine state and paces it against the wall clock:
every tick_ms, the inputs queued since the last boundary become the
input batch for one engine step, and the resulting trace events are
broadcast to every connected client.  Logical time is therefore a pure
function of (score, seed, policy, per-tick batches); wall jitter, client
count, and pause/resume never change the trace, and a session can dump
its batches as a script that `run` replays to the same trace.

Transport: WebSocket, one JSON WireMessage per text frame (schema shipped
in docs/wire-schema.json).  The same port serves the static web client
over plain HTTP.  ISCORE_LOG controls log verbosity.
"""

from __future__ import annotations

import asyncio
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

from . import engine
from .engine import ChoicePolicy, InputEvent
from .model import Score, VarValue

log = logging.getLogger("iscore.server")

_LEVELS = {"debug": logging.DEBUG, "info": logging.INFO,
           "warning": logging.WARNING, "error": logging.ERROR}


def configure_logging() -> None:
    level = _LEVELS.get(os.environ.get("ISCORE_LOG", "info").lower(), logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(message)s")


@dataclass
class SessionConfig:
    score_path: str = ""
    tick_ms: int = 1000  # 1 tick = 1 s by default
    seed: int = 0
    choice_policy: ChoicePolicy = ChoicePolicy.INTERACTIVE
    port: int = 8765

    def __post_init__(self):
        if self.tick_ms < 1:
            raise ValueError("tick_ms must be >= 1")


# ---------------------------------------------------------------------------
# Wire schema
# ---------------------------------------------------------------------------

CLIENT_TYPES = {
    "start": (), "pause": (), "resume": (), "snapshot_request": (),
    "set_var": ("to", "name", "value"),
    "choose": ("point", "relation"),
}
SERVER_TYPES = {
    "tick": ("t",), "trace": ("event",),
    "awaiting_choice": ("point", "options"),
    "snapshot": ("state",), "ended": ("reason", "t"),
    "error": ("code", "message"),
}


def validate_wire_message(doc, direction: str = "server") -> str | None:
    """None when `doc` is a well-formed WireMessage, else a reason."""
    if not isinstance(doc, dict):
        return "not an object"
    mtype = doc.get("type")
    table = SERVER_TYPES if direction == "server" else CLIENT_TYPES
    if mtype not in table:
        return f"unknown type {mtype!r}"
    for key in table[mtype]:
        if key not in doc:
            return f"missing field {key!r}"
    if mtype == "set_var" and not isinstance(doc.get("value"), (bool, int)):
        return "value must be a boolean or an integer"
    if mtype == "tick" and not isinstance(doc.get("t"), int):
        return "t must be an integer"
    if mtype == "awaiting_choice" and not isinstance(doc.get("options"), list):
        return "options must be a list"
    return None


def _error(code: str, message: str) -> dict:
    return {"type": "error", "code": code, "message": message}


# ---------------------------------------------------------------------------
# Session
# ---------------------------------------------------------------------------

@dataclass
class Session:
    """Protocol logic, free of transport: feed messages, pump ticks."""

    score: Score
    seed: int = 0
    policy: ChoicePolicy = ChoicePolicy.INTERACTIVE
    status: str = "idle"  # idle | running | paused | ended
    queue: list = field(default_factory=list)
    batches: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)
    end_reason: str | None = None

    def __post_init__(self):
        self.state = engine.init(self.score, self.seed, self.policy)

    def handle_message(self, doc) -> list:
        """Replies for the sender; state changes apply at tick boundaries."""
        reason = validate_wire_message(doc, "client")
        if reason is not None:
            return [_error("BAD_MESSAGE", reason)]
        mtype = doc["type"]
        if mtype == "start":
            if self.status == "idle":
                self.status = "running"
            return []
        if mtype == "pause":
            if self.status == "running":
                self.status = "paused"
            return []
        if mtype == "resume":
            if self.status == "paused":
                self.status = "running"
            return []
        if mtype == "snapshot_request":
            return [{"type": "snapshot", "state": self.state.snapshot()}]
        if self.status == "ended":
            return [_error("ENDED", "session already ended")]
        tick = self.state.tick
        if mtype == "set_var":
            self.queue.append(InputEvent.set_var(
                tick, doc["to"], doc["name"], VarValue.from_json(doc["value"])))
            return []
        # choose
        if doc["point"] not in self.state.awaiting:
            return [_error("NOT_AWAITING",
                           f"point {doc['point']!r} is not awaiting a choice")]
        self.queue.append(InputEvent.choose(tick, doc["point"], doc["relation"]))
        return []

    def tick_once(self) -> list:
        """One logical tick; returns the messages to broadcast."""
        if self.status != "running":
            return []
        tick = self.state.tick
        batch, self.queue = self.queue, []
        self.batches[tick] = batch
        self.state, events = engine.step(self.state, batch)
        self.trace.extend(events)
        msgs = [{"type": "trace", "event": e.to_json()} for e in events]
        for e in events:
            if e.kind == "AwaitingChoice":
                msgs.append({"type": "awaiting_choice", "point": e.get("point"),
                             "options": e.get("options")})
        msgs.append({"type": "tick", "t": tick})
        if self.state.is_quiescent():
            self.status = "ended"
            self.end_reason = "quiescent"
            msgs.append({"type": "ended", "reason": "quiescent", "t": tick})
        return msgs

    def dump_script(self) -> list:
        """The session's input batches as a replayable `run` script."""
        return [{"tick": t, "event": ev.to_json()}
                for t in sorted(self.batches) for ev in self.batches[t]
                if ev.kind != "noop"]


# ---------------------------------------------------------------------------
# Transport
# ---------------------------------------------------------------------------

_CONTENT_TYPES = {".html": "text/html; charset=utf-8",
                  ".js": "text/javascript; charset=utf-8",
                  ".css": "text/css; charset=utf-8",
                  ".json": "application/json",
                  ".map": "application/json"}


def default_static_dir() -> Path | None:
    bundle = Path(__file__).resolve().parent / "webui"
    return bundle if bundle.is_dir() else None


async def serve_session(score: Score | None, cfg: SessionConfig,
                        static_dir: Path | None = None,
                        dump_script_path: str | None = None,
                        max_wall_ticks: int | None = None,
                        ready: asyncio.Event | None = None,
                        session: Session | None = None) -> Session:
    """Run one session over WebSocket until it ends; returns the Session."""
    from http import HTTPStatus

    from websockets.asyncio.server import serve as ws_serve

    if session is None:
        session = Session(score, cfg.seed, cfg.choice_policy)
    clients: set = set()
    static = static_dir if static_dir is not None else default_static_dir()
    done = asyncio.Event()

    def process_request(connection, request):
        if request.path == "/ws":
            return None  # WebSocket handshake proceeds
        path = "/index.html" if request.path == "/" else request.path
        if static is not None:
            target = (static / path.lstrip("/")).resolve()
            if str(target).startswith(str(static.resolve())) and target.is_file():
                response = connection.respond(
                    HTTPStatus.OK, target.read_text(encoding="utf-8"))
                ctype = _CONTENT_TYPES.get(target.suffix)
                if ctype:
                    response.headers["Content-Type"] = ctype
                return response
        return connection.respond(HTTPStatus.NOT_FOUND, "not found\n")

    async def broadcast(msgs):
        for msg in msgs:
            frame = json.dumps(msg, ensure_ascii=False)
            for ws in list(clients):
                try:
                    await ws.send(frame)
                except Exception:
                    clients.discard(ws)

    async def handler(websocket):
        clients.add(websocket)
        log.info("client connected (%d online)", len(clients))
        try:
            async for raw in websocket:
                try:
                    doc = json.loads(raw)
                except json.JSONDecodeError:
                    await websocket.send(json.dumps(_error("BAD_JSON", "not JSON")))
                    continue
                for reply in session.handle_message(doc):
                    await websocket.send(json.dumps(reply, ensure_ascii=False))
        finally:
            clients.discard(websocket)
            log.info("client disconnected (%d online)", len(clients))

    async def ticker():
        walls = 0
        while session.status != "ended":
            await asyncio.sleep(cfg.tick_ms / 1000.0)
            walls += 1
            msgs = session.tick_once()
            if msgs:
                await broadcast(msgs)
            if max_wall_ticks is not None and walls >= max_wall_ticks:
                break
        done.set()

    async with ws_serve(handler, "127.0.0.1", cfg.port,
                        process_request=process_request) as server:
        session.bound_port = server.sockets[0].getsockname()[1]
        log.info("serving on ws://127.0.0.1:%d/ws (tick %d ms)",
                 session.bound_port, cfg.tick_ms)
        if ready is not None:
            ready.set()
        pump = asyncio.create_task(ticker())
        await done.wait()
        pump.cancel()

    if dump_script_path:
        Path(dump_script_path).write_text(
            json.dumps(session.dump_script(), indent=2) + "\n")
        log.info("input batches dumped to %s", dump_script_path)
    return session
