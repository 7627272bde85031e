"""Session protocol, replayability, and the WebSocket transport."""

import asyncio
import json
from pathlib import Path

import pytest

from iscore.dsl import parse_text
from iscore.edition import compile_score
from iscore.engine import ChoicePolicy, InputEvent, run
from iscore.server import (
    Session, SessionConfig, serve_session, validate_wire_message,
)

SCORES = Path(__file__).parent.parent / "scores"


def compiled_loop():
    score = parse_text((SCORES / "loop.isc").read_text())
    out, _, _ = compile_score(score)
    return out


def drive_session_to_end(session, inputs_by_tick, max_ticks=100):
    """Pump ticks, injecting messages just before their target tick."""
    broadcasts = []
    session.handle_message({"type": "start"})
    for _ in range(max_ticks):
        tick = session.state.tick
        for msg in inputs_by_tick.get(tick, []):
            replies = session.handle_message(msg)
            assert not any(r.get("type") == "error" for r in replies), replies
        broadcasts.extend(session.tick_once())
        if session.status == "ended":
            break
    return broadcasts


class TestSessionProtocol:
    def test_loop_session_ends_at_16(self):
        session = Session(compiled_loop(), seed=1, policy=ChoicePolicy.INTERACTIVE)
        msgs = drive_session_to_end(session, {
            10: [{"type": "set_var", "to": "A", "name": "finish", "value": True}],
        })
        ended = [m for m in msgs if m["type"] == "ended"]
        assert ended == [{"type": "ended", "reason": "quiescent", "t": 16}]

    def test_every_broadcast_validates_against_schema(self):
        session = Session(compiled_loop(), seed=1)
        msgs = drive_session_to_end(session, {
            10: [{"type": "set_var", "to": "A", "name": "finish", "value": True}],
        })
        for msg in msgs:
            assert validate_wire_message(msg, "server") is None, msg

    def test_unknown_type_errors_session_preserved(self):
        session = Session(compiled_loop(), seed=1)
        replies = session.handle_message({"type": "mystery"})
        assert replies[0]["type"] == "error"
        assert session.status == "idle"
        # The session keeps working afterwards.
        session.handle_message({"type": "start"})
        assert session.tick_once()

    def test_choose_when_not_awaiting_errors(self):
        session = Session(compiled_loop(), seed=1)
        session.handle_message({"type": "start"})
        session.tick_once()
        replies = session.handle_message(
            {"type": "choose", "point": "C.end", "relation": "r5"})
        assert replies[0]["type"] == "error"
        assert replies[0]["code"] == "NOT_AWAITING"

    def test_snapshot_request(self):
        session = Session(compiled_loop(), seed=1)
        session.handle_message({"type": "start"})
        session.tick_once()
        replies = session.handle_message({"type": "snapshot_request"})
        assert replies[0]["type"] == "snapshot"
        insts = {i["to"] for i in replies[0]["state"]["instances"]}
        assert insts == {"A", "B"}

    def test_pause_freezes_logical_time(self):
        session = Session(compiled_loop(), seed=1)
        session.handle_message({"type": "start"})
        session.tick_once()
        session.handle_message({"type": "pause"})
        assert session.tick_once() == []
        assert session.state.tick == 1
        session.handle_message({"type": "resume"})
        assert session.tick_once()
        assert session.state.tick == 2

    def test_set_var_applies_next_boundary(self):
        session = Session(compiled_loop(), seed=1)
        session.handle_message({"type": "start"})
        for _ in range(9):
            session.tick_once()
        # Sent during tick 9's window, applied when tick 9 steps... the spec
        # example: set during tick 9 -> applied at tick 10, run ends at 16.
        session.tick_once()  # tick 9 passes with no inputs
        session.handle_message(
            {"type": "set_var", "to": "A", "name": "finish", "value": True})
        msgs = []
        while session.status != "ended":
            msgs.extend(session.tick_once())
        ended = [m for m in msgs if m["type"] == "ended"]
        assert ended[0]["t"] == 16
        var_events = [m for m in msgs if m["type"] == "trace"
                      and m["event"]["kind"] == "VarSet"]
        assert var_events[0]["event"]["tick"] == 10


class TestReplay:
    def test_dumped_batches_replay_to_identical_trace(self):
        session = Session(compiled_loop(), seed=1, policy=ChoicePolicy.INTERACTIVE)
        drive_session_to_end(session, {
            10: [{"type": "set_var", "to": "A", "name": "finish", "value": True}],
        })
        script_doc = session.dump_script()
        script = [InputEvent.from_json(e["tick"], e["event"]) for e in script_doc]
        replay = run(compiled_loop(), script, max_ticks=100, seed=1,
                     policy=ChoicePolicy.INTERACTIVE)
        session_jsonl = "\n".join(json.dumps(e.to_json(), ensure_ascii=False)
                                  for e in session.trace) + "\n"
        assert replay.to_jsonl() == session_jsonl

    def test_logical_trace_independent_of_tick_partitioning(self):
        # Same per-tick batches, different wall pacing: identical traces.
        a = Session(compiled_loop(), seed=4)
        b = Session(compiled_loop(), seed=4)
        inputs = {10: [{"type": "set_var", "to": "A", "name": "finish", "value": True}]}
        drive_session_to_end(a, inputs)
        b.handle_message({"type": "start"})
        for _ in range(3):
            b.tick_once()
        b.handle_message({"type": "pause"})
        for _ in range(5):
            b.tick_once()  # paused; nothing advances
        b.handle_message({"type": "resume"})
        while b.status != "ended":
            if b.state.tick == 10:
                b.handle_message(inputs[10][0])
            b.tick_once()
        assert [e.to_json() for e in a.trace] == [e.to_json() for e in b.trace]


class TestWireValidation:
    @pytest.mark.parametrize("msg,direction,ok", [
        ({"type": "tick", "t": 3}, "server", True),
        ({"type": "tick"}, "server", False),
        ({"type": "set_var", "to": "A", "name": "x", "value": 1}, "client", True),
        ({"type": "set_var", "to": "A", "name": "x", "value": "nope"}, "client", False),
        ({"type": "bogus"}, "client", False),
        ({"type": "awaiting_choice", "point": "p", "options": ["r1"]}, "server", True),
        ("not a dict", "server", False),
    ])
    def test_cases(self, msg, direction, ok):
        assert (validate_wire_message(msg, direction) is None) is ok

    def test_schema_document_ships(self):
        doc = json.loads((Path(__file__).parent.parent / "docs" /
                          "wire-schema.json").read_text())
        server_types = {s["properties"]["type"]["const"]
                        for s in doc["definitions"]["server_message"]["oneOf"]}
        assert server_types == {"tick", "trace", "awaiting_choice", "snapshot",
                                "ended", "error"}


class TestWebSocketTransport:
    def test_full_session_over_sockets(self):
        asyncio.run(asyncio.wait_for(self._drive(), timeout=30))

    async def _drive(self):
        from websockets.asyncio.client import connect

        cfg = SessionConfig(tick_ms=20, seed=1,
                            choice_policy=ChoicePolicy.INTERACTIVE, port=0)
        session = Session(compiled_loop(), cfg.seed, cfg.choice_policy)
        ready = asyncio.Event()
        server = asyncio.create_task(
            serve_session(None, cfg, ready=ready, session=session))
        await ready.wait()
        received = []
        async with connect(f"ws://127.0.0.1:{session.bound_port}/ws") as ws:
            await ws.send(json.dumps({"type": "start"}))
            async for raw in ws:
                msg = json.loads(raw)
                received.append(msg)
                assert validate_wire_message(msg, "server") is None, msg
                if msg["type"] == "tick" and msg["t"] == 9:
                    await ws.send(json.dumps({"type": "set_var", "to": "A",
                                              "name": "finish", "value": True}))
                if msg["type"] == "ended":
                    break
        await server
        ended = [m for m in received if m["type"] == "ended"]
        assert ended == [{"type": "ended", "reason": "quiescent", "t": 16}]
        # The broadcast trace equals an equivalent scripted run.
        script = [InputEvent.from_json(e["tick"], e["event"])
                  for e in session.dump_script()]
        replay = run(compiled_loop(), script, max_ticks=100, seed=1,
                     policy=ChoicePolicy.INTERACTIVE)
        wire_events = [m["event"] for m in received if m["type"] == "trace"]
        assert wire_events == [e.to_json() for e in replay.events]

    def test_two_clients_receive_identical_streams(self):
        asyncio.run(asyncio.wait_for(self._two_clients(), timeout=30))

    async def _two_clients(self):
        from websockets.asyncio.client import connect

        cfg = SessionConfig(tick_ms=15, seed=1,
                            choice_policy=ChoicePolicy.INTERACTIVE, port=0)
        session = Session(compiled_loop(), cfg.seed, cfg.choice_policy)
        ready = asyncio.Event()
        server = asyncio.create_task(
            serve_session(None, cfg, ready=ready, session=session))
        await ready.wait()
        url = f"ws://127.0.0.1:{session.bound_port}/ws"

        async def listen(ws, out):
            async for raw in ws:
                msg = json.loads(raw)
                out.append(msg)
                if msg.get("type") == "ended":
                    return

        async with connect(url) as a, connect(url) as b:
            got_a, got_b = [], []
            tasks = [asyncio.create_task(listen(a, got_a)),
                     asyncio.create_task(listen(b, got_b))]
            await a.send(json.dumps({"type": "start"}))
            await a.send(json.dumps({"type": "set_var", "to": "A",
                                     "name": "finish", "value": True}))
            await asyncio.gather(*tasks)
        await server
        assert got_a == got_b
        assert any(m["type"] == "ended" for m in got_a)

    def test_static_files_served_over_http(self, tmp_path):
        asyncio.run(asyncio.wait_for(self._static(tmp_path), timeout=30))

    async def _static(self, tmp_path):
        (tmp_path / "index.html").write_text("<html>timeline</html>")
        cfg = SessionConfig(tick_ms=1000, seed=0, port=0)
        session = Session(compiled_loop(), 0, ChoicePolicy.INTERACTIVE)
        ready = asyncio.Event()
        server = asyncio.create_task(serve_session(
            None, cfg, static_dir=tmp_path, ready=ready, session=session,
            max_wall_ticks=1))
        await ready.wait()

        async def fetch(path):
            reader, writer = await asyncio.open_connection(
                "127.0.0.1", session.bound_port)
            writer.write(f"GET {path} HTTP/1.1\r\nHost: x\r\n"
                         "Connection: close\r\n\r\n".encode())
            await writer.drain()
            data = await reader.read()
            writer.close()
            return data.decode()

        index = await fetch("/")
        assert "200" in index.splitlines()[0] and "timeline" in index
        missing = await fetch("/nope.js")
        assert "404" in missing.splitlines()[0]
        session.status = "ended"  # release the ticker
        await server
