"""Debug protocol server.

Serves the wire protocol documented in docs/protocol.md: JSON over HTTP with
one machine-plus-chart state per session.  A client can initialize a run
(parse or generate), execute it in its entirety, break at an instruction
offset / rule entry / opcode, or proceed instruction by instruction,
inspecting registers, the heap, the chart, and the disassembly at any point.

Sessions are isolated: each owns one ChartRun over its own heap; the compiled
artifact is shared immutably.  Implemented on the standard library's threaded
HTTP server so the browser UI can talk to it directly (CORS is open).
"""

from __future__ import annotations

import json
import threading
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .chart import ChartRun, Limits, chart_json, init_generate, init_parse
from .engine import CompiledArtifact, parse_sem_json, parse_sem_text
from .heap import Heap
from .machine import OP_NAMES, Program
from .render import fs_json

PROTOCOL_VERSION = 1


class DebugSession:
    def __init__(self, art: CompiledArtifact):
        self.art = art
        self.lock = threading.Lock()
        self.run: ChartRun | None = None
        self.program: Program | None = None
        self.breakpoints: set[int] = set()
        self.rule_breaks: set[int] = set()
        self.op_breaks: set[str] = set()
        self.hit: dict | None = None
        self.error: str | None = None

    # -- setup ---------------------------------------------------------------

    def init(self, task: str, payload: dict) -> dict:
        art = self.art
        heap = Heap(art.signature)
        if task == "parse":
            program = art.program
            initial = init_parse(program, payload["words"], heap)
        elif task == "generate":
            if not art.can_generate:
                raise ValueError("artifact has no generation program")
            program = art.gen_program
            if "sem" in payload:
                sem = parse_sem_text(art, payload["sem"])
            else:
                sem = parse_sem_json(art, payload["sem_json"])
            initial = init_generate(sem, heap, art.inv_cfg)
        else:
            raise ValueError(f"unknown task {task!r}")
        self.program = program
        self.run = ChartRun(program, heap, initial, Limits())
        self.hit = None
        self.error = None
        return self.state()

    # -- control ---------------------------------------------------------------

    def _at_breakpoint(self) -> dict | None:
        r = self.run
        m = r.machine
        if not m.active:
            return None
        if m.ip in self.breakpoints:
            return {"kind": "offset", "offset": m.ip}
        op = self.program.instructions[m.ip][0]
        if OP_NAMES[op] in self.op_breaks:
            return {"kind": "op", "op": OP_NAMES[op], "offset": m.ip}
        if m.rule in self.rule_breaks and any(
            ri.index == m.rule and ri.entry == m.ip for ri in self.program.rules
        ):
            return {"kind": "rule", "rule": m.rule, "offset": m.ip}
        return None

    def step(self, count: int = 1) -> dict:
        r = self.run
        if r is None:
            raise ValueError("session not initialized")
        self.hit = None
        for _ in range(count):
            if r.done:
                break
            try:
                r.step()
            except Exception as e:  # resource limits, machine faults
                self.error = str(e)
                break
        return self.state()

    def run_to_end(self, max_units: int = 10_000_000) -> dict:
        r = self.run
        if r is None:
            raise ValueError("session not initialized")
        self.hit = None
        units = 0
        while not r.done and units < max_units:
            hit = self._at_breakpoint()
            if hit is not None and units > 0:
                self.hit = hit
                break
            if hit is not None and units == 0:
                # stopped exactly here before: execute through the breakpoint
                pass
            try:
                if not r.step():
                    break
            except Exception as e:
                self.error = str(e)
                break
            units += 1
            hit = self._at_breakpoint()
            if hit is not None:
                self.hit = hit
                break
        return self.state()

    # -- inspection ---------------------------------------------------------------

    def state(self) -> dict:
        r = self.run
        if r is None:
            return {"initialized": False}
        m = r.machine
        cur_op = None
        rule_name = None
        if m.active and 0 <= m.ip < len(self.program.instructions):
            cur_op = OP_NAMES[self.program.instructions[m.ip][0]]
        if m.rule >= 0 and m.rule < len(self.program.rules):
            rule_name = self.program.rules[m.rule].name
        results = [
            {"from": e.frm, "to": e.to, "fs": fs_json(e.fs)} for e in r.chart.spanning()
        ]
        return {
            "initialized": True,
            "active": m.active,
            "ip": m.ip if m.active else None,
            "op": cur_op,
            "rule": m.rule if m.active else None,
            "rule_name": rule_name if m.active else None,
            "dot": m.matched if m.active else None,
            "done": r.done,
            "steps": m.steps,
            "counters": dict(r.chart.counters),
            "registers": self.registers(),
            "results": results,
            "hit": self.hit,
            "error": self.error,
        }

    def registers(self) -> list[dict]:
        r = self.run
        if r is None or not r.machine.active:
            return []
        heap = r.heap
        out = []
        for i, v in enumerate(r.machine.regs):
            if v < 0:
                continue
            c = heap.deref(v)
            out.append(
                {
                    "reg": i,
                    "ref": c,
                    "type": heap.sig.type_name(heap.data[c]),
                    "kind": ["node", "ref", "unexpanded"][heap.kind[c]],
                }
            )
        return out

    def heap_window(self, frm: int, to: int) -> dict:
        r = self.run
        heap = r.heap
        to = min(to, heap.size())
        cells = []
        for i in range(max(0, frm), to):
            cells.append(
                {
                    "i": i,
                    "kind": ["node", "ref", "unexpanded"][heap.kind[i]],
                    "type": heap.sig.type_name(heap.data[i])
                    if heap.kind[i] != 1
                    else None,
                    "target": heap.data[i] if heap.kind[i] == 1 else None,
                    "arcs": heap.arcs[i],
                }
            )
        return {"cells": cells, "mark": heap.mark, "size": heap.size()}

    def disasm(self) -> dict:
        prog = self.program or self.art.program
        lines = []
        entries = {r.entry: r.name for r in prog.rules}
        for ip, (op, a, b, c) in enumerate(prog.instructions):
            from .machine import _format_instr

            lines.append(
                {
                    "offset": ip,
                    "text": _format_instr(op, a, b, c, self.art.signature),
                    "rule": entries.get(ip),
                }
            )
        return {"lines": lines}


class DebugServer:
    def __init__(self, art: CompiledArtifact, host: str = "127.0.0.1", port: int = 8787):
        self.art = art
        self.sessions: dict[str, DebugSession] = {}
        self.lock = threading.Lock()
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, fmt, *args):  # quiet
                pass

            def _send(self, code: int, obj) -> None:
                body = json.dumps(obj).encode()
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.send_header("Access-Control-Allow-Origin", "*")
                self.send_header("Access-Control-Allow-Headers", "Content-Type, X-Debug-Protocol")
                self.send_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS")
                self.end_headers()
                self.wfile.write(body)

            def do_OPTIONS(self):
                self._send(200, {})

            def _check_version(self) -> bool:
                v = self.headers.get("X-Debug-Protocol")
                if v is not None and v != str(PROTOCOL_VERSION):
                    self._send(
                        409,
                        {
                            "error": "protocol version mismatch",
                            "server": PROTOCOL_VERSION,
                            "client": v,
                        },
                    )
                    return False
                return True

            def do_GET(self):
                if not self._check_version():
                    return
                try:
                    self._send(200, server.handle_get(self.path))
                except KeyError as e:
                    self._send(404, {"error": str(e)})
                except Exception as e:
                    self._send(400, {"error": str(e)})

            def do_POST(self):
                if not self._check_version():
                    return
                n = int(self.headers.get("Content-Length") or 0)
                payload = json.loads(self.rfile.read(n) or b"{}")
                try:
                    self._send(200, server.handle_post(self.path, payload))
                except KeyError as e:
                    self._send(404, {"error": str(e)})
                except Exception as e:
                    self._send(400, {"error": str(e)})

            def do_DELETE(self):
                try:
                    self._send(200, server.handle_delete(self.path))
                except KeyError as e:
                    self._send(404, {"error": str(e)})

        self.httpd = ThreadingHTTPServer((host, port), Handler)

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    def serve_forever(self):
        self.httpd.serve_forever()

    def start_background(self) -> threading.Thread:
        t = threading.Thread(target=self.serve_forever, daemon=True)
        t.start()
        return t

    def shutdown(self):
        self.httpd.shutdown()

    # -- request routing ---------------------------------------------------------

    def _session(self, sid: str) -> DebugSession:
        s = self.sessions.get(sid)
        if s is None:
            raise KeyError(f"no session {sid!r}")
        return s

    def handle_get(self, path: str) -> dict:
        url = urlparse(path)
        parts = [p for p in url.path.split("/") if p]
        if parts == ["api", "v1", "meta"]:
            return {
                "protocol": PROTOCOL_VERSION,
                "metadata": self.art.metadata,
                "types": self.art.signature.n_types,
                "rules": len(self.art.program.rules),
                "can_generate": self.art.can_generate,
            }
        if len(parts) >= 4 and parts[:3] == ["api", "v1", "session"]:
            s = self._session(parts[3])
            with s.lock:
                if len(parts) == 5 and parts[4] == "state":
                    return s.state()
                if len(parts) == 5 and parts[4] == "chart":
                    return chart_json(s.run.chart) if s.run else {"n": 0, "edges": []}
                if len(parts) == 5 and parts[4] == "heap":
                    q = parse_qs(url.query)
                    frm = int(q.get("from", ["0"])[0])
                    to = int(q.get("to", [str(frm + 64)])[0])
                    return s.heap_window(frm, to)
                if len(parts) == 5 and parts[4] == "disasm":
                    return s.disasm()
        raise KeyError(f"unknown path {path}")

    def handle_post(self, path: str, payload: dict) -> dict:
        parts = [p for p in path.split("?")[0].split("/") if p]
        if parts == ["api", "v1", "session"]:
            sid = uuid.uuid4().hex[:12]
            with self.lock:
                self.sessions[sid] = DebugSession(self.art)
            return {"protocol": PROTOCOL_VERSION, "session": sid}
        if len(parts) == 5 and parts[:3] == ["api", "v1", "session"]:
            s = self._session(parts[3])
            cmd = parts[4]
            with s.lock:
                if cmd == "init":
                    return s.init(payload.get("task", "parse"), payload)
                if cmd == "step":
                    return s.step(int(payload.get("count", 1)))
                if cmd == "run":
                    return s.run_to_end()
                if cmd == "break":
                    if "offset" in payload:
                        s.breakpoints.add(int(payload["offset"]))
                    if "rule" in payload:
                        prog = s.program or self.art.program
                        for r in prog.rules:
                            if r.name == payload["rule"] or r.index == payload["rule"]:
                                s.rule_breaks.add(r.index)
                    if "op" in payload:
                        s.op_breaks.add(str(payload["op"]))
                    return {
                        "offsets": sorted(s.breakpoints),
                        "rules": sorted(s.rule_breaks),
                        "ops": sorted(s.op_breaks),
                    }
        raise KeyError(f"unknown path {path}")

    def handle_delete(self, path: str) -> dict:
        parts = [p for p in path.split("/") if p]
        if len(parts) == 4 and parts[:3] == ["api", "v1", "session"]:
            with self.lock:
                self.sessions.pop(parts[3], None)
            return {"ok": True}
        raise KeyError(f"unknown path {path}")


def serve(art: CompiledArtifact, host: str = "127.0.0.1", port: int = 8787) -> DebugServer:
    return DebugServer(art, host, port)
