"""Reference planner client for the ndjson plan_request/plan_response protocol.

Two planning backends:
  * oracle-echo: forwards each observation to the harness's /oracle_plan
    endpoint and replies with the oracle's plan text.
  * stub: answers with an empty plan; the place where a real model call slots
    in is marked below.

Conversation memory follows the planning mode: ICReplan conversations
accumulate their exchanges keyed by conversation_id, NCReplan requests leave no
trace once answered, FullPlan keeps nothing either. A state_query message (or
GET /state on the http transport) exposes the memory for conformance tests.
"""

from __future__ import annotations

import json
import sys
import urllib.error
import urllib.request
from dataclasses import dataclass


@dataclass
class AdapterConfig:
    mode: str = "oracle-echo"  # or "stub"
    transport: str = "stdio"  # or "http"
    endpoint: str = ""  # harness base URL for oracle-echo
    port: int = 0  # http transport listen port
    timeout: float = 60.0

    def __post_init__(self):
        if self.transport not in ("stdio", "http"):
            raise ValueError(f"unknown transport {self.transport!r}")
        if self.mode not in ("oracle-echo", "stub"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "oracle-echo" and not self.endpoint:
            raise ValueError("oracle-echo mode needs --endpoint")


class Adapter:
    def __init__(self, config: AdapterConfig):
        self.config = config
        # conversation_id -> list of {observation, text}; ICReplan only
        self.memory: dict[str, list[dict]] = {}

    # -- planning backends -------------------------------------------------

    def _oracle_plan(self, observation: str, mode: str) -> str:
        body = json.dumps({"observation": observation, "mode": mode}).encode()
        req = urllib.request.Request(
            self.config.endpoint.rstrip("/") + "/oracle_plan",
            data=body,
            headers={"Content-Type": "application/json"},
        )
        with urllib.request.urlopen(req, timeout=self.config.timeout) as resp:
            doc = json.loads(resp.read().decode())
        return doc["text"]

    def _stub_plan(self, observation: str, mode: str) -> str:
        # Replace this with a model call: feed `observation` (and, for
        # ICReplan, self.memory[conversation_id]) to the planner of your
        # choice and return its raw text.
        return "[]"

    # -- protocol ----------------------------------------------------------

    def handle(self, message: dict) -> dict:
        if not isinstance(message, dict):
            return {"type": "error", "message": "message must be a JSON object"}
        mtype = message.get("type")
        if mtype == "state_query":
            return {
                "type": "state",
                "conversations": {cid: len(turns) for cid, turns in self.memory.items()},
            }
        if mtype != "plan_request":
            return {"type": "error", "message": f"unsupported message type {mtype!r}"}
        mode = message.get("mode", "FullPlan")
        conversation_id = message.get("conversation_id")
        observation = message.get("observation")
        if not isinstance(observation, str) or not isinstance(conversation_id, str):
            return {"type": "error", "message": "plan_request needs conversation_id and observation strings"}

        try:
            if self.config.mode == "oracle-echo":
                text = self._oracle_plan(observation, mode)
            else:
                text = self._stub_plan(observation, mode)
        except (urllib.error.URLError, TimeoutError, KeyError, json.JSONDecodeError) as err:
            return {"type": "error", "message": f"planning backend failed: {err}"}

        if mode == "ICReplan":
            self.memory.setdefault(conversation_id, []).append(
                {"observation": observation, "text": text}
            )
        # FullPlan and NCReplan hold no memory across conversations.
        return {"type": "plan_response", "text": text}

    # -- transports ----------------------------------------------------------

    def serve_stdio(self, stdin=None, stdout=None) -> None:
        stdin = stdin or sys.stdin
        stdout = stdout or sys.stdout
        for line in stdin:
            line = line.strip()
            if not line:
                continue
            try:
                message = json.loads(line)
            except json.JSONDecodeError as err:
                reply = {"type": "error", "message": f"invalid JSON: {err}"}
            else:
                reply = self.handle(message)
            stdout.write(json.dumps(reply) + "\n")
            stdout.flush()

    def serve_http(self) -> None:
        from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

        adapter = self

        class Handler(BaseHTTPRequestHandler):
            def _reply(self, status: int, doc: dict) -> None:
                payload = json.dumps(doc).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def do_GET(self):  # noqa: N802 (http.server API)
                if self.path == "/state":
                    self._reply(200, adapter.handle({"type": "state_query"}))
                else:
                    self._reply(404, {"type": "error", "message": f"no route {self.path}"})

            def do_POST(self):  # noqa: N802
                length = int(self.headers.get("Content-Length", 0))
                try:
                    message = json.loads(self.rfile.read(length).decode() or "null")
                except json.JSONDecodeError as err:
                    self._reply(400, {"type": "error", "message": f"invalid JSON: {err}"})
                    return
                reply = adapter.handle(message)
                self._reply(200 if reply.get("type") != "error" else 400, reply)

            def log_message(self, fmt, *args):
                pass

        server = ThreadingHTTPServer(("127.0.0.1", self.config.port), Handler)
        print(f"adapter listening on 127.0.0.1:{server.server_address[1]}", flush=True)
        try:
            server.serve_forever()
        finally:
            server.server_close()


def serve_planner(config: AdapterConfig) -> None:
    adapter = Adapter(config)
    if config.transport == "stdio":
        adapter.serve_stdio()
    else:
        adapter.serve_http()
