"""HTTP reward service: instance lookup, plan scoring, rollouts, oracle plans.

Stateless between requests (the oracle plan cache only memoizes pure results),
so identical bodies always produce identical responses.
"""

from __future__ import annotations

import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .model import world_to_doc
from .generate import TaskInstance
from .episodes import OraclePlanner
from .planner_io import FormatError, parse_plan
from .rewards import DEFAULT_BUFFER_CAP, oracle_motion, rollout, task_reward_stage2


class RewardService:
    def __init__(self, instances: list[TaskInstance]):
        self.instances = {i.index: i for i in instances}
        self.oracle = OraclePlanner()

    def handle(self, method: str, path: str, body: dict | None) -> tuple[int, dict]:
        if method == "GET" and path == "/healthz":
            return 200, {"ok": True, "instances": len(self.instances)}
        if method == "GET" and path.startswith("/instance/"):
            return self._get_instance(path[len("/instance/") :])
        if method == "POST" and path == "/score":
            return self._score(body)
        if method == "POST" and path == "/rollout":
            return self._rollout(body)
        if method == "POST" and path == "/oracle_plan":
            return self._oracle_plan(body)
        return 404, {"error": f"no route {method} {path}"}

    def _lookup(self, raw_id) -> TaskInstance | None:
        try:
            return self.instances.get(int(raw_id))
        except (TypeError, ValueError):
            return None

    def _get_instance(self, raw_id: str) -> tuple[int, dict]:
        inst = self._lookup(raw_id)
        if inst is None:
            return 404, {"error": f"unknown instance {raw_id!r}"}
        doc = world_to_doc(inst.world, inst.initial)
        doc["index"] = inst.index
        doc["reference_len"] = inst.reference_len
        return 200, doc

    def _score(self, body: dict | None) -> tuple[int, dict]:
        if not isinstance(body, dict):
            return 400, {"error": "body must be a JSON object"}
        inst = self._lookup(body.get("instance_id"))
        if inst is None:
            return 404, {"error": f"unknown instance {body.get('instance_id')!r}"}
        plan_text = body.get("plan_text")
        if not isinstance(plan_text, str):
            return 400, {"error": "plan_text must be a string"}
        stage = body.get("stage", 3)
        if stage not in (2, 3, "2", "3"):
            return 400, {"error": "stage must be 2 or 3"}
        stage = int(stage)

        # Bad plan text is a scoring outcome, not a request error.
        try:
            parse_plan(plan_text)
        except FormatError as err:
            reward = task_reward_stage2((), None, inst.reference_len, False)
            return 200, {
                "reward": reward.to_doc(),
                "outcome": "ExecutionErr",
                "format_error": str(err),
                "format_error_position": err.position,
            }

        record = rollout(inst, [plan_text], oracle_motion)[0]
        if stage == 2:
            reward = task_reward_stage2(
                record.plan, record.outcome, inst.reference_len, record.well_formed
            )
        else:
            reward = record.reward
        return 200, {
            "reward": reward.to_doc(),
            "outcome": record.outcome.kind.value,
            "n_infeasible": record.n_infeasible,
            "executed_steps": record.executed_steps,
        }

    def _rollout(self, body: dict | None) -> tuple[int, dict]:
        if not isinstance(body, dict):
            return 400, {"error": "body must be a JSON object"}
        inst = self._lookup(body.get("instance_id"))
        if inst is None:
            return 404, {"error": f"unknown instance {body.get('instance_id')!r}"}
        plans = body.get("plans")
        if not isinstance(plans, list) or not all(isinstance(p, str) for p in plans) or not plans:
            return 400, {"error": "plans must be a non-empty list of strings"}
        cap = body.get("n_cap", DEFAULT_BUFFER_CAP)
        if not isinstance(cap, int) or cap < 0:
            return 400, {"error": "n_cap must be a non-negative integer"}
        records = rollout(inst, plans, oracle_motion, buffer_cap=cap)
        return 200, {"records": [r.to_doc() for r in records]}

    def _oracle_plan(self, body: dict | None) -> tuple[int, dict]:
        if not isinstance(body, dict) or not isinstance(body.get("observation"), str):
            return 400, {"error": "observation must be a string"}
        mode = body.get("mode", "FullPlan")
        try:
            text = self.oracle.request("service", mode, body["observation"])
        except ValueError as err:
            return 400, {"error": f"unparsable observation: {err}"}
        return 200, {"type": "plan_response", "text": text}


def make_server(instances: list[TaskInstance], port: int, host: str = "127.0.0.1") -> ThreadingHTTPServer:
    service = RewardService(instances)

    class Handler(BaseHTTPRequestHandler):
        def _reply(self, status: int, doc: dict) -> None:
            payload = json.dumps(doc, sort_keys=True).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def do_GET(self) -> None:  # noqa: N802 (http.server API)
            status, doc = service.handle("GET", self.path, None)
            self._reply(status, doc)

        def do_POST(self) -> None:  # noqa: N802
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length) if length else b""
            try:
                body = json.loads(raw.decode() or "null")
            except json.JSONDecodeError:
                self._reply(400, {"error": "invalid JSON body"})
                return
            status, doc = service.handle("POST", self.path, body)
            self._reply(status, doc)

        def log_message(self, fmt, *args):  # silence per-request stderr noise
            pass

    return ThreadingHTTPServer((host, port), Handler)


def serve_rewards(instances: list[TaskInstance], port: int, host: str = "127.0.0.1") -> None:
    server = make_server(instances, port, host)
    try:
        server.serve_forever()
    finally:
        server.server_close()
