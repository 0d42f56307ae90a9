"""Planning-mode drivers and planner transports.

A planner is anything that answers plan_request messages: the in-process oracle,
a scripted fixture, a child process speaking newline-delimited JSON on stdio, or
an HTTP endpoint taking the same bodies. One episode owns one conversation at a
time; transcripts record the wire traffic for the mode-contract assertions.
"""

from __future__ import annotations

import json
import os
import queue
import shlex
import subprocess
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field

from .model import GEO, Geometry, OutcomeKind, boxes_placed
from .executor import Outcome, execute_step
from .generate import TaskInstance
from .motion_search import INFEASIBLE, FrontierConfig, InvalidQuery, build_query, certify
from .planner_io import Feedback, FormatError, parse_observation, parse_plan, render_observation, render_plan, render_step
from .rewards import MotionPlanner, oracle_motion
from .task_search import BudgetExhausted, SearchConfig, Unsolvable, plan as task_plan

FULL_PLAN = "FullPlan"
IC_REPLAN = "ICReplan"
NC_REPLAN = "NCReplan"
MODES = (FULL_PLAN, IC_REPLAN, NC_REPLAN)

PLANNER_CMD_ENV = "TAMPBENCH_PLANNER_CMD"


class ProtocolError(Exception):
    pass


class PlannerTimeout(Exception):
    pass


@dataclass
class EpisodeReport:
    outcome: Outcome
    steps_executed: int
    replans: int
    format_errors: int
    solution_time_s: float
    simulation_time_s: float
    transcripts: dict[str, list[dict]] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.outcome.kind is OutcomeKind.Success

    def write_transcripts(self, path) -> None:
        """One JSON line per wire message, tagged with its conversation id."""
        with open(path, "w", encoding="utf-8") as fh:
            for conversation_id, messages in self.transcripts.items():
                for message in messages:
                    fh.write(
                        json.dumps({"conversation_id": conversation_id, **message}) + "\n"
                    )


class OraclePlanner:
    """In-process reference planner: parses the observation, runs A*, renders text."""

    def __init__(
        self,
        search: SearchConfig | None = None,
        frontier: FrontierConfig | None = None,
        geo: Geometry = GEO,
    ):
        self.search = search or SearchConfig()
        self.frontier = frontier or FrontierConfig()
        self.geo = geo
        self._cache: dict[str, str] = {}

    def request(self, conversation_id: str, mode: str, observation: str, timeout: float = 0.0) -> str:
        cached = self._cache.get(observation)
        if cached is not None:
            return cached
        world, state = parse_observation(observation, self.geo)
        try:
            result = task_plan(world, state, self.search, self.frontier, self.geo)
            text = render_plan(result.plan)
        except (Unsolvable, BudgetExhausted):
            text = "[]"
        self._cache[observation] = text
        return text

    def close(self) -> None:
        pass


class ScriptedPlanner:
    """Fixture planner replaying queued responses; records every request it sees."""

    def __init__(self, responses: list[str]):
        self.responses = list(responses)
        self.requests: list[dict] = []

    def request(self, conversation_id: str, mode: str, observation: str, timeout: float = 0.0) -> str:
        self.requests.append(
            {"conversation_id": conversation_id, "mode": mode, "observation": observation}
        )
        if not self.responses:
            return "[]"
        return self.responses.pop(0)

    def close(self) -> None:
        pass


class SubprocessPlanner:
    """Child process speaking {type: plan_request}/{type: plan_response} ndjson on stdio."""

    def __init__(self, argv: list[str] | str, timeout: float = 60.0):
        if isinstance(argv, str):
            argv = shlex.split(argv)
        self.timeout = timeout
        self.proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            bufsize=1,
        )
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        assert self.proc.stdout is not None
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def send(self, message: dict) -> dict:
        if self.proc.poll() is not None:
            raise ProtocolError("planner process exited")
        assert self.proc.stdin is not None
        self.proc.stdin.write(json.dumps(message) + "\n")
        self.proc.stdin.flush()
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise PlannerTimeout(f"no response within {self.timeout}s")
        if line is None:
            raise ProtocolError("planner closed its stdout")
        try:
            return json.loads(line)
        except json.JSONDecodeError as err:
            raise ProtocolError(f"planner emitted invalid JSON: {err}")

    def request(self, conversation_id: str, mode: str, observation: str, timeout: float = 0.0) -> str:
        reply = self.send(
            {
                "type": "plan_request",
                "mode": mode,
                "conversation_id": conversation_id,
                "observation": observation,
            }
        )
        if reply.get("type") != "plan_response" or not isinstance(reply.get("text"), str):
            raise ProtocolError(f"unexpected reply {reply!r}")
        return reply["text"]

    def close(self) -> None:
        try:
            if self.proc.poll() is None:
                self.proc.terminate()
                self.proc.wait(timeout=5)
        except Exception:
            self.proc.kill()


class HttpPlanner:
    """POST binding: same request/response bodies as the stdio protocol."""

    def __init__(self, url: str, timeout: float = 60.0):
        self.url = url
        self.timeout = timeout

    def request(self, conversation_id: str, mode: str, observation: str, timeout: float = 0.0) -> str:
        body = json.dumps(
            {
                "type": "plan_request",
                "mode": mode,
                "conversation_id": conversation_id,
                "observation": observation,
            }
        ).encode()
        req = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                reply = json.loads(resp.read().decode())
        except urllib.error.URLError as err:
            if isinstance(getattr(err, "reason", None), TimeoutError):
                raise PlannerTimeout(str(err))
            raise ProtocolError(str(err))
        except TimeoutError as err:
            raise PlannerTimeout(str(err))
        if reply.get("type") != "plan_response" or not isinstance(reply.get("text"), str):
            raise ProtocolError(f"unexpected reply {reply!r}")
        return reply["text"]

    def close(self) -> None:
        pass


def make_planner(spec: str | None, timeout: float = 60.0):
    """Planner from a spec string: 'oracle', 'cmd:<argv>', an http(s) URL, or $TAMPBENCH_PLANNER_CMD."""
    if spec is None or spec == "env":
        cmd = os.environ.get(PLANNER_CMD_ENV)
        if not cmd:
            raise ValueError(f"no planner spec and {PLANNER_CMD_ENV} unset")
        return SubprocessPlanner(cmd, timeout)
    if spec == "oracle":
        return OraclePlanner()
    if spec.startswith("cmd:"):
        return SubprocessPlanner(spec[4:], timeout)
    if spec.startswith("http://") or spec.startswith("https://"):
        return HttpPlanner(spec, timeout)
    raise ValueError(f"unknown planner spec {spec!r}")


def run_episode(
    instance: TaskInstance,
    planner,
    mode: str,
    motion_planner: MotionPlanner = oracle_motion,
    max_replans: int = 6,
    episode_id: str = "ep0",
    trial: int = 0,
    frontier: FrontierConfig | None = None,
    geo: Geometry = GEO,
    request_timeout: float = 120.0,
) -> EpisodeReport:
    """Drive one episode in FullPlan / ICReplan / NCReplan mode.

    Replanning modes request a fresh remaining plan after each failure with the
    pre-failure observation and a FAIL line; IC keeps one conversation, NC opens
    a new one per round. Raises PlannerTimeout / ProtocolError from the planner.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    world = instance.world
    frontier = frontier or FrontierConfig()
    state = instance.initial
    transcripts: dict[str, list[dict]] = {}
    steps_executed = 0
    format_errors = 0
    replans = 0
    solution_time = 0.0
    simulation_time = 0.0
    feedback: Feedback | None = None
    conv = f"{episode_id}-t{trial}-c0"
    final: Outcome | None = None

    while True:
        observation = render_observation(world, state, feedback, geo)
        request = {
            "type": "plan_request",
            "mode": mode,
            "conversation_id": conv,
            "observation": observation,
        }
        transcripts.setdefault(conv, []).append(request)
        t0 = time.monotonic()
        text = planner.request(conv, mode, observation, request_timeout)
        solution_time += time.monotonic() - t0
        transcripts[conv].append({"type": "plan_response", "text": text})

        failure: Outcome | None = None
        failed_step_text = ""
        try:
            parsed = parse_plan(text)
        except FormatError as err:
            format_errors += 1
            failure = Outcome(
                OutcomeKind.ExecutionErr, f"plan format invalid: {err}", at_step=state.step_index
            )
            failed_step_text = text.strip()[:200]
            parsed = None

        if parsed is not None:
            t1 = time.monotonic()
            round_outcomes: list[Outcome] = []
            for step in parsed:
                step_failure = None
                step_plans = {}
                for cmd in step:
                    if cmd.robot_id < 0 or cmd.robot_id >= len(world.robots):
                        step_failure = Outcome(
                            OutcomeKind.ExecutionErr,
                            f"unknown robot {cmd.robot_id}",
                            at_step=state.step_index,
                            at_robot=cmd.robot_id,
                        )
                        break
                    query = build_query(world, state, cmd.robot_id, cmd.target, cmd.carry, geo)
                    try:
                        verdict = certify(world, query, frontier, geo)
                    except InvalidQuery:
                        verdict = INFEASIBLE
                    if verdict == INFEASIBLE:
                        step_failure = Outcome(
                            OutcomeKind.UnreachableMotion,
                            "motion certified infeasible",
                            at_step=state.step_index,
                            at_pose=cmd.target,
                            at_robot=cmd.robot_id,
                        )
                        break
                    supplied = motion_planner(world, query)
                    if supplied is None:
                        step_failure = Outcome(
                            OutcomeKind.ExecutionErr,
                            f"motion planner returned no plan for robot {cmd.robot_id}",
                            at_step=state.step_index,
                            at_robot=cmd.robot_id,
                        )
                        break
                    step_plans[cmd.robot_id] = supplied
                if step_failure is None and step:
                    new_state, outcome = execute_step(world, state, step, step_plans, geo)
                    if outcome.ok:
                        state = new_state
                        steps_executed += 1
                        round_outcomes.append(outcome)
                    else:
                        step_failure = outcome
                if step_failure is not None:
                    failure = step_failure
                    failed_step_text = json.dumps(render_step(step))
                    break
            simulation_time += time.monotonic() - t1
            if failure is None:
                if boxes_placed(world, state, geo):
                    final = Outcome(OutcomeKind.Success, at_step=state.step_index)
                    break
                failure = Outcome(
                    OutcomeKind.TaskIncomplete,
                    "plan finished with objects off target",
                    at_step=state.step_index,
                )
                failed_step_text = text.strip()[:200]

        if mode == FULL_PLAN or replans >= max_replans:
            final = failure
            break
        replans += 1
        feedback = Feedback(previous_plan=failed_step_text, outcome=failure)
        if mode == NC_REPLAN:
            conv = f"{episode_id}-t{trial}-c{replans}"

    return EpisodeReport(
        outcome=final,
        steps_executed=steps_executed,
        replans=replans,
        format_errors=format_errors,
        solution_time_s=solution_time,
        simulation_time_s=simulation_time,
        transcripts=transcripts,
    )
