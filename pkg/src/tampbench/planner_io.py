"""Canonical observation text, strict plan grammar, and failure-feedback lines.

The observation block is byte-deterministic with fixed 2-decimal coordinates and
parses back into a (WorldSpec, WorldState) pair, so an external process can plan
from text alone. The plan grammar is the well-formedness gate behind the format
reward: a JSON array of step objects mapping "Robot <k>" to
"Move [<x>, <y>, <z>] <True|False>".
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .geometry import Pose
from .model import (
    GEO,
    BoxSpec,
    Geometry,
    ObstacleSpec,
    OutcomeKind,
    RobotSpec,
    WorldSpec,
    WorldState,
    cell_of,
)
from .executor import Outcome, RobotCommand, TaskPlan, TaskStep

OBS_OPEN = "<observation>"
OBS_CLOSE = "</observation>"

# The strict plan grammar. Reasoning text may precede the final block.
PLAN_GRAMMAR_EBNF = """
plan      = "[" [ step { "," step } ] "]" | step ;
step      = "{" [ entry { "," entry } ] "}" ;
entry     = robot-key ":" command ;
robot-key = '"Robot ' integer '"' ;
command   = '"Move [' number ", " number ", " number "] " boolean '"' ;
boolean   = "True" | "False" ;
number    = [ "-" ] digit { digit } [ "." digit { digit } ] ;
integer   = digit { digit } ;
""".strip()


class FormatError(ValueError):
    """Plan text rejected by the strict grammar; `position` is the first bad offset."""

    def __init__(self, message: str, position: int = 0):
        super().__init__(message)
        self.position = position


@dataclass(frozen=True)
class Feedback:
    """Execution feedback appended to an observation after a failed step."""

    previous_plan: str
    outcome: Outcome


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _vec(p) -> str:
    return f"[{_fmt(p[0])}, {_fmt(p[1])}, {_fmt(p[2])}]"


def fail_line(outcome: Outcome) -> str:
    """Frozen FAIL phrasing, one per failure kind."""
    robot = outcome.at_robot
    pose = _vec(outcome.at_pose) if outcome.at_pose is not None else "[?, ?, ?]"
    kind = outcome.kind
    if kind is OutcomeKind.RobObsCollision:
        return f"FAIL: collision predicted at {pose} (Robot {robot} vs obstacle)"
    if kind is OutcomeKind.RobRobCollision:
        return f"FAIL: collision predicted at {pose} (Robot {robot} vs robot)"
    if kind is OutcomeKind.UnreachableMotion:
        return f"FAIL: Robot {robot} motion infeasible"
    if kind is OutcomeKind.FarFromTarget:
        return f"FAIL: Robot {robot} stopped far from target at {pose}"
    if kind is OutcomeKind.TaskIncomplete:
        return "FAIL: task incomplete, objects remain off their targets"
    if kind is OutcomeKind.ExecutionErr:
        if robot is not None:
            return f"FAIL: Robot {robot} motion plan invalid ({outcome.detail})"
        return f"FAIL: plan rejected ({outcome.detail})"
    raise ValueError(f"no FAIL line for outcome kind {kind}")


def render_observation(
    world: WorldSpec,
    state: WorldState,
    feedback: Feedback | None = None,
    geo: Geometry = GEO,
) -> str:
    lines = [OBS_OPEN]
    lines.append(f"Map: {world.map_cols} x {world.map_rows} cells, pitch {_fmt(world.cell_pitch)}")
    lines.append(f"Step: {state.step_index}")
    lines.append("Object positions:")
    for b, box in enumerate(world.boxes):
        target = (
            box.target[0] * world.cell_pitch + world.cell_pitch / 2,
            box.target[1] * world.cell_pitch + world.cell_pitch / 2,
            geo.box_rest_z,
        )
        lines.append(
            f"    Object {b}: {_vec(state.box_pos[b])} target={_vec(target)}"
        )
    lines.append("Robot states:")
    for r, robot in enumerate(world.robots):
        carrying = state.carrying[r]
        carry_txt = "None" if carrying is None else str(carrying)
        lines.append(
            f"    Robot {r}: base=[{_fmt(robot.base_xy[0])}, {_fmt(robot.base_xy[1])}, 0.00], "
            f"arm={_vec(state.arm_pos[r])}, reach={_fmt(robot.reach_radius)}, carrying={carry_txt}"
        )
    lines.append("Obstacles:")
    for o, obs in enumerate(world.obstacles):
        center = (
            obs.cell[0] * world.cell_pitch + world.cell_pitch / 2,
            obs.cell[1] * world.cell_pitch + world.cell_pitch / 2,
            0.0,
        )
        lines.append(
            f"    Obstacle {o}: {_vec(center)}, radius={_fmt(obs.radius)}, height={_fmt(obs.height)}"
        )
    if feedback is not None:
        lines.append("Execution feedback:")
        lines.append(f"    Previous plan: {feedback.previous_plan}")
        lines.append(f"    {fail_line(feedback.outcome)}")
    lines.append(OBS_CLOSE)
    return "\n".join(lines)


_MAP_RE = re.compile(r"Map: (\d+) x (\d+) cells, pitch ([\d.]+)")
_STEP_RE = re.compile(r"Step: (\d+)")
_OBJ_RE = re.compile(
    r"Object (\d+): \[([-\d.]+), ([-\d.]+), ([-\d.]+)\] target=\[([-\d.]+), ([-\d.]+), ([-\d.]+)\]"
)
_ROBOT_RE = re.compile(
    r"Robot (\d+): base=\[([-\d.]+), ([-\d.]+), [-\d.]+\], arm=\[([-\d.]+), ([-\d.]+), ([-\d.]+)\], "
    r"reach=([-\d.]+), carrying=(None|\d+)"
)
_OBS_RE = re.compile(
    r"Obstacle (\d+): \[([-\d.]+), ([-\d.]+), [-\d.]+\], radius=([-\d.]+), height=([-\d.]+)"
)


def parse_observation(text: str, geo: Geometry = GEO) -> tuple[WorldSpec, WorldState]:
    """Rebuild the world and snapshot from the last observation block in the text."""
    start = text.rfind(OBS_OPEN)
    end = text.rfind(OBS_CLOSE)
    if start < 0 or end < 0 or end < start:
        raise ValueError("no observation block found")
    block = text[start:end]

    m = _MAP_RE.search(block)
    if not m:
        raise ValueError("observation lacks a map line")
    cols, rows, pitch = int(m.group(1)), int(m.group(2)), float(m.group(3))
    step_m = _STEP_RE.search(block)
    step_index = int(step_m.group(1)) if step_m else 0

    boxes, box_pos = [], []
    for m in _OBJ_RE.finditer(block):
        pos = Pose(float(m.group(2)), float(m.group(3)), float(m.group(4)))
        tgt = (float(m.group(5)), float(m.group(6)))
        box_pos.append(pos)
        boxes.append(
            BoxSpec(
                initial=_cell_from_xy(pos.x, pos.y, pitch, cols, rows),
                target=_cell_from_xy(tgt[0], tgt[1], pitch, cols, rows),
            )
        )

    robots, arms, carrying = [], [], []
    for m in _ROBOT_RE.finditer(block):
        rid = int(m.group(1))
        base = (float(m.group(2)), float(m.group(3)))
        arm = Pose(float(m.group(4)), float(m.group(5)), float(m.group(6)))
        reach = float(m.group(7))
        carry = None if m.group(8) == "None" else int(m.group(8))
        joint_col = max(1, min(cols - 1, round((base[0] + pitch / 2) / pitch)))
        joint_row = max(1, min(rows - 1, round((base[1] - pitch / 2) / pitch)))
        block_cells = (
            (joint_col - 1, joint_row - 1),
            (joint_col, joint_row - 1),
            (joint_col - 1, joint_row),
            (joint_col, joint_row),
        )
        robots.append(
            RobotSpec(id=rid, base_xy=base, home_block=block_cells, reach_radius=reach)
        )
        arms.append(arm)
        carrying.append(carry)

    obstacles = []
    for m in _OBS_RE.finditer(block):
        center = (float(m.group(2)), float(m.group(3)))
        obstacles.append(
            ObstacleSpec(
                cell=_cell_from_xy(center[0], center[1], pitch, cols, rows),
                radius=float(m.group(4)),
                height=float(m.group(5)),
            )
        )

    world = WorldSpec(
        map_cols=cols,
        map_rows=rows,
        cell_pitch=pitch,
        robots=tuple(robots),
        obstacles=tuple(obstacles),
        boxes=tuple(boxes),
    )
    state = WorldState(
        arm_pos=tuple(arms),
        carrying=tuple(carrying),
        box_pos=tuple(box_pos),
        step_index=step_index,
    )
    return world, state


def _cell_from_xy(x: float, y: float, pitch: float, cols: int, rows: int) -> tuple[int, int]:
    col = min(cols - 1, max(0, int(x // pitch)))
    row = min(rows - 1, max(0, int(y // pitch)))
    return col, row


_CMD_RE = re.compile(
    r"^Move \[\s*(-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?)\s*\] (True|False)$"
)
_KEY_RE = re.compile(r"^Robot (\d+)$")


def render_command(cmd: RobotCommand) -> str:
    flag = "True" if cmd.carry else "False"
    return f"Move {_vec(cmd.target)} {flag}"


def render_step(step: TaskStep) -> dict:
    return {f"Robot {c.robot_id}": render_command(c) for c in sorted(step, key=lambda c: c.robot_id)}


def render_plan(plan: TaskPlan) -> str:
    return json.dumps([render_step(step) for step in plan])


def _final_json_block(text: str):
    """Last parseable JSON array/object in the text, ignoring surrounding prose."""
    decoder = json.JSONDecoder()
    best = None
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in "[{":
            try:
                value, end = decoder.raw_decode(text, i)
            except json.JSONDecodeError:
                i += 1
                continue
            if isinstance(value, (list, dict)):
                best = (value, i)
                i = end
                continue
        i += 1
    return best


def parse_plan(text: str) -> TaskPlan:
    """Strict-grammar parse of the final bracketed step list in the text."""
    if not isinstance(text, str) or not text.strip():
        raise FormatError("empty plan text", 0)
    block = _final_json_block(text)
    if block is None:
        raise FormatError("no JSON step list found", 0)
    value, offset = block
    if isinstance(value, dict):
        value = [value]
    steps: list[TaskStep] = []
    for s, raw_step in enumerate(value):
        if not isinstance(raw_step, dict):
            raise FormatError(f"step {s} is not an object", offset)
        commands = []
        for key, raw_cmd in raw_step.items():
            key_m = _KEY_RE.match(key)
            if not key_m:
                raise FormatError(f"bad robot key {key!r}", _locate(text, key, offset))
            if not isinstance(raw_cmd, str):
                raise FormatError(f"command for {key} is not a string", _locate(text, key, offset))
            cmd_m = _CMD_RE.match(raw_cmd)
            if not cmd_m:
                raise FormatError(f"bad command {raw_cmd!r}", _locate(text, raw_cmd, offset))
            commands.append(
                RobotCommand(
                    robot_id=int(key_m.group(1)),
                    target=Pose(
                        round(float(cmd_m.group(1)), 2),
                        round(float(cmd_m.group(2)), 2),
                        round(float(cmd_m.group(3)), 2),
                    ),
                    carry=cmd_m.group(4) == "True",
                )
            )
        ids = [c.robot_id for c in commands]
        if len(set(ids)) != len(ids):
            raise FormatError(f"step {s} commands a robot twice", offset)
        steps.append(tuple(sorted(commands, key=lambda c: c.robot_id)))
    return tuple(steps)


def _locate(text: str, token: str, fallback: int) -> int:
    pos = text.find(token)
    return pos if pos >= 0 else fallback
