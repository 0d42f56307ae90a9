"""Waypoint interpolation, multi-robot step execution, and episode classification.

This is the physics substitute: straight-segment trajectories, synchronized
time-normalized ticks, and the closed failure taxonomy. Failed steps never
mutate the world; the caller always gets back either the advanced snapshot or
its untouched input.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .geometry import Pose, dist3, interpolate_path, point_cylinder_clearance, segment_penetrates_cylinder, segment_segment_distance
from .model import (
    GEO,
    Geometry,
    OutcomeKind,
    WorldSpec,
    WorldState,
    arm_base,
    boxes_placed,
    obstacle_center,
    reachable,
    valid_pose,
)


class EmptyPlan(ValueError):
    pass


@dataclass(frozen=True)
class RobotCommand:
    """One robot's assignment within a task step: target pose plus carry flag."""

    robot_id: int
    target: Pose
    carry: bool


TaskStep = tuple[RobotCommand, ...]
TaskPlan = tuple[TaskStep, ...]


@dataclass(frozen=True)
class WaypointPlan:
    """Ordered effector waypoints realizing one robot's command."""

    robot_id: int
    waypoints: tuple[Pose, ...]

    def validity_error(self, world: WorldSpec, geo: Geometry = GEO) -> str | None:
        """Structural invariant check; returns a reason string or None."""
        if len(self.waypoints) < 1:
            return "empty waypoint list"
        robot = world.robots[self.robot_id]
        for i, w in enumerate(self.waypoints):
            if not valid_pose(world, w, geo):
                return f"waypoint {i} out of bounds"
            if not reachable(world, robot, w):
                return f"waypoint {i} outside robot {self.robot_id} reach"
        for a, b in zip(self.waypoints, self.waypoints[1:]):
            if dist3(a, b) <= 1e-12:
                return "consecutive duplicate waypoints"
        return None


@dataclass(frozen=True)
class Outcome:
    """Result of a step or an episode under the closed taxonomy."""

    kind: OutcomeKind
    detail: str = ""
    at_step: int | None = None
    at_pose: Pose | None = None
    at_robot: int | None = None

    @property
    def ok(self) -> bool:
        return self.kind is OutcomeKind.Success


def interpolate(plan: WaypointPlan, step: float) -> list[Pose]:
    """Trajectory samples for a waypoint plan; raises EmptyPlan on zero waypoints."""
    if not plan.waypoints:
        raise EmptyPlan(f"robot {plan.robot_id} waypoint plan is empty")
    if step <= 0:
        raise ValueError("interpolation step must be positive")
    return interpolate_path(plan.waypoints, step)


def _tick_index(tick: int, length: int, t_max: int) -> int:
    if t_max <= 1 or length <= 1:
        return min(tick, length - 1)
    return round(tick * (length - 1) / (t_max - 1))


def _resolve_grasp(
    world: WorldSpec, state: WorldState, robot_id: int, geo: Geometry
) -> int | None:
    """Box carried by the robot, or the nearest free box within grasp tolerance."""
    held = state.carrying[robot_id]
    if held is not None:
        return held
    arm = state.arm_pos[robot_id]
    candidates = [
        (dist3(arm, p), b)
        for b, p in enumerate(state.box_pos)
        if state.carrying_robot(b) is None and dist3(arm, p) <= geo.grasp_tolerance
    ]
    if not candidates:
        return None
    return min(candidates)[1]


def execute_step(
    world: WorldSpec,
    state: WorldState,
    commands: Sequence[RobotCommand],
    plans: Mapping[int, WaypointPlan],
    geo: Geometry = GEO,
    trace: list | None = None,
) -> tuple[WorldState, Outcome]:
    """Advance one task step: all active robots move simultaneously.

    Active trajectories are re-parameterized to a common tick count and checked
    for collisions at every tick. On any failure the input state is returned
    unchanged. `trace` optionally collects (tick, robot, x, y, z, carrying) rows.
    """
    step_idx = state.step_index

    def fail(kind: OutcomeKind, detail: str, pose: Pose | None = None, robot: int | None = None):
        return state, Outcome(kind, detail, at_step=step_idx, at_pose=pose, at_robot=robot)

    by_robot: dict[int, RobotCommand] = {}
    for cmd in commands:
        if cmd.robot_id < 0 or cmd.robot_id >= len(world.robots):
            return fail(OutcomeKind.ExecutionErr, f"unknown robot {cmd.robot_id}")
        if cmd.robot_id in by_robot:
            return fail(OutcomeKind.ExecutionErr, f"robot {cmd.robot_id} commanded twice")
        by_robot[cmd.robot_id] = cmd

    grasped: dict[int, int] = {}
    for r, cmd in by_robot.items():
        if not valid_pose(world, cmd.target, geo):
            return fail(OutcomeKind.ExecutionErr, f"robot {r} target out of bounds", cmd.target, r)
        if cmd.carry:
            box = _resolve_grasp(world, state, r, geo)
            if box is None:
                return fail(
                    OutcomeKind.ExecutionErr, f"robot {r} has no box within grasp tolerance", robot=r
                )
            if box in grasped.values():
                return fail(OutcomeKind.ExecutionErr, f"box commanded by two robots", robot=r)
            grasped[r] = box

    trajectories: dict[int, list[Pose]] = {}
    for r, cmd in by_robot.items():
        plan = plans.get(r)
        if plan is None:
            return fail(OutcomeKind.ExecutionErr, f"robot {r} commanded without a waypoint plan", robot=r)
        err = plan.validity_error(world, geo)
        if err is not None:
            return fail(OutcomeKind.ExecutionErr, f"robot {r}: {err}", robot=r)
        # Plans need not repeat the current pose; splice it in so the approach to
        # the first waypoint is collision-checked like every other segment.
        here = state.arm_pos[r]
        waypoints = plan.waypoints
        if dist3(here, waypoints[0]) > 1e-9:
            waypoints = (here,) + waypoints
        trajectories[r] = interpolate(WaypointPlan(r, waypoints), geo.sample_step)

    obstacles = [(obstacle_center(world, o), o.radius, o.height) for o in world.obstacles]
    bases = [arm_base(rob) for rob in world.robots]
    n = len(world.robots)

    arm = list(state.arm_pos)
    boxes = list(state.box_pos)
    carrying = list(state.carrying)
    for r, b in grasped.items():
        carrying[r] = b
    moving = sorted(trajectories)
    t_max = max((len(t) for t in trajectories.values()), default=1)

    for tick in range(t_max):
        for r in moving:
            traj = trajectories[r]
            arm[r] = traj[_tick_index(tick, len(traj), t_max)]
        for r in range(n):
            held = carrying[r]
            if held is not None:
                a = arm[r]
                boxes[held] = Pose(a.x, a.y, a.z - geo.grasp_drop)
        if trace is not None:
            for r in range(n):
                a = arm[r]
                trace.append((tick, r, a.x, a.y, a.z, carrying[r]))
        # Obstacle checks: moving arms every tick, static arms once at tick 0.
        check_rng = range(n) if tick == 0 else moving
        for r in check_rng:
            base = bases[r]
            tip = arm[r]
            for c, radius, height in obstacles:
                if segment_penetrates_cylinder(base, tip, c.x, c.y, radius, height):
                    return fail(OutcomeKind.RobObsCollision, f"robot {r} arm hit obstacle", tip, r)
            held = carrying[r]
            if held is not None:
                bp = boxes[held]
                for c, radius, height in obstacles:
                    if point_cylinder_clearance(bp, c.x, c.y, radius, height) < 0.0:
                        return fail(
                            OutcomeKind.RobObsCollision, f"robot {r} carried box hit obstacle", tip, r
                        )
        for i in range(n):
            for j in range(i + 1, n):
                if tick > 0 and i not in trajectories and j not in trajectories:
                    continue
                d = segment_segment_distance(bases[i], arm[i], bases[j], arm[j])
                if d < geo.min_robot_separation:
                    return fail(
                        OutcomeKind.RobRobCollision, f"robots {i} and {j} closer than separation", arm[i], i
                    )

    for r, cmd in by_robot.items():
        final = arm[r]
        if dist3(final, cmd.target) > geo.target_tolerance:
            return fail(OutcomeKind.FarFromTarget, f"robot {r} ended {dist3(final, cmd.target):.3f} from target", final, r)

    # Clean completion: release transported boxes at rest height.
    for r, cmd in by_robot.items():
        if cmd.carry:
            b = carrying[r]
            if b is not None:
                a = arm[r]
                boxes[b] = Pose(a.x, a.y, geo.box_rest_z)
                carrying[r] = None

    new_state = WorldState(
        arm_pos=tuple(arm),
        carrying=tuple(carrying),
        box_pos=tuple(boxes),
        step_index=step_idx + 1,
    )
    return new_state, Outcome(OutcomeKind.Success, at_step=step_idx)


def classify_episode(
    world: WorldSpec,
    outcomes: Sequence[Outcome],
    final_state: WorldState,
    geo: Geometry = GEO,
) -> Outcome:
    """First failing step wins; otherwise Success iff every box reached its target."""
    if not outcomes:
        raise ValueError("empty outcome trace")
    for o in outcomes:
        if not o.ok:
            return o
    if boxes_placed(world, final_state, geo):
        return Outcome(OutcomeKind.Success, at_step=outcomes[-1].at_step)
    return Outcome(
        OutcomeKind.TaskIncomplete,
        "not all objects reached their target cells",
        at_step=outcomes[-1].at_step,
    )


def write_trajectory_csv(path, rows: Iterable[tuple]) -> None:
    """Debug dump: tick, robot_id, x, y, z, carrying."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tick", "robot_id", "x", "y", "z", "carrying"])
        for row in rows:
            writer.writerow(row)
