"""Priority-guided frontier search over a waypoint lattice.

Certifies motion feasibility for one robot against a frozen local view and, when
feasible, emits a waypoint plan whose execution is collision-free by
construction: every accepted edge is validated with the same swept-arm
predicates the executor applies per tick.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from typing import Sequence

from .geometry import (
    Pose,
    dist3,
    dist_xy,
    interpolate_path,
    point_cylinder_clearance,
    point_segment_distance,
    segment_penetrates_cylinder,
    segment_segment_distance,
)
from .model import GEO, Geometry, WorldSpec, WorldState, arm_base, obstacle_center, reachable
from .executor import WaypointPlan


class InvalidQuery(ValueError):
    """Start or target pose is not reachable by the robot."""


INFEASIBLE = "Infeasible"
FEASIBLE = "Feasible"


@dataclass(frozen=True)
class FrontierConfig:
    w_goal: float = 1.0
    w_work: float = 1.0
    w_clear: float = 0.5
    shell_min: int = 1
    shell_max: int = 3
    max_depth: int = 24
    max_expansions: int = 5000
    max_stall: int = 400
    min_chain: int = 1
    lattice_pitch: float = 0.25
    z_levels: tuple[float, ...] = (0.10, 0.17, 0.25)
    clearance_threshold: float = 0.05  # below this, nodes start paying a penalty
    stall_epsilon: float = 0.01


@dataclass(frozen=True)
class MotionQuery:
    """One robot's motion problem against its frozen local view."""

    robot_id: int
    start: Pose
    target: Pose
    carry: bool
    # Frozen view: every other robot's (base, effector) arm segment, the obstacle
    # cylinders as (cx, cy, radius, height), and nearby resting boxes (informational).
    arms: tuple[tuple[Pose, Pose], ...]
    obstacles: tuple[tuple[float, float, float, float], ...]
    boxes: tuple[Pose, ...] = ()

    def key(self) -> tuple:
        return (
            self.robot_id,
            tuple(round(v, 4) for v in self.start),
            tuple(round(v, 4) for v in self.target),
            self.carry,
            tuple(tuple(round(v, 4) for v in a + b) for a, b in self.arms),
            tuple(tuple(round(v, 4) for v in o) for o in self.obstacles),
        )


def build_query(
    world: WorldSpec,
    state: WorldState,
    robot_id: int,
    target: Pose,
    carry: bool,
    geo: Geometry = GEO,
) -> MotionQuery:
    """Freeze the robot's local view out of a world snapshot."""
    robot = world.robots[robot_id]
    view_radius = robot.reach_radius + geo.cell_pitch
    arms = tuple(
        (arm_base(r), state.arm_pos[i])
        for i, r in enumerate(world.robots)
        if i != robot_id
    )
    obstacles = []
    for o in world.obstacles:
        c = obstacle_center(world, o)
        if dist_xy(robot.base_xy, c) <= view_radius + o.radius:
            obstacles.append((c.x, c.y, o.radius, o.height))
    carried = state.carrying[robot_id]
    boxes = tuple(
        p
        for b, p in enumerate(state.box_pos)
        if b != carried and dist_xy(robot.base_xy, p) <= view_radius
    )
    return MotionQuery(
        robot_id=robot_id,
        start=state.arm_pos[robot_id],
        target=target,
        carry=carry,
        arms=arms,
        obstacles=tuple(obstacles),
        boxes=boxes,
    )


def point_view_clearance(query: MotionQuery, p: Pose, geo: Geometry = GEO) -> float:
    """Signed clearance of an effector point against the frozen view."""
    best = geo.clearance_cap
    for cx, cy, radius, height in query.obstacles:
        d = point_cylinder_clearance(p, cx, cy, radius, height)
        if d < best:
            best = d
    for base, tip in query.arms:
        d = point_segment_distance(p, base, tip)
        if d < best:
            best = d
    return best


def _arm_state_valid(query: MotionQuery, base: Pose, tip: Pose, geo: Geometry) -> bool:
    """Executor-equivalent snapshot check for one effector position."""
    for cx, cy, radius, height in query.obstacles:
        if segment_penetrates_cylinder(base, tip, cx, cy, radius, height):
            return False
    if query.carry:
        box = (tip.x, tip.y, tip.z - geo.grasp_drop)
        for cx, cy, radius, height in query.obstacles:
            if point_cylinder_clearance(box, cx, cy, radius, height) < 0.0:
                return False
    for obase, otip in query.arms:
        if segment_segment_distance(base, tip, obase, otip) < geo.min_robot_separation:
            return False
    return True


def edge_feasible(
    world: WorldSpec, query: MotionQuery, a: Pose, b: Pose, geo: Geometry = GEO
) -> bool:
    """True iff the swept arm stays valid at every interpolation sample of edge ab."""
    base = arm_base(world.robots[query.robot_id])
    for p in interpolate_path((a, b), geo.sample_step):
        if not _arm_state_valid(query, base, p, geo):
            return False
    return True


def node_feasible(world: WorldSpec, query: MotionQuery, p: Pose, geo: Geometry = GEO) -> bool:
    robot = world.robots[query.robot_id]
    if not reachable(world, robot, p):
        return False
    return _arm_state_valid(query, arm_base(robot), p, geo)


def priority(
    path: Sequence[Pose],
    target: Pose,
    config: FrontierConfig,
    clearances: Sequence[float],
) -> float:
    """Weighted sum: traveled-plus-remaining length, workspace gap, clearance penalty."""
    if not path:
        raise ValueError("empty path")
    length = sum(dist3(a, b) for a, b in zip(path, path[1:]))
    head = path[-1]
    remainder = dist3(head, target)
    penalty = sum(
        max(0.0, config.clearance_threshold - c) / config.clearance_threshold
        for c in clearances
    )
    return (
        config.w_goal * (length + remainder)
        + config.w_work * remainder
        + config.w_clear * penalty
    )


def _shell_offsets(radius: int) -> list[tuple[int, int]]:
    """Lattice offsets at exact Chebyshev radius, angle-ascending."""
    ring = [
        (dx, dy)
        for dx in range(-radius, radius + 1)
        for dy in range(-radius, radius + 1)
        if max(abs(dx), abs(dy)) == radius
    ]
    ring.sort(key=lambda o: (math.atan2(o[1], o[0]) % (2 * math.pi), o[0], o[1]))
    return ring


_SHELLS = {r: _shell_offsets(r) for r in range(1, 8)}


def search(
    world: WorldSpec,
    query: MotionQuery,
    config: FrontierConfig = FrontierConfig(),
    geo: Geometry = GEO,
) -> WaypointPlan | str:
    """Find a waypoint plan for the query, or the Infeasible verdict.

    Pops the lowest-priority partial path; connects directly to the target when
    the chain is long enough and the final edge is valid; otherwise expands
    lattice neighbours in Chebyshev shells (wide shells only from well-cleared
    heads). Returns INFEASIBLE when budgets trip or the frontier empties.
    """
    robot = world.robots[query.robot_id]
    if not reachable(world, robot, query.start):
        raise InvalidQuery(f"start {tuple(query.start)} unreachable by robot {query.robot_id}")
    if not reachable(world, robot, query.target):
        raise InvalidQuery(f"target {tuple(query.target)} unreachable by robot {query.robot_id}")
    if not node_feasible(world, query, query.start, geo):
        return INFEASIBLE
    if not node_feasible(world, query, query.target, geo):
        return INFEASIBLE

    pitch = config.lattice_pitch
    start_clear = point_view_clearance(query, query.start, geo)
    open_heap: list[tuple[float, int, tuple[Pose, ...], tuple[float, ...]]] = []
    seq = 0
    heapq.heappush(
        open_heap, (priority([query.start], query.target, config, [start_clear]), seq, (query.start,), (start_clear,))
    )
    best_len: dict[tuple[int, int, int], float] = {}
    expansions = 0
    stall = 0
    best_gap = math.inf

    while open_heap:
        _, _, path, clearances = heapq.heappop(open_heap)
        head = path[-1]
        expansions += 1
        if expansions > config.max_expansions:
            return INFEASIBLE

        gap = dist3(head, query.target)
        if gap < best_gap - config.stall_epsilon:
            best_gap = gap
            stall = 0
        else:
            stall += 1
            if stall > config.max_stall:
                return INFEASIBLE

        if len(path) >= config.min_chain and edge_feasible(world, query, head, query.target, geo):
            if dist3(head, query.target) <= 1e-12:
                return WaypointPlan(query.robot_id, path)
            return WaypointPlan(query.robot_id, path + (query.target,))

        if len(path) >= config.max_depth:
            continue

        head_u = round(head.x / pitch)
        head_v = round(head.y / pitch)
        head_clear = clearances[-1]
        max_shell = (
            config.shell_max
            if head_clear >= 2 * config.clearance_threshold
            else config.shell_min
        )
        for radius in range(config.shell_min, max_shell + 1):
            for dx, dy in _SHELLS[radius]:
                x = (head_u + dx) * pitch
                y = (head_v + dy) * pitch
                for z in config.z_levels:
                    cand = Pose(x, y, z)
                    ck = (head_u + dx, head_v + dy, round(z * 100))
                    new_len = sum(dist3(a, b) for a, b in zip(path, path[1:])) + dist3(head, cand)
                    prev = best_len.get(ck)
                    if prev is not None and prev <= new_len + 1e-9:
                        continue
                    if not node_feasible(world, query, cand, geo):
                        continue
                    if not edge_feasible(world, query, head, cand, geo):
                        continue
                    best_len[ck] = new_len
                    new_path = path + (cand,)
                    new_clear = clearances + (point_view_clearance(query, cand, geo),)
                    seq += 1
                    heapq.heappush(
                        open_heap,
                        (priority(new_path, query.target, config, new_clear), seq, new_path, new_clear),
                    )
    return INFEASIBLE


def certify(
    world: WorldSpec,
    query: MotionQuery,
    config: FrontierConfig = FrontierConfig(),
    geo: Geometry = GEO,
) -> str:
    """Feasible/Infeasible verdict: the search result with the plan discarded."""
    result = search(world, query, config, geo)
    return INFEASIBLE if result == INFEASIBLE else FEASIBLE


def plan_to_wire(plan: WaypointPlan) -> str:
    """Wire form: {"robot_id": k, "waypoints": [[x,y,z], ...]}."""
    return json.dumps(
        {
            "robot_id": plan.robot_id,
            "waypoints": [[round(w.x, 4), round(w.y, 4), round(w.z, 4)] for w in plan.waypoints],
        },
        separators=(",", ":"),
    )


def plan_from_wire(text: str) -> WaypointPlan:
    doc = json.loads(text)
    return WaypointPlan(
        robot_id=int(doc["robot_id"]),
        waypoints=tuple(Pose(float(w[0]), float(w[1]), float(w[2])) for w in doc["waypoints"]),
    )
