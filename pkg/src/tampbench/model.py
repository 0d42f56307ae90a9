"""World geometry, state snapshots, reachability, and collision predicates.

Everything here is an immutable value; all operations are pure functions, so any
number of searches or episode workers may share a world without locking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable

from .geometry import (
    Pose,
    dist_xy,
    interpolate_path,
    point_cylinder_clearance,
    point_segment_distance,
    segment_penetrates_cylinder,
    segment_segment_distance,
)


@dataclass(frozen=True)
class Geometry:
    """Geometric conventions of the benchmark; defaults are the frozen standard."""

    cell_pitch: float = 0.5
    obstacle_radius: float = 0.15
    obstacle_height: float = 0.30
    reach_radius: float = 0.80
    min_robot_separation: float = 0.06  # robot-robot collision threshold
    box_rest_z: float = 0.08
    hover_z: float = 0.10
    carry_z: float = 0.17
    grasp_drop: float = 0.02  # carried box hangs this far below the effector
    grasp_tolerance: float = 0.10
    target_tolerance: float = 0.05
    sample_step: float = 0.02  # clearance sampling and trajectory interpolation pitch
    max_z: float = 0.5
    clearance_cap: float = 10.0


GEO = Geometry()


class OutcomeKind(str, Enum):
    Success = "Success"
    ExecutionErr = "ExecutionErr"
    RobObsCollision = "RobObsCollision"
    RobRobCollision = "RobRobCollision"
    FarFromTarget = "FarFromTarget"
    UnreachableMotion = "UnreachableMotion"
    TaskIncomplete = "TaskIncomplete"


FAILURE_KINDS = tuple(k for k in OutcomeKind if k is not OutcomeKind.Success)

# Motion-level vs task-level split of the failure taxonomy.
MOTION_FAILURES = (
    OutcomeKind.ExecutionErr,
    OutcomeKind.RobObsCollision,
    OutcomeKind.RobRobCollision,
    OutcomeKind.FarFromTarget,
)
TASK_FAILURES = (OutcomeKind.UnreachableMotion, OutcomeKind.TaskIncomplete)


@dataclass(frozen=True)
class ObstacleSpec:
    """Vertical cylinder footprint occupying one grid cell."""

    cell: tuple[int, int]
    radius: float = GEO.obstacle_radius
    height: float = GEO.obstacle_height


@dataclass(frozen=True)
class BoxSpec:
    """A movable object: where it starts and the cell it must end in."""

    initial: tuple[int, int]
    target: tuple[int, int]


@dataclass(frozen=True)
class RobotSpec:
    """A fixed-base robot servicing a 2x2 block of cells around one grid joint."""

    id: int
    base_xy: tuple[float, float]
    home_block: tuple[tuple[int, int], ...]
    reach_radius: float = GEO.reach_radius
    arm_rest_z: float = GEO.hover_z


@dataclass(frozen=True)
class WorldSpec:
    """Static geometry: the map lattice, robots, obstacles, and box goals."""

    map_cols: int
    map_rows: int
    robots: tuple[RobotSpec, ...]
    obstacles: tuple[ObstacleSpec, ...]
    boxes: tuple[BoxSpec, ...]
    cell_pitch: float = GEO.cell_pitch
    seed: int = 0

    @property
    def width(self) -> float:
        return self.map_cols * self.cell_pitch

    @property
    def height(self) -> float:
        return self.map_rows * self.cell_pitch


@dataclass(frozen=True)
class WorldState:
    """Mutable snapshot of a world, stored as an immutable value.

    A box carried by robot r sits at arm_pos[r] lowered by the grasp drop; the
    executor maintains that invariant while advancing states.
    """

    arm_pos: tuple[Pose, ...]
    carrying: tuple[int | None, ...]
    box_pos: tuple[Pose, ...]
    step_index: int = 0

    def with_step(self, step_index: int) -> "WorldState":
        return replace(self, step_index=step_index)

    def carrying_robot(self, box_id: int) -> int | None:
        for r, c in enumerate(self.carrying):
            if c == box_id:
                return r
        return None


def cell_center(world: WorldSpec, col: int, row: int) -> Pose:
    """Center of cell (col,row) on the floor plane."""
    if not (0 <= col < world.map_cols and 0 <= row < world.map_rows):
        raise IndexError(f"cell ({col},{row}) outside {world.map_cols}x{world.map_rows} map")
    p = world.cell_pitch
    return Pose(p * col + p / 2, p * row + p / 2, 0.0)


def cell_of(world: WorldSpec, x: float, y: float) -> tuple[int, int]:
    """Cell indices containing point (x,y); inverse of cell_center up to rounding."""
    p = world.cell_pitch
    col = min(world.map_cols - 1, max(0, math.floor(x / p)))
    row = min(world.map_rows - 1, max(0, math.floor(y / p)))
    return col, row


def in_map(world: WorldSpec, x: float, y: float) -> bool:
    return 0.0 <= x <= world.width and 0.0 <= y <= world.height


def reachable(world: WorldSpec, robot: RobotSpec, p: Pose | tuple[float, float, float]) -> bool:
    """True iff p is inside the map and within the robot's reach radius in XY."""
    if not in_map(world, p[0], p[1]):
        return False
    return dist_xy(robot.base_xy, p) <= robot.reach_radius


def valid_pose(world: WorldSpec, p: Pose, geo: Geometry = GEO) -> bool:
    """Pose sanity independent of any robot: finite, z-bounded, near the map."""
    if not all(math.isfinite(v) for v in p):
        return False
    if not (0.0 <= p.z <= geo.max_z):
        return False
    pad = geo.reach_radius
    return -pad <= p.x <= world.width + pad and -pad <= p.y <= world.height + pad


def obstacle_center(world: WorldSpec, obs: ObstacleSpec) -> Pose:
    return cell_center(world, *obs.cell)


def arm_base(robot: RobotSpec) -> Pose:
    return Pose(robot.base_xy[0], robot.base_xy[1], 0.0)


def joint_for_block(world: WorldSpec, block: Iterable[tuple[int, int]]) -> tuple[float, float]:
    """Central grid joint of a 2x2 cell block."""
    cols = [c for c, _ in block]
    rows = [r for _, r in block]
    p = world.cell_pitch
    return (max(cols)) * p, (max(rows)) * p


def standard_base_for_joint(joint: tuple[float, float], pitch: float = GEO.cell_pitch) -> tuple[float, float]:
    """Standard layout: base at the north-west cell center adjacent to the joint."""
    return joint[0] - pitch / 2, joint[1] + pitch / 2


def home_block_for_joint(joint_col: int, joint_row: int) -> tuple[tuple[int, int], ...]:
    """Cells sharing the interior joint (joint_col, joint_row), joints indexed from 1."""
    i, j = joint_col, joint_row
    return ((i - 1, j - 1), (i, j - 1), (i - 1, j), (i, j))


def arm_rest_pose(world: WorldSpec, robot: RobotSpec, geo: Geometry = GEO) -> Pose:
    """Parked effector pose: 0.10 off the base toward the map center, at hover height."""
    cx, cy = world.width / 2, world.height / 2
    dx = 0.10 if robot.base_xy[0] <= cx else -0.10
    dy = 0.10 if robot.base_xy[1] <= cy else -0.10
    return Pose(robot.base_xy[0] + dx, robot.base_xy[1] + dy, robot.arm_rest_z)


def initial_state(world: WorldSpec, geo: Geometry = GEO) -> WorldState:
    """All arms parked, all boxes resting at their initial cell centers."""
    arms = tuple(arm_rest_pose(world, r, geo) for r in world.robots)
    boxes = tuple(
        Pose(c.x, c.y, geo.box_rest_z)
        for c in (cell_center(world, *b.initial) for b in world.boxes)
    )
    return WorldState(arm_pos=arms, carrying=(None,) * len(world.robots), box_pos=boxes)


def point_clearance(
    world: WorldSpec,
    state: WorldState,
    p: Pose | tuple[float, float, float],
    ignore_robot: int | None = None,
    geo: Geometry = GEO,
) -> float:
    """Distance from p to the nearest obstacle surface or other robot's arm segment.

    Obstacle distances are signed (negative = penetration depth); capped at
    geo.clearance_cap when nothing is closer.
    """
    best = geo.clearance_cap
    for obs in world.obstacles:
        c = obstacle_center(world, obs)
        d = point_cylinder_clearance(p, c.x, c.y, obs.radius, obs.height)
        if d < best:
            best = d
    for r, robot in enumerate(world.robots):
        if r == ignore_robot:
            continue
        d = point_segment_distance(p, arm_base(robot), state.arm_pos[r])
        if d < best:
            best = d
    return best


def segment_clearance(
    world: WorldSpec,
    state: WorldState,
    a: Pose,
    b: Pose,
    ignore_robot: int | None = None,
    geo: Geometry = GEO,
) -> float:
    """Minimum point clearance over samples along segment ab at the standard pitch."""
    best = geo.clearance_cap
    for p in interpolate_path((a, b), geo.sample_step):
        d = point_clearance(world, state, p, ignore_robot, geo)
        if d < best:
            best = d
    return best


def collides(world: WorldSpec, state: WorldState, geo: Geometry = GEO) -> OutcomeKind | None:
    """First physical-constraint violation in the snapshot, if any.

    Robot-obstacle: the straight base->effector arm segment or a carried box
    penetrating an obstacle cylinder. Robot-robot: two arm segments closer than
    the separation threshold.
    """
    obstacles = [(obstacle_center(world, o), o.radius, o.height) for o in world.obstacles]
    for r, robot in enumerate(world.robots):
        base = arm_base(robot)
        tip = state.arm_pos[r]
        for c, radius, height in obstacles:
            if segment_penetrates_cylinder(base, tip, c.x, c.y, radius, height):
                return OutcomeKind.RobObsCollision
        carried = state.carrying[r]
        if carried is not None:
            bp = state.box_pos[carried]
            for c, radius, height in obstacles:
                if point_cylinder_clearance(bp, c.x, c.y, radius, height) < 0.0:
                    return OutcomeKind.RobObsCollision
    n = len(world.robots)
    for i in range(n):
        bi = arm_base(world.robots[i])
        ti = state.arm_pos[i]
        for j in range(i + 1, n):
            d = segment_segment_distance(bi, ti, arm_base(world.robots[j]), state.arm_pos[j])
            if d < geo.min_robot_separation:
                return OutcomeKind.RobRobCollision
    return None


def obstacle_window_ok(world: WorldSpec) -> bool:
    """Every 2x2 window of cells contains at most two obstacles."""
    occupied = {o.cell for o in world.obstacles}
    for c in range(world.map_cols - 1):
        for r in range(world.map_rows - 1):
            count = sum(
                1 for cell in ((c, r), (c + 1, r), (c, r + 1), (c + 1, r + 1)) if cell in occupied
            )
            if count > 2:
                return False
    return True


def validate_world(world: WorldSpec, geo: Geometry = GEO) -> None:
    """Raise ValueError on any violated WorldSpec invariant."""
    if not (2 <= world.map_cols <= 8 and 2 <= world.map_rows <= 8):
        raise ValueError(f"map size {world.map_cols}x{world.map_rows} outside 2..8 range")
    if world.cell_pitch <= 0:
        raise ValueError("cell_pitch must be positive")
    cells = {o.cell for o in world.obstacles}
    if len(cells) != len(world.obstacles):
        raise ValueError("two obstacles share a cell")
    for o in world.obstacles:
        if not (0 <= o.cell[0] < world.map_cols and 0 <= o.cell[1] < world.map_rows):
            raise ValueError(f"obstacle cell {o.cell} outside map")
        if o.radius >= world.cell_pitch / 2:
            raise ValueError(f"obstacle radius {o.radius} leaks outside its cell")
    if not obstacle_window_ok(world):
        raise ValueError("a 2x2 window holds more than two obstacles")
    for idx, robot in enumerate(world.robots):
        if robot.id != idx:
            raise ValueError("robot ids must be contiguous from 0")
        if not in_map(world, *robot.base_xy):
            raise ValueError(f"robot {robot.id} base outside map")
        if len(set(robot.home_block)) != 4:
            raise ValueError(f"robot {robot.id} home block is not a 2x2 cell set")
        for cell in robot.home_block:
            center = cell_center(world, *cell)
            if dist_xy(robot.base_xy, center) > robot.reach_radius:
                raise ValueError(f"robot {robot.id} cannot reach home cell {cell}")
    for b, box in enumerate(world.boxes):
        for label, cell in (("initial", box.initial), ("target", box.target)):
            center = cell_center(world, *cell)  # raises IndexError if outside
            if cell in cells:
                raise ValueError(f"box {b} {label} cell {cell} is occupied by an obstacle")
            if not any(reachable(world, r, center) for r in world.robots):
                raise ValueError(f"box {b} {label} cell {cell} unreachable by every robot")


def _round4(v: float) -> float:
    return round(v + 0.0, 4)


def _pose_json(p: Pose | tuple[float, ...]) -> list[float]:
    return [_round4(p[0]), _round4(p[1]), _round4(p[2])]


def world_to_doc(world: WorldSpec, state: WorldState) -> dict:
    """Canonical {spec, state} document; coordinates carry at most 4 fractional digits."""
    return {
        "spec": {
            "map_cols": world.map_cols,
            "map_rows": world.map_rows,
            "cell_pitch": _round4(world.cell_pitch),
            "seed": world.seed,
            "robots": [
                {
                    "id": r.id,
                    "base_xy": [_round4(r.base_xy[0]), _round4(r.base_xy[1])],
                    "reach_radius": _round4(r.reach_radius),
                    "home_block": [list(c) for c in r.home_block],
                    "arm_rest_z": _round4(r.arm_rest_z),
                }
                for r in world.robots
            ],
            "obstacles": [
                {"cell": list(o.cell), "radius": _round4(o.radius), "height": _round4(o.height)}
                for o in world.obstacles
            ],
            "boxes": [{"initial": list(b.initial), "target": list(b.target)} for b in world.boxes],
        },
        "state": {
            "arm_pos": [_pose_json(p) for p in state.arm_pos],
            "carrying": list(state.carrying),
            "box_pos": [_pose_json(p) for p in state.box_pos],
            "step_index": state.step_index,
        },
    }


def world_from_doc(doc: dict) -> tuple[WorldSpec, WorldState]:
    spec = doc["spec"]
    world = WorldSpec(
        map_cols=int(spec["map_cols"]),
        map_rows=int(spec["map_rows"]),
        cell_pitch=float(spec["cell_pitch"]),
        seed=int(spec.get("seed", 0)),
        robots=tuple(
            RobotSpec(
                id=int(r["id"]),
                base_xy=(float(r["base_xy"][0]), float(r["base_xy"][1])),
                reach_radius=float(r["reach_radius"]),
                home_block=tuple((int(c[0]), int(c[1])) for c in r["home_block"]),
                arm_rest_z=float(r["arm_rest_z"]),
            )
            for r in spec["robots"]
        ),
        obstacles=tuple(
            ObstacleSpec(
                cell=(int(o["cell"][0]), int(o["cell"][1])),
                radius=float(o["radius"]),
                height=float(o["height"]),
            )
            for o in spec["obstacles"]
        ),
        boxes=tuple(
            BoxSpec(
                initial=(int(b["initial"][0]), int(b["initial"][1])),
                target=(int(b["target"][0]), int(b["target"][1])),
            )
            for b in spec["boxes"]
        ),
    )
    st = doc["state"]
    state = WorldState(
        arm_pos=tuple(Pose(*map(float, p)) for p in st["arm_pos"]),
        carrying=tuple(None if c is None else int(c) for c in st["carrying"]),
        box_pos=tuple(Pose(*map(float, p)) for p in st["box_pos"]),
        step_index=int(st["step_index"]),
    )
    return world, state


def boxes_placed(world: WorldSpec, state: WorldState, geo: Geometry = GEO) -> bool:
    """True iff every box rests within the target tolerance of its target cell center."""
    for b, box in enumerate(world.boxes):
        target = cell_center(world, *box.target)
        p = state.box_pos[b]
        if dist_xy(p, target) > geo.target_tolerance or state.carrying_robot(b) is not None:
            return False
    return True
