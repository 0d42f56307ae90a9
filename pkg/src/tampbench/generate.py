"""Procedural benchmark instance generation.

Every instance is a pure function of (seed, index) via a counter-based Philox
stream, so datasets are byte-identical across runs and machines and generation
can resume or fan out by index. Task instances ship with an A*-verified
reference plan; motion instances are pre-certified by the frontier search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .geometry import Pose, dist_xy, point_segment_distance
from .model import (
    GEO,
    BoxSpec,
    Geometry,
    ObstacleSpec,
    RobotSpec,
    WorldSpec,
    WorldState,
    cell_center,
    cell_of,
    home_block_for_joint,
    initial_state,
    reachable,
    standard_base_for_joint,
    validate_world,
    world_from_doc,
    world_to_doc,
)
from .executor import RobotCommand, TaskPlan
from .motion_search import (
    FEASIBLE,
    FrontierConfig,
    MotionQuery,
    build_query,
    certify,
    node_feasible,
)
from .task_search import BudgetExhausted, SearchConfig, Unsolvable, plan

VARIANTS = ("standard", "unseen_map", "unseen_layout", "motion_2x2")
UNSEEN_MAP_SIZES = ((2, 5), (8, 2))


@dataclass(frozen=True)
class GenConfig:
    variant: str = "standard"
    count: int = 480
    seed: int = 0
    min_cols: int = 2
    max_cols: int = 4
    min_rows: int = 2
    max_rows: int = 4
    max_robots: int = 9
    max_boxes: int = 6
    min_obstacles: int = 1
    max_obstacles: int = 8
    per_config_cap: int = 5
    max_attempts: int = 32
    solver_nodes: int = 6000
    solver_seconds: float = 60.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.count < 1 or self.max_attempts < 1:
            raise ValueError("count and max_attempts must be positive")


@dataclass(frozen=True)
class TaskInstance:
    index: int
    world: WorldSpec
    initial: WorldState
    reference_plan: TaskPlan
    reference_len: int


@dataclass(frozen=True)
class MotionInstance:
    index: int
    world: WorldSpec
    state: WorldState
    target: Pose
    carry: bool = False

    def query(self, geo: Geometry = GEO) -> MotionQuery:
        return build_query(self.world, self.state, 0, self.target, self.carry, geo)


def _sizes_for(config: GenConfig) -> list[tuple[int, int]]:
    if config.variant == "unseen_map":
        return list(UNSEEN_MAP_SIZES)
    if config.variant == "unseen_layout":
        return [(3, 3), (4, 4)]
    return [
        (c, r)
        for c in range(config.min_cols, config.max_cols + 1)
        for r in range(config.min_rows, config.max_rows + 1)
    ]


def _best_single_coverage(cols: int, rows: int, geo: Geometry = GEO) -> int:
    """Most cells any one standard-layout robot can reach on this map."""
    best = 0
    for ji in range(1, cols):
        for jj in range(1, rows):
            base = standard_base_for_joint((ji * geo.cell_pitch, jj * geo.cell_pitch), geo.cell_pitch)
            count = 0
            for c in range(cols):
                for r in range(rows):
                    center = (c * geo.cell_pitch + geo.cell_pitch / 2, r * geo.cell_pitch + geo.cell_pitch / 2)
                    if dist_xy(base, center) <= geo.reach_radius:
                        count += 1
            best = max(best, count)
    return best


def size_grid(config: GenConfig) -> list[tuple[int, int, int, int]]:
    """Feasible (cols, rows, robots, boxes) cells of the configuration grid.

    Box counts shrink as robot count grows: every parked arm and base cell eats
    maneuvering room, and dense many-robot, many-box draws are dominated by
    transfer-corridor deadlocks rather than interesting coordination. Lone
    robots are additionally capped by their reachable-cell count (skinny maps
    leave a single arm as few as six cells).
    """
    grid = []
    for cols, rows in _sizes_for(config):
        joints = (cols - 1) * (rows - 1)
        cells = cols * rows
        single_cap = max(1, _best_single_coverage(cols, rows) - 3)
        for robots in range(1, min(config.max_robots, joints) + 1):
            if robots <= 2:
                coordination_cap = config.max_boxes
            elif robots <= 5:
                coordination_cap = 5
            elif robots == 6:
                coordination_cap = 4
            else:
                coordination_cap = 3
            box_cap = min(config.max_boxes, max(1, (cells - robots) // 2), coordination_cap)
            if robots == 1:
                box_cap = min(box_cap, single_cap)
            for boxes in range(1, box_cap + 1):
                grid.append((cols, rows, robots, boxes))
    return grid


def allocation(config: GenConfig) -> list[tuple[int, int, int, int]]:
    """Round-robin assignment of instance indices to grid cells, capped per cell.

    Triples interleave across map sizes so small datasets still span the grid.
    """
    grid = size_grid(config)
    capacity = len(grid) * config.per_config_cap
    if config.count > capacity:
        raise ValueError(
            f"count {config.count} exceeds capacity {capacity} "
            f"({len(grid)} configurations x cap {config.per_config_cap})"
        )
    by_size: dict[tuple[int, int], list] = {}
    for cell in grid:
        by_size.setdefault((cell[0], cell[1]), []).append(cell)
    interleaved: list[tuple[int, int, int, int]] = []
    buckets = list(by_size.values())
    for i in range(max(len(b) for b in buckets)):
        for bucket in buckets:
            if i < len(bucket):
                interleaved.append(bucket[i])
    out: list[tuple[int, int, int, int]] = []
    for _ in range(config.per_config_cap):
        for cell in interleaved:
            out.append(cell)
            if len(out) == config.count:
                return out
    return out


def _rng_for(seed: int, index: int) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, index & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _components(world_cells, cover) -> dict[tuple[int, int], int]:
    """Union cells serviced by a common robot; boxes can only travel inside one part."""
    parent = {c: c for c in world_cells}

    def find(c):
        while parent[c] != c:
            parent[c] = parent[parent[c]]
            c = parent[c]
        return c

    by_robot: dict[int, list] = {}
    for cell in world_cells:
        for rid in cover[cell]:
            by_robot.setdefault(rid, []).append(cell)
    for cells in by_robot.values():
        for other in cells[1:]:
            ra, rb = find(cells[0]), find(other)
            if ra != rb:
                parent[rb] = ra
    return {c: find(c) for c in world_cells}


def _draw_world(
    rng: np.random.Generator,
    cols: int,
    rows: int,
    n_robots: int,
    n_boxes: int,
    config: GenConfig,
    seed_tag: int,
    geo: Geometry = GEO,
) -> WorldSpec | None:
    pitch = geo.cell_pitch
    joints = [(i, j) for i in range(1, cols) for j in range(1, rows)]
    if config.variant == "unseen_layout" and len(joints) > n_robots:
        removable = len(joints) - n_robots
        n_remove = int(rng.integers(0, min(removable, max(1, len(joints) // 4)) + 1))
        if n_remove:
            drop = set(map(int, rng.choice(len(joints), size=n_remove, replace=False)))
            joints = [j for k, j in enumerate(joints) if k not in drop]
    picked = sorted(
        joints[k] for k in map(int, rng.choice(len(joints), size=n_robots, replace=False))
    )

    robots = []
    for rid, (ji, jj) in enumerate(picked):
        joint = (ji * pitch, jj * pitch)
        base = standard_base_for_joint(joint, pitch)
        block = home_block_for_joint(ji, jj)
        if config.variant == "unseen_layout":
            for _ in range(10):
                jitter = rng.uniform(-0.05, 0.05, size=2)
                cand = (round(base[0] + jitter[0], 4), round(base[1] + jitter[1], 4))
                centers_ok = all(
                    dist_xy(cand, (c * pitch + pitch / 2, r * pitch + pitch / 2))
                    <= geo.reach_radius
                    for c, r in block
                )
                if centers_ok:
                    base = cand
                    break
        robots.append(RobotSpec(id=rid, base_xy=base, home_block=block))

    world_cells = [(c, r) for c in range(cols) for r in range(rows)]
    centers = {cell: (cell[0] * pitch + pitch / 2, cell[1] * pitch + pitch / 2) for cell in world_cells}
    cover = {
        cell: tuple(
            r.id for r in robots if dist_xy(r.base_xy, centers[cell]) <= r.reach_radius
        )
        for cell in world_cells
    }
    base_cells = {_cell_of_xy(r.base_xy, pitch, cols, rows) for r in robots}
    covered = [c for c in world_cells if cover[c] and c not in base_cells]
    if len(covered) < 2:
        return None
    comp = _components(world_cells, cover)

    if n_boxes > len(covered):
        return None
    initials = sorted(
        covered[k] for k in map(int, rng.choice(len(covered), size=n_boxes, replace=False))
    )
    boxes = []
    used_targets: set[tuple[int, int]] = set()
    for init in initials:
        options = [
            c
            for c in covered
            if c != init and c not in used_targets and comp[c] == comp[init]
        ]
        if not options:
            return None
        target = options[int(rng.integers(0, len(options)))]
        used_targets.add(target)
        boxes.append(BoxSpec(initial=init, target=target))

    box_cells_check = {b.initial for b in boxes} | {b.target for b in boxes}
    if not _placement_viable(robots, centers, world_cells, set(), box_cells_check, boxes, n_boxes, geo):
        return None

    reserved = base_cells | box_cells_check
    candidates = [c for c in world_cells if c not in reserved]
    lo = max(1, config.min_obstacles)
    hi = max(lo, min(config.max_obstacles, (cols * rows) // 2))
    n_obstacles = int(rng.integers(lo, hi + 1))
    order = [candidates[k] for k in map(int, rng.permutation(len(candidates)))]
    placed: list[tuple[int, int]] = []
    occupied: set[tuple[int, int]] = set()
    box_cells = {b.initial for b in boxes} | {b.target for b in boxes}
    for cell in order:
        if len(placed) == n_obstacles:
            break
        occupied.add(cell)
        if _windows_ok(occupied, cols, rows) and _placement_viable(
            robots, centers, world_cells, occupied, box_cells, boxes, n_boxes, geo
        ):
            placed.append(cell)
        else:
            occupied.discard(cell)
    if not placed:
        return None
    placed.sort()

    world = WorldSpec(
        map_cols=cols,
        map_rows=rows,
        robots=tuple(robots),
        obstacles=tuple(ObstacleSpec(cell=c) for c in placed),
        boxes=tuple(boxes),
        seed=seed_tag,
    )
    try:
        validate_world(world, geo)
    except (ValueError, IndexError):
        return None
    return world


def _cell_of_xy(xy, pitch, cols, rows) -> tuple[int, int]:
    col = min(cols - 1, max(0, math.floor(xy[0] / pitch)))
    row = min(rows - 1, max(0, math.floor(xy[1] / pitch)))
    return col, row


def _placement_viable(
    robots,
    centers,
    world_cells,
    obstacle_cells: set,
    box_cells: set,
    boxes,
    n_boxes: int,
    geo: Geometry,
) -> bool:
    """Would this obstacle set leave the task workable?

    Arms are blocked by any cylinder the straight base->effector segment
    crosses, so usable cells need a shadow-free hover for some covering robot.
    Requires every box cell hoverable, transport connectivity for every box,
    and enough spare usable cells to maneuver.
    """
    cylinders = [(centers[c][0], centers[c][1]) for c in obstacle_cells]

    def hoverable(robot, cell) -> bool:
        cx, cy = centers[cell]
        if dist_xy(robot.base_xy, (cx, cy)) > robot.reach_radius:
            return False
        a = (robot.base_xy[0], robot.base_xy[1], 0.0)
        b = (cx, cy, geo.hover_z)
        return all(
            not _segment_hits_disc(a, b, ox, oy, geo.obstacle_radius) for ox, oy in cylinders
        )

    usable: dict[tuple[int, int], list[int]] = {}
    for cell in world_cells:
        if cell in obstacle_cells:
            continue
        ids = [r.id for r in robots if hoverable(r, cell)]
        if ids:
            usable[cell] = ids
    for cell in box_cells:
        if cell not in usable:
            return False
    if len(usable) < min(n_boxes + 3, max(2 * n_boxes, n_boxes + 2)):
        return False
    comp = _components(list(usable), usable)
    return all(comp[b.initial] == comp[b.target] for b in boxes)


def _segment_hits_disc(a, b, ox, oy, radius: float) -> bool:
    return point_segment_distance((ox, oy, 0.0), (a[0], a[1], 0.0), (b[0], b[1], 0.0)) < radius


def _windows_ok(occupied: set, cols: int, rows: int) -> bool:
    for c, r in occupied:
        for wc in (c - 1, c):
            for wr in (r - 1, r):
                if 0 <= wc < cols - 1 and 0 <= wr < rows - 1:
                    count = sum(
                        1
                        for cell in ((wc, wr), (wc + 1, wr), (wc, wr + 1), (wc + 1, wr + 1))
                        if cell in occupied
                    )
                    if count > 2:
                        return False
    return True


def generate_instance(
    config: GenConfig, index: int, geo: Geometry = GEO, search: SearchConfig | None = None
) -> TaskInstance:
    """One verified task instance for (config.seed, index); raises BudgetExhausted."""
    cols, rows, n_robots, n_boxes = allocation(config)[index]
    return _generate_with_shape(config, index, cols, rows, n_robots, n_boxes, geo, search)


def _generate_with_shape(
    config: GenConfig,
    index: int,
    cols: int,
    rows: int,
    n_robots: int,
    n_boxes: int,
    geo: Geometry,
    search: SearchConfig | None,
) -> TaskInstance:
    rng = _rng_for(config.seed, index)
    solver = search or SearchConfig(
        node_budget=config.solver_nodes, time_budget_s=config.solver_seconds
    )
    for _ in range(config.max_attempts):
        world = _draw_world(rng, cols, rows, n_robots, n_boxes, config, seed_tag=config.seed, geo=geo)
        if world is None:
            continue
        start = initial_state(world, geo)
        try:
            result = plan(world, start, solver, geo=geo)
        except (Unsolvable, BudgetExhausted):
            continue
        return TaskInstance(
            index=index,
            world=world,
            initial=start,
            reference_plan=result.plan,
            reference_len=len(result.plan),
        )
    raise BudgetExhausted(
        f"no solvable draw for index {index} within {config.max_attempts} attempts"
    )


def generate(config: GenConfig, geo: Geometry = GEO) -> Iterator[TaskInstance]:
    """Stream of verified instances; a pure function of (seed, index)."""
    table = allocation(config)
    for index in range(config.count):
        cols, rows, n_robots, n_boxes = table[index]
        yield _generate_with_shape(config, index, cols, rows, n_robots, n_boxes, geo, None)


def _motion_world(geo: Geometry = GEO) -> tuple[WorldSpec, tuple[tuple[int, int], ...]]:
    """The 2x2 single-robot block every motion instance lives in."""
    base = standard_base_for_joint((geo.cell_pitch, geo.cell_pitch), geo.cell_pitch)
    robot = RobotSpec(id=0, base_xy=base, home_block=home_block_for_joint(1, 1))
    world = WorldSpec(map_cols=2, map_rows=2, robots=(robot,), obstacles=(), boxes=())
    base_cell = cell_of(world, *base)
    free = tuple(
        (c, r) for c in range(2) for r in range(2) if (c, r) != base_cell
    )
    return world, free


def generate_motion_instance(
    config: GenConfig, index: int, geo: Geometry = GEO, frontier: FrontierConfig | None = None
) -> MotionInstance:
    """One certified-feasible single-robot motion problem; raises BudgetExhausted."""
    rng = _rng_for(config.seed, index)
    frontier = frontier or FrontierConfig()
    shell, free_cells = _motion_world(geo)
    robot = shell.robots[0]
    lo = min(config.min_obstacles, 2)
    hi = min(config.max_obstacles, 2)
    if hi < lo:
        lo, hi = hi, hi

    for _ in range(config.max_attempts):
        n_obs = int(rng.integers(lo, hi + 1))
        cells = sorted(
            free_cells[k] for k in map(int, rng.choice(len(free_cells), size=n_obs, replace=False))
        ) if n_obs else []
        world = WorldSpec(
            map_cols=2,
            map_rows=2,
            robots=(robot,),
            obstacles=tuple(ObstacleSpec(cell=c) for c in cells),
            boxes=(),
            seed=config.seed,
        )

        def sample_pose() -> Pose | None:
            for _ in range(20):
                x = float(rng.uniform(0.0, world.width))
                y = float(rng.uniform(0.0, world.height))
                p = Pose(round(x, 2), round(y, 2), geo.hover_z)
                if reachable(world, robot, p):
                    return p
            return None

        # Prefer pairs whose straight line crosses an obstacle (nontrivial
        # queries); many blocked pairs sit in disconnected shadow sectors, so
        # certify candidates until a feasible one appears.
        fallback = None
        emitted = None
        for _ in range(24):
            start, target = sample_pose(), sample_pose()
            if start is None or target is None:
                continue
            if dist_xy(start, target) < 0.35:
                continue
            state = WorldState(arm_pos=(start,), carrying=(None,), box_pos=())
            query = build_query(world, state, 0, target, False, geo)
            if not node_feasible(world, query, start, geo) or not node_feasible(
                world, query, target, geo
            ):
                continue
            if world.obstacles and _straight_blocked(world, start, target):
                if certify(world, query, frontier, geo) == FEASIBLE:
                    emitted = (state, target)
                    break
            elif fallback is None:
                fallback = (state, target, query)
        if emitted is None and fallback is not None:
            state, target, query = fallback
            if certify(world, query, frontier, geo) == FEASIBLE:
                emitted = (state, target)
        if emitted is not None:
            state, target = emitted
            return MotionInstance(index=index, world=world, state=state, target=target)
    raise BudgetExhausted(
        f"no feasible motion draw for index {index} within {config.max_attempts} attempts"
    )


def _straight_blocked(world: WorldSpec, a: Pose, b: Pose) -> bool:
    """Does the straight effector path a->b pass through an obstacle footprint?"""
    for o in world.obstacles:
        c = cell_center(world, *o.cell)
        if point_segment_distance((c.x, c.y, a.z), a, b) < o.radius:
            return True
    return False


def generate_motion(config: GenConfig, geo: Geometry = GEO) -> Iterator[MotionInstance]:
    if config.variant != "motion_2x2":
        raise ValueError("generate_motion requires the motion_2x2 variant")
    for index in range(config.count):
        yield generate_motion_instance(config, index, geo)


def instance_to_doc(inst: TaskInstance) -> dict:
    doc = world_to_doc(inst.world, inst.initial)
    doc["index"] = inst.index
    doc["reference_plan"] = [
        [
            {
                "robot_id": c.robot_id,
                "target": [round(c.target.x, 4), round(c.target.y, 4), round(c.target.z, 4)],
                "carry": c.carry,
            }
            for c in step
        ]
        for step in inst.reference_plan
    ]
    doc["reference_len"] = inst.reference_len
    return doc


def instance_from_doc(doc: dict) -> TaskInstance:
    world, state = world_from_doc(doc)
    plan_steps = tuple(
        tuple(
            RobotCommand(
                robot_id=int(c["robot_id"]),
                target=Pose(*map(float, c["target"])),
                carry=bool(c["carry"]),
            )
            for c in step
        )
        for step in doc["reference_plan"]
    )
    return TaskInstance(
        index=int(doc["index"]),
        world=world,
        initial=state,
        reference_plan=plan_steps,
        reference_len=int(doc["reference_len"]),
    )


def motion_to_doc(inst: MotionInstance) -> dict:
    doc = world_to_doc(inst.world, inst.state)
    doc["index"] = inst.index
    doc["target"] = [round(inst.target.x, 4), round(inst.target.y, 4), round(inst.target.z, 4)]
    doc["carry"] = inst.carry
    return doc


def motion_from_doc(doc: dict) -> MotionInstance:
    world, state = world_from_doc(doc)
    return MotionInstance(
        index=int(doc["index"]),
        world=world,
        state=state,
        target=Pose(*map(float, doc["target"])),
        carry=bool(doc.get("carry", False)),
    )
