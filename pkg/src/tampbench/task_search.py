"""Task-level A* over full world snapshots.

Produces reference plans whose every step has been simulated (motion search per
active robot plus joint tick execution), and a reflection ledger of rejected
command bundles. Children are created from an exact geometric preview and the
incoming bundle is validated when its node is popped, which keeps the number of
simulations near the number of pops instead of pops times branching factor.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, replace

from .geometry import (
    Pose,
    dist3,
    dist_xy,
    point_segment_distance,
    segment_penetrates_cylinder,
    segment_segment_distance,
)
from .model import (
    GEO,
    Geometry,
    OutcomeKind,
    WorldSpec,
    WorldState,
    arm_rest_pose,
    cell_center,
    cell_of,
    obstacle_center,
    reachable,
    world_to_doc,
)
from .executor import RobotCommand, TaskPlan, TaskStep, execute_step
from .motion_search import (
    INFEASIBLE,
    FrontierConfig,
    InvalidQuery,
    build_query,
    search as motion_search,
)

class Unsolvable(Exception):
    pass


class BudgetExhausted(Exception):
    pass


@dataclass(frozen=True)
class SearchConfig:
    misalignment_weight: float = 0.5
    adjacency_bonus: float = 0.25
    handoff_penalty: float = 1.0
    activation_cost: float = 0.05
    max_bundles: int = 32
    beam_width: int = 64
    per_robot_cap: int = 8
    plunge_slack: float = 4.5  # descent may ride through h rises this big (jam retreats)
    plunge_patience: int = 12  # consecutive non-improving descent steps allowed
    node_budget: int = 20000
    time_budget_s: float = 60.0
    tie_break: str = "default"  # "reversed" flips ordering among equal scores
    use_sim_cache: bool = True
    term_floor: float = 0.1  # keeps the heuristic strictly positive off-goal


@dataclass(frozen=True)
class FailureRecord:
    """One rejected bundle: what was tried, why it failed, what worked instead."""

    bundle: TaskStep
    reason: OutcomeKind
    corrected: TaskStep | None
    state_sig: tuple
    state_doc: dict | None = None

    def to_doc(self) -> dict:
        def step_doc(step: TaskStep | None):
            if step is None:
                return None
            return [
                {
                    "robot_id": c.robot_id,
                    "target": [c.target.x, c.target.y, c.target.z],
                    "carry": c.carry,
                }
                for c in step
            ]

        return {
            "bundle": step_doc(self.bundle),
            "reason": self.reason.value,
            "corrected": step_doc(self.corrected),
            "state_sig": repr(self.state_sig),
            "state": self.state_doc,
        }


@dataclass
class PlanResult:
    plan: TaskPlan
    ledger: list[FailureRecord]
    expansions: int
    simulations: int
    elapsed_s: float


def coarse_signature(state: WorldState, quantum: float = 0.05) -> tuple:
    """Positions rounded to the quantum plus carry flags; the near-duplicate key."""

    def q(p: Pose) -> tuple:
        return (round(p.x / quantum), round(p.y / quantum), round(p.z / quantum))

    return (
        tuple(q(p) for p in state.arm_pos),
        state.carrying,
        tuple(q(p) for p in state.box_pos),
    )


def bundle_signature(bundle: TaskStep) -> tuple:
    return tuple(
        (c.robot_id, round(c.target.x, 2), round(c.target.y, 2), round(c.target.z, 2), c.carry)
        for c in sorted(bundle, key=lambda c: c.robot_id)
    )


class WorldIndex:
    """Static per-world analysis shared by the heuristic and bundle enumeration."""

    def __init__(self, world: WorldSpec, geo: Geometry = GEO):
        self.world = world
        self.geo = geo
        self.cells = [
            (c, r) for c in range(world.map_cols) for r in range(world.map_rows)
        ]
        self.centers = {cell: cell_center(world, *cell) for cell in self.cells}
        self.obstacle_cells = {o.cell for o in world.obstacles}
        self.obstacles = [
            (obstacle_center(world, o), o.radius, o.height) for o in world.obstacles
        ]
        self.cover: dict[tuple[int, int], tuple[int, ...]] = {}
        for cell, center in self.centers.items():
            self.cover[cell] = tuple(
                r.id for r in world.robots if reachable(world, r, center)
            )
        self.free_cells = [c for c in self.cells if c not in self.obstacle_cells]
        n = len(world.robots)
        adj: list[set[int]] = [set() for _ in range(n)]
        for cell in self.free_cells:
            ids = self.cover[cell]
            for i in ids:
                for j in ids:
                    if i != j:
                        adj[i].add(j)
        self.robot_dist = [[10] * n for _ in range(n)]
        for src in range(n):
            dist = self.robot_dist[src]
            dist[src] = 0
            frontier = [src]
            while frontier:
                nxt = []
                for u in frontier:
                    for v in adj[u]:
                        if dist[v] > dist[u] + 1:
                            dist[v] = dist[u] + 1
                            nxt.append(v)
                frontier = nxt
        self.base_cells = {cell_of(world, *r.base_xy) for r in world.robots}
        self.handoff_cells: dict[int, list[tuple[int, int]]] = {
            r.id: [
                cell
                for cell in self.free_cells
                if r.id in self.cover[cell] and len(self.cover[cell]) >= 2
            ]
            for r in world.robots
        }
        self._handoff_memo: dict[tuple[tuple[int, int], tuple[int, int]], int] = {}

    def handoffs_needed(self, box_cell: tuple[int, int], target_cell: tuple[int, int]) -> int:
        key = (box_cell, target_cell)
        cached = self._handoff_memo.get(key)
        if cached is not None:
            return cached
        best = 10
        for r1 in self.cover.get(box_cell, ()):
            row = self.robot_dist[r1]
            for r2 in self.cover.get(target_cell, ()):
                if row[r2] < best:
                    best = row[r2]
        self._handoff_memo[key] = best
        return best

    def shadow_free(self, robot_id: int, target: Pose) -> bool:
        """Cheap pre-filter: the straight base->target arm segment misses all cylinders."""
        base = self.world.robots[robot_id].base_xy
        a = (base[0], base[1], 0.0)
        for c, radius, height in self.obstacles:
            if segment_penetrates_cylinder(a, target, c.x, c.y, radius, height):
                return False
        return True


def heuristic(
    world: WorldSpec,
    state: WorldState,
    config: SearchConfig = SearchConfig(),
    geo: Geometry = GEO,
    index: WorldIndex | None = None,
) -> float:
    """Sum over unplaced boxes of distance, misalignment, handoff and readiness terms."""
    if index is None:
        index = WorldIndex(world, geo)
    total = 0.0
    for b, box in enumerate(world.boxes):
        target = index.centers[box.target]
        p = state.box_pos[b]
        if state.carrying_robot(b) is None and dist_xy(p, target) <= geo.target_tolerance:
            continue
        box_cell = cell_of(world, p.x, p.y)
        d = abs(box_cell[0] - box.target[0]) + abs(box_cell[1] - box.target[1])
        misaligned = 1.0 if (box_cell[0] != box.target[0] and box_cell[1] != box.target[1]) else 0.0
        handoffs = index.handoffs_needed(box_cell, box.target)
        ready = any(dist3(arm, p) <= geo.grasp_tolerance for arm in state.arm_pos)
        term = (
            d
            + config.misalignment_weight * misaligned
            + config.handoff_penalty * handoffs
            - (config.adjacency_bonus if ready else 0.0)
        )
        total += max(config.term_floor, term)
    return total


def apply_preview(
    world: WorldSpec, state: WorldState, bundle: TaskStep, geo: Geometry = GEO
) -> WorldState:
    """Exact post-state of a successful step: arms at targets, carried boxes released."""
    arms = list(state.arm_pos)
    boxes = list(state.box_pos)
    carrying = list(state.carrying)
    for cmd in bundle:
        arms[cmd.robot_id] = cmd.target
        if cmd.carry:
            b = _grasp_preview(state, cmd.robot_id, geo)
            if b is not None:
                boxes[b] = Pose(cmd.target.x, cmd.target.y, geo.box_rest_z)
                carrying[cmd.robot_id] = None
    return WorldState(
        arm_pos=tuple(arms),
        carrying=tuple(carrying),
        box_pos=tuple(boxes),
        step_index=state.step_index + 1,
    )


def arm_base_xyz(robot) -> Pose:
    return Pose(robot.base_xy[0], robot.base_xy[1], 0.0)


def _grasp_preview(state: WorldState, robot_id: int, geo: Geometry) -> int | None:
    held = state.carrying[robot_id]
    if held is not None:
        return held
    arm = state.arm_pos[robot_id]
    candidates = [
        (dist3(arm, p), b)
        for b, p in enumerate(state.box_pos)
        if state.carrying_robot(b) is None and dist3(arm, p) <= geo.grasp_tolerance
    ]
    return min(candidates)[1] if candidates else None


def _robot_candidates(
    world: WorldSpec,
    state: WorldState,
    robot_id: int,
    index: WorldIndex,
    config: SearchConfig,
    geo: Geometry,
) -> list[tuple[RobotCommand, int | None]]:
    """Per-robot moves: transport a grasped box, or reposition the empty arm.

    Returns (command, resolved box id or None) pairs; ordering is deterministic.
    """
    robot = world.robots[robot_id]
    arm = state.arm_pos[robot_id]
    hover = geo.hover_z
    placed = [
        state.carrying_robot(b) is None
        and dist_xy(state.box_pos[b], index.centers[world.boxes[b].target]) <= geo.target_tolerance
        for b in range(len(world.boxes))
    ]
    occupied = {
        cell_of(world, p.x, p.y)
        for b, p in enumerate(state.box_pos)
        if state.carrying_robot(b) is None
    }
    other_arms = [
        (arm_base_xyz(world.robots[r]), state.arm_pos[r])
        for r in range(len(world.robots))
        if r != robot_id
    ]
    # A colleague hovering right above this base pins the whole arm until it
    # moves away; every motion query would come back infeasible.
    base_top = Pose(robot.base_xy[0], robot.base_xy[1], 0.25)
    base_bottom = Pose(robot.base_xy[0], robot.base_xy[1], 0.0)
    for ob, ot in other_arms:
        if segment_segment_distance(base_bottom, base_top, ob, ot) < 0.12:
            return []

    def target_ok(pose: Pose) -> bool:
        if not reachable(world, robot, pose):
            return False
        if not index.shadow_free(robot_id, pose):
            return False
        # Keep a margin from other arms frozen at their step-start poses.
        for base, tip in other_arms:
            if point_segment_distance(pose, base, tip) < 0.15:
                return False
        return True

    out: list[tuple[RobotCommand, int | None]] = []
    grasp = _grasp_preview(state, robot_id, geo)
    if grasp is not None and not placed[grasp]:
        box_cell = cell_of(world, state.box_pos[grasp].x, state.box_pos[grasp].y)
        goal_cell = world.boxes[grasp].target
        targets: list[tuple[int, int]] = []
        goal_blocked = goal_cell in occupied and goal_cell != box_cell
        if robot_id in index.cover.get(goal_cell, ()) and not goal_blocked:
            targets.append(goal_cell)
        # Handoff cells carry progress; private cells are retreats that clear
        # transfer corridors when everything else is occupied.
        for cell in index.handoff_cells[robot_id]:
            if cell != box_cell and cell != goal_cell and cell not in occupied:
                targets.append(cell)
        for cell in index.free_cells:
            if robot_id not in index.cover[cell] or len(index.cover[cell]) >= 2:
                continue
            if cell != box_cell and cell != goal_cell and cell not in occupied:
                targets.append(cell)
        seen: set[tuple[int, int]] = set()
        for cell in targets:
            if cell in seen:
                continue
            seen.add(cell)
            center = index.centers[cell]
            pose = Pose(center.x, center.y, hover)
            if target_ok(pose):
                out.append((RobotCommand(robot_id, pose, True), grasp))

    # Repositions are always on offer: hover over a box that still needs
    # moving, or park at rest. Parking is how a robot retreats after dropping
    # a box at a handoff cell so the receiving robot can hover in.
    for b, p in enumerate(state.box_pos):
        if placed[b] or state.carrying_robot(b) is not None:
            continue
        pose = Pose(p.x, p.y, hover)
        if dist3(arm, p) <= geo.grasp_tolerance:
            continue  # already in position
        if target_ok(pose):
            out.append((RobotCommand(robot_id, pose, False), None))
    rest = arm_rest_pose(world, robot, geo)
    if dist3(arm, rest) > 1e-9 and target_ok(rest):
        out.append((RobotCommand(robot_id, rest, False), None))
    return out


def enumerate_bundles(
    world: WorldSpec,
    state: WorldState,
    failed_signatures: frozenset | set = frozenset(),
    config: SearchConfig = SearchConfig(),
    geo: Geometry = GEO,
    index: WorldIndex | None = None,
) -> list[TaskStep]:
    """Conflict-free multi-robot command bundles, best score first, truncated to K.

    Score is the heuristic decrease of the exact preview minus a per-robot
    activation cost; ties break by robot id then lexicographic target.
    """
    if index is None:
        index = WorldIndex(world, geo)
    h0 = heuristic(world, state, config, geo, index)
    robot_ids = [r.id for r in world.robots]
    if config.tie_break == "reversed":
        robot_ids = robot_ids[::-1]

    per_robot: dict[int, list[tuple[float, RobotCommand, int | None]]] = {}
    for rid in robot_ids:
        cands = []
        for cmd, box in _robot_candidates(world, state, rid, index, config, geo):
            preview = apply_preview(world, state, (cmd,), geo)
            delta = h0 - heuristic(world, preview, config, geo, index) - config.activation_cost
            cands.append((delta, cmd, box))
        cands.sort(key=lambda t: (-t[0], t[1].target, t[1].carry), reverse=(config.tie_break == "reversed"))
        if config.tie_break == "reversed":
            cands.sort(key=lambda t: -t[0])  # keep best-first, reversed ties
        per_robot[rid] = cands[: config.per_robot_cap]

    # Beam over robots: each partial is (commands, score, used cells, used boxes).
    partials: list[tuple[tuple[RobotCommand, ...], float, frozenset, frozenset]] = [
        ((), 0.0, frozenset(), frozenset())
    ]
    for rid in robot_ids:
        grown: list[tuple[tuple[RobotCommand, ...], float, frozenset, frozenset]] = []
        for cmds, score, cells, boxes in partials:
            grown.append((cmds, score, cells, boxes))  # no-op for this robot
            for delta, cmd, box in per_robot[rid]:
                tcell = cell_of(world, cmd.target.x, cmd.target.y)
                if tcell in cells:
                    continue
                if box is not None and box in boxes:
                    continue
                if any(dist_xy(cmd.target, c.target) < geo.min_robot_separation for c in cmds):
                    continue
                grown.append(
                    (
                        cmds + (cmd,),
                        score + delta,
                        cells | {tcell},
                        boxes | ({box} if box is not None else frozenset()),
                    )
                )
        grown.sort(key=lambda t: -t[1])
        partials = grown[: config.beam_width]

    scored: list[tuple[float, tuple, TaskStep]] = []
    seen_sigs: set[tuple] = set()
    for cmds, _, _, _ in partials:
        if not cmds:
            continue
        bundle = tuple(sorted(cmds, key=lambda c: c.robot_id))
        sig = bundle_signature(bundle)
        if sig in seen_sigs or sig in failed_signatures:
            continue
        seen_sigs.add(sig)
        preview = apply_preview(world, state, bundle, geo)
        score = h0 - heuristic(world, preview, config, geo, index) - config.activation_cost * len(bundle)
        scored.append((score, sig, bundle))
    scored.sort(key=lambda t: (-t[0], t[1]), reverse=(config.tie_break == "reversed"))
    if config.tie_break == "reversed":
        scored.sort(key=lambda t: -t[0])
    # Sub-bundles of an accepted bundle add nothing while their superset
    # validates; when it fails, its signature is excluded and re-enumeration
    # surfaces them. Keeping them here only floods the open set.
    out: list[TaskStep] = []
    accepted: list[frozenset] = []
    for _, sig, bundle in scored:
        sig_set = frozenset(sig)
        if any(sig_set < prev for prev in accepted):
            continue
        accepted.append(sig_set)
        out.append(bundle)
        if len(out) == config.max_bundles:
            break
    return out


def simulate_bundle(
    world: WorldSpec,
    state: WorldState,
    bundle: TaskStep,
    frontier: FrontierConfig = FrontierConfig(),
    geo: Geometry = GEO,
    motion_cache: dict | None = None,
):
    """Motion-search every active robot against the frozen step-start view, then
    execute the step jointly. Returns (new_state, OutcomeKind, plans)."""
    plans = {}
    for cmd in bundle:
        query = build_query(world, state, cmd.robot_id, cmd.target, cmd.carry, geo)
        key = query.key() if motion_cache is not None else None
        result = motion_cache.get(key) if motion_cache is not None else None
        if result is None:
            try:
                result = motion_search(world, query, frontier, geo)
            except InvalidQuery:
                result = INFEASIBLE
            if motion_cache is not None:
                motion_cache[key] = result
        if result == INFEASIBLE:
            return state, OutcomeKind.UnreachableMotion, {}
        plans[cmd.robot_id] = result
    new_state, outcome = execute_step(world, state, bundle, plans, geo)
    return new_state, outcome.kind, plans


@dataclass
class _Node:
    state: WorldState
    g: int
    h: float
    parent: int | None
    bundle: TaskStep | None
    rank: int
    validated: bool


class _Search:
    """One task-level search run: A* on an f = g + h keyed open set.

    Children are exact previews validated on first touch. After each expansion
    a greedy descent follows the best validating child while the heuristic
    strictly drops; the heap provides backtracking when the descent stalls.
    Plans are satisficing by design and re-simulated end to end before return.
    """

    def __init__(self, world, start, config, frontier, geo, keep_state_docs):
        self.world = world
        self.config = config
        self.frontier = frontier
        self.geo = geo
        self.keep_state_docs = keep_state_docs
        self.index = WorldIndex(world, geo)
        self.t0 = time.monotonic()
        h0 = heuristic(world, start, config, geo, self.index)
        self.nodes: list[_Node] = [_Node(start, 0, h0, None, None, 0, True)]
        # Ties on f prefer deeper nodes: plateaus are walked depth-first.
        self.heap: list[tuple[float, int, int, int]] = [(h0, 0, 0, 0)]
        self.seq = 0
        self.closed: dict[tuple, int] = {}
        self.failed_sigs: dict[tuple, set[tuple]] = {}
        self.sim_cache: dict[tuple, OutcomeKind] = {}
        self.motion_cache: dict = {}
        self.ledger: list[FailureRecord] = []
        self.pending: dict[int, list[tuple[int, int]]] = {}
        self.pops = 0
        self.sims = 0

    def _tick_budget(self) -> None:
        self.pops += 1
        if self.pops > self.config.node_budget:
            raise BudgetExhausted(f"node budget {self.config.node_budget} exhausted")
        if time.monotonic() - self.t0 > self.config.time_budget_s:
            raise BudgetExhausted(f"time budget {self.config.time_budget_s}s exhausted")

    def _goal(self, state: WorldState) -> bool:
        return all(
            state.carrying_robot(b) is None
            and dist_xy(state.box_pos[b], self.index.centers[self.world.boxes[b].target])
            <= self.geo.target_tolerance
            for b in range(len(self.world.boxes))
        )

    def _record_failure(self, node: _Node, kind: OutcomeKind, parent_sig: tuple) -> None:
        self.failed_sigs.setdefault(parent_sig, set()).add(bundle_signature(node.bundle))
        parent = self.nodes[node.parent]
        self.ledger.append(
            FailureRecord(
                bundle=node.bundle,
                reason=kind,
                corrected=None,
                state_sig=parent_sig,
                state_doc=world_to_doc(self.world, parent.state) if self.keep_state_docs else None,
            )
        )
        self.pending.setdefault(node.parent, []).append((len(self.ledger) - 1, node.rank))

    def _validate(self, nid: int) -> bool:
        node = self.nodes[nid]
        if node.validated:
            return True
        parent = self.nodes[node.parent]
        parent_sig = coarse_signature(parent.state)
        cache_key = (bundle_signature(node.bundle), parent_sig)
        kind = self.sim_cache.get(cache_key) if self.config.use_sim_cache else None
        executed_state = None
        if kind is None:
            executed_state, kind, _ = simulate_bundle(
                self.world, parent.state, node.bundle, self.frontier, self.geo, self.motion_cache
            )
            self.sims += 1
            if self.config.use_sim_cache:
                self.sim_cache[cache_key] = kind
        if kind is not OutcomeKind.Success:
            self._record_failure(node, kind, parent_sig)
            return False
        if executed_state is not None:
            node.state = executed_state
        node.validated = True
        waiting = self.pending.get(node.parent)
        if waiting:
            still = []
            for idx, rank in waiting:
                if rank < node.rank and self.ledger[idx].corrected is None:
                    self.ledger[idx] = replace(self.ledger[idx], corrected=node.bundle)
                else:
                    still.append((idx, rank))
            self.pending[node.parent] = still
        return True

    def _expand(self, nid: int) -> list[int]:
        """Push all children of a node; returns their ids in rank order."""
        node = self.nodes[nid]
        csig = coarse_signature(node.state)
        bundles = enumerate_bundles(
            self.world,
            node.state,
            frozenset(self.failed_sigs.get(csig, ())),
            self.config,
            self.geo,
            self.index,
        )
        child_ids = []
        for rank, bundle in enumerate(bundles):
            preview = apply_preview(self.world, node.state, bundle, self.geo)
            h = heuristic(self.world, preview, self.config, self.geo, self.index)
            child = _Node(preview, node.g + 1, h, nid, bundle, rank, False)
            self.nodes.append(child)
            cid = len(self.nodes) - 1
            child_ids.append(cid)
            self.seq += 1
            heapq.heappush(self.heap, (child.g + child.h, -child.g, self.seq, cid))
        return child_ids

    def _finish(self, nid: int) -> PlanResult | None:
        """Reconstruct and re-simulate the full plan; None if verification fails."""
        steps: list[TaskStep] = []
        cur = self.nodes[nid]
        chain = []
        while cur.bundle is not None:
            steps.append(cur.bundle)
            chain.append(cur)
            cur = self.nodes[cur.parent]
        steps.reverse()
        chain.reverse()
        state = cur.state
        for node, bundle in zip(chain, steps):
            state, kind, _ = simulate_bundle(
                self.world, state, bundle, self.frontier, self.geo, self.motion_cache
            )
            if kind is not OutcomeKind.Success:
                parent_sig = coarse_signature(self.nodes[node.parent].state)
                self._record_failure(node, kind, parent_sig)
                return None
        if not self._goal(state):
            return None
        return PlanResult(
            plan=tuple(steps),
            ledger=self.ledger,
            expansions=self.pops,
            simulations=self.sims,
            elapsed_s=time.monotonic() - self.t0,
        )

    def _dominated(self, state: WorldState, g: int) -> bool:
        prev = self.closed.get(coarse_signature(state))
        return prev is not None and prev <= g

    def run(self) -> PlanResult:
        while self.heap:
            _, _, _, nid = heapq.heappop(self.heap)
            node = self.nodes[nid]
            self._tick_budget()
            if self._dominated(node.state, node.g) and not self._goal(node.state):
                continue
            if not self._validate(nid):
                continue
            plunge_floor = node.h
            plunge_strikes = 0
            while True:
                if self._goal(node.state):
                    result = self._finish(nid)
                    if result is not None:
                        return result
                    break
                if self._dominated(node.state, node.g):
                    break
                self.closed[coarse_signature(node.state)] = node.g
                child_ids = self._expand(nid)
                # Greedy descent: follow the best validating child while the
                # heuristic trends down. Children that revisit closed states
                # are skipped, so box shuffles cannot trap the descent.
                ordered = child_ids
                if child_ids and self.nodes[child_ids[0]].h >= node.h - 1e-9:
                    # Jammed: no child descends. Arm shuffles cannot help;
                    # relocating a box (a retreat) is what unblocks transfers.
                    ordered = sorted(
                        child_ids,
                        key=lambda cid: (
                            not any(c.carry for c in self.nodes[cid].bundle),
                            self.nodes[cid].rank,
                        ),
                    )
                descend = None
                for cid in ordered:
                    child = self.nodes[cid]
                    if child.h > node.h + self.config.plunge_slack:
                        continue
                    if self._dominated(child.state, child.g):
                        continue
                    self._tick_budget()
                    if self._validate(cid):
                        descend = cid
                        break
                if descend is None:
                    break
                nid = descend
                node = self.nodes[nid]
                if node.h < plunge_floor - 1e-9:
                    plunge_floor = node.h
                    plunge_strikes = 0
                else:
                    plunge_strikes += 1
                    if plunge_strikes > self.config.plunge_patience:
                        break
        raise Unsolvable("open set exhausted")


def plan(
    world: WorldSpec,
    start: WorldState,
    config: SearchConfig = SearchConfig(),
    frontier: FrontierConfig = FrontierConfig(),
    geo: Geometry = GEO,
    keep_state_docs: bool = False,
) -> PlanResult:
    """Search for a plan that places every box; raises Unsolvable or BudgetExhausted."""
    return _Search(world, start, config, frontier, geo, keep_state_docs).run()
