"""Verifiable reward computation and the environment side of the rollout loop.

Rewards decompose into success / format / efficiency / motion-penalty components
whose sum is the total. The rollout walks candidate plans step by step, counts
certified-infeasible robot-steps, and collects feasible-but-failed motion
queries into a capped buffer of reproducible negatives.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Sized

from .geometry import Pose
from .model import GEO, Geometry, OutcomeKind, WorldSpec, WorldState, world_from_doc, world_to_doc
from .executor import Outcome, RobotCommand, TaskPlan, WaypointPlan, classify_episode, execute_step
from .generate import TaskInstance
from .motion_search import (
    FEASIBLE,
    INFEASIBLE,
    FrontierConfig,
    InvalidQuery,
    MotionQuery,
    build_query,
    certify,
    plan_from_wire,
    search as motion_search,
)

FORMAT_BONUS = 0.1
EFFICIENCY_RATE = 0.05
EFFICIENCY_FLOOR = -0.2
MOTION_PENALTY_FLOOR = 0.2
MOTION_PENALTY_RATE = 0.05
DEFAULT_BUFFER_CAP = 8


@dataclass(frozen=True)
class RewardBreakdown:
    r_success: float = 0.0
    r_format: float = 0.0
    r_efficiency: float = 0.0
    r_motion_penalty: float = 0.0

    @property
    def total(self) -> float:
        return self.r_success + self.r_format + self.r_efficiency + self.r_motion_penalty

    def to_doc(self) -> dict:
        return {
            "r_success": self.r_success,
            "r_format": self.r_format,
            "r_efficiency": self.r_efficiency,
            "r_motion_penalty": self.r_motion_penalty,
            "total": self.total,
        }


def task_reward_stage2(
    plan: Sized, outcome: Outcome | None, reference_len: int, well_formed: bool
) -> RewardBreakdown:
    """Task-only reward: success gate, format bonus, length shaping versus the reference.

    Length shaping applies only to successful plans; rewarding short failures
    would teach giving up early.
    """
    if reference_len < 1:
        raise ValueError("reference_len must be >= 1")
    success = outcome is not None and outcome.kind is OutcomeKind.Success
    r_success = 1.0 if success else 0.0
    r_format = FORMAT_BONUS if well_formed else 0.0
    r_eff = (
        max(EFFICIENCY_RATE * (reference_len - len(plan)), EFFICIENCY_FLOOR) if success else 0.0
    )
    return RewardBreakdown(r_success, r_format, r_eff, 0.0)


def task_reward_stage3(
    plan: Sized,
    outcome: Outcome | None,
    reference_len: int,
    well_formed: bool,
    n_infeasible: int,
) -> RewardBreakdown:
    """Motion-aware reward: the task reward plus a penalty for infeasible motion steps.

    Penalty is zero at N=0 (feasible plans are never punished), else
    -max(0.2, 0.05 * N).
    """
    if n_infeasible < 0:
        raise ValueError("n_infeasible must be >= 0")
    base = task_reward_stage2(plan, outcome, reference_len, well_formed)
    penalty = (
        0.0
        if n_infeasible == 0
        else -max(MOTION_PENALTY_FLOOR, MOTION_PENALTY_RATE * n_infeasible)
    )
    return RewardBreakdown(base.r_success, base.r_format, base.r_efficiency, penalty)


def motion_reward(plan_text: str | WaypointPlan, outcome: Outcome | None) -> RewardBreakdown:
    """Motion-level reward: reached-target success plus waypoint format bonus."""
    if isinstance(plan_text, WaypointPlan):
        well_formed = True
    else:
        try:
            plan_from_wire(plan_text)
            well_formed = True
        except (ValueError, KeyError, TypeError):
            well_formed = False
    success = well_formed and outcome is not None and outcome.kind is OutcomeKind.Success
    return RewardBreakdown(
        1.0 if success else 0.0, FORMAT_BONUS if well_formed else 0.0, 0.0, 0.0
    )


# A motion planner is a callable producing a waypoint plan for a certified-feasible
# query; returning None means it gave up (treated as a failed empty plan).
MotionPlanner = Callable[[WorldSpec, MotionQuery], WaypointPlan | None]


def oracle_motion(world: WorldSpec, query: MotionQuery) -> WaypointPlan | None:
    result = motion_search(world, query)
    return None if result == INFEASIBLE else result


def straight_line_motion(world: WorldSpec, query: MotionQuery) -> WaypointPlan | None:
    """Crippled baseline: drives straight at the target, ignoring everything."""
    return WaypointPlan(query.robot_id, (query.target,))


@dataclass(frozen=True)
class BufferEntry:
    """A feasible-but-failed motion query, reproducible from the stored snapshot."""

    plan_index: int
    step: int
    robot_id: int
    target: Pose
    carry: bool
    state_doc: dict
    plan: WaypointPlan
    kind: OutcomeKind

    def to_doc(self) -> dict:
        return {
            "plan_index": self.plan_index,
            "step": self.step,
            "robot_id": self.robot_id,
            "target": [self.target.x, self.target.y, self.target.z],
            "carry": self.carry,
            "state": self.state_doc["state"],
            "waypoints": [[w.x, w.y, w.z] for w in self.plan.waypoints],
            "kind": self.kind.value,
        }


@dataclass
class RolloutRecord:
    plan_index: int
    plan: TaskPlan
    well_formed: bool
    outcome: Outcome
    n_infeasible: int
    executed_steps: int
    buffer: list[BufferEntry]
    reward: RewardBreakdown

    def to_doc(self) -> dict:
        return {
            "plan_index": self.plan_index,
            "plan_len": len(self.plan),
            "well_formed": self.well_formed,
            "outcome": self.outcome.kind.value,
            "n_infeasible": self.n_infeasible,
            "executed_steps": self.executed_steps,
            "buffer": [b.to_doc() for b in self.buffer],
            "reward": self.reward.to_doc(),
        }


def execute_single(
    world: WorldSpec,
    state: WorldState,
    command: RobotCommand,
    plan: WaypointPlan,
    geo: Geometry = GEO,
) -> Outcome:
    """Run one robot's plan with every other robot frozen at its current pose."""
    _, outcome = execute_step(world, state, (command,), {command.robot_id: plan}, geo)
    return outcome


def walk_plan(
    instance: TaskInstance,
    plan: TaskPlan,
    motion_planner: MotionPlanner,
    plan_index: int = 0,
    buffer_cap: int = DEFAULT_BUFFER_CAP,
    frontier: FrontierConfig | None = None,
    geo: Geometry = GEO,
    collect_buffer: bool = True,
) -> tuple[Outcome, int, int, list[BufferEntry]]:
    """Execute a plan to the end, never aborting early.

    A failed step leaves the state unchanged and the walk continues, so every
    robot-step of the plan receives a feasibility verdict. Returns the episode
    outcome, N_infeasible (per robot-step), successfully executed step count,
    and the feasible-but-failed buffer entries (capped).
    """
    world = instance.world
    frontier = frontier or FrontierConfig()
    state = instance.initial
    outcomes: list[Outcome] = []
    n_infeasible = 0
    executed = 0
    buffer: list[BufferEntry] = []

    for step_idx, step in enumerate(plan):
        infeasible_robots: list[int] = []
        step_plans: dict[int, WaypointPlan] = {}
        for cmd in sorted(step, key=lambda c: c.robot_id):
            if cmd.robot_id < 0 or cmd.robot_id >= len(world.robots):
                infeasible_robots.append(cmd.robot_id)
                n_infeasible += 1
                continue
            query = build_query(world, state, cmd.robot_id, cmd.target, cmd.carry, geo)
            try:
                verdict = certify(world, query, frontier, geo)
            except InvalidQuery:
                verdict = INFEASIBLE
            if verdict == INFEASIBLE:
                infeasible_robots.append(cmd.robot_id)
                n_infeasible += 1
                continue
            supplied = motion_planner(world, query)
            if supplied is None:
                supplied = WaypointPlan(cmd.robot_id, ())
            single = execute_single(world, state, cmd, supplied, geo)
            if not single.ok and collect_buffer and len(buffer) < buffer_cap:
                buffer.append(
                    BufferEntry(
                        plan_index=plan_index,
                        step=step_idx,
                        robot_id=cmd.robot_id,
                        target=cmd.target,
                        carry=cmd.carry,
                        state_doc=world_to_doc(world, state),
                        plan=supplied,
                        kind=single.kind,
                    )
                )
            step_plans[cmd.robot_id] = supplied

        if infeasible_robots:
            outcomes.append(
                Outcome(
                    OutcomeKind.UnreachableMotion,
                    f"motion certified infeasible for robots {infeasible_robots}",
                    at_step=state.step_index,
                    at_robot=infeasible_robots[0],
                )
            )
            continue
        if not step:
            outcomes.append(Outcome(OutcomeKind.Success, at_step=state.step_index))
            continue
        new_state, outcome = execute_step(world, state, step, step_plans, geo)
        outcomes.append(outcome)
        if outcome.ok:
            state = new_state
            executed += 1

    if not outcomes:
        outcomes.append(Outcome(OutcomeKind.Success, at_step=0))
    episode = classify_episode(world, outcomes, state, geo)
    return episode, n_infeasible, executed, buffer


def rollout(
    instance: TaskInstance,
    plans: Sequence[TaskPlan | str],
    motion_planner: MotionPlanner,
    buffer_cap: int = DEFAULT_BUFFER_CAP,
    frontier: FrontierConfig | None = None,
    geo: Geometry = GEO,
) -> list[RolloutRecord]:
    """Score a group of candidate plans against one instance.

    Accepts parsed plans or raw plan text; a record is produced per candidate
    and per-candidate errors never abort the batch.
    """
    from .planner_io import FormatError, parse_plan

    records: list[RolloutRecord] = []
    for j, candidate in enumerate(plans):
        well_formed = True
        if isinstance(candidate, str):
            try:
                parsed = parse_plan(candidate)
            except FormatError as err:
                records.append(
                    RolloutRecord(
                        plan_index=j,
                        plan=(),
                        well_formed=False,
                        outcome=Outcome(OutcomeKind.ExecutionErr, f"plan format invalid: {err}"),
                        n_infeasible=0,
                        executed_steps=0,
                        buffer=[],
                        reward=task_reward_stage3((), None, instance.reference_len, False, 0),
                    )
                )
                continue
        else:
            parsed = candidate
        outcome, n_inf, executed, buffer = walk_plan(
            instance, parsed, motion_planner, j, buffer_cap, frontier, geo
        )
        records.append(
            RolloutRecord(
                plan_index=j,
                plan=parsed,
                well_formed=well_formed,
                outcome=outcome,
                n_infeasible=n_inf,
                executed_steps=executed,
                buffer=buffer,
                reward=task_reward_stage3(
                    parsed, outcome, instance.reference_len, well_formed, n_inf
                ),
            )
        )
    return records


def replay_buffer_entry(
    world: WorldSpec, entry: BufferEntry, frontier: FrontierConfig | None = None, geo: Geometry = GEO
) -> tuple[str, Outcome]:
    """Re-certify and re-execute a buffer entry from its stored snapshot."""
    frontier = frontier or FrontierConfig()
    _, state = world_from_doc(entry.state_doc)
    query = build_query(world, state, entry.robot_id, entry.target, entry.carry, geo)
    verdict = certify(world, query, frontier, geo)
    cmd = RobotCommand(entry.robot_id, entry.target, entry.carry)
    outcome = execute_single(world, state, cmd, entry.plan, geo)
    return verdict, outcome
