"""Deterministic multi-robot task-and-motion-planning workbench."""

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
    cell_center,
    collides,
    initial_state,
    reachable,
    segment_clearance,
    validate_world,
    world_from_doc,
    world_to_doc,
)
from .executor import (
    Outcome,
    RobotCommand,
    TaskPlan,
    TaskStep,
    WaypointPlan,
    classify_episode,
    execute_step,
    interpolate,
)
from .motion_search import (
    FEASIBLE,
    INFEASIBLE,
    FrontierConfig,
    InvalidQuery,
    MotionQuery,
    build_query,
    certify,
    search,
)
from .task_search import (
    BudgetExhausted,
    FailureRecord,
    PlanResult,
    SearchConfig,
    Unsolvable,
    enumerate_bundles,
    heuristic,
    plan,
)
from .generate import GenConfig, MotionInstance, TaskInstance, generate, generate_motion
from .rewards import (
    RewardBreakdown,
    RolloutRecord,
    motion_reward,
    oracle_motion,
    rollout,
    task_reward_stage2,
    task_reward_stage3,
)
from .planner_io import Feedback, FormatError, parse_observation, parse_plan, render_observation, render_plan
from .episodes import (
    FULL_PLAN,
    IC_REPLAN,
    NC_REPLAN,
    EpisodeReport,
    OraclePlanner,
    PlannerTimeout,
    ProtocolError,
    run_episode,
)
from .harness import EvalReport, build_dataset, evaluate, load_instances, write_report

__version__ = "0.1.0"
