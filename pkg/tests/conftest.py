import pytest

from tampbench.model import (
    BoxSpec,
    ObstacleSpec,
    RobotSpec,
    WorldSpec,
    home_block_for_joint,
    initial_state,
    standard_base_for_joint,
)


def make_robot(rid: int, joint_col: int, joint_row: int, pitch: float = 0.5) -> RobotSpec:
    joint = (joint_col * pitch, joint_row * pitch)
    return RobotSpec(
        id=rid,
        base_xy=standard_base_for_joint(joint, pitch),
        home_block=home_block_for_joint(joint_col, joint_row),
    )


def make_world(
    cols: int,
    rows: int,
    joints: list[tuple[int, int]],
    obstacles: list[tuple[int, int]] = (),
    boxes: list[tuple[tuple[int, int], tuple[int, int]]] = (),
    seed: int = 0,
) -> WorldSpec:
    return WorldSpec(
        map_cols=cols,
        map_rows=rows,
        robots=tuple(make_robot(i, jc, jr) for i, (jc, jr) in enumerate(joints)),
        obstacles=tuple(ObstacleSpec(cell=c) for c in obstacles),
        boxes=tuple(BoxSpec(initial=i, target=t) for i, t in boxes),
        seed=seed,
    )


@pytest.fixture
def small_world():
    """2x2 map, one robot, one box one diagonal hop from its target."""
    return make_world(2, 2, [(1, 1)], boxes=[((0, 0), (1, 1))])


@pytest.fixture
def small_state(small_world):
    return initial_state(small_world)
