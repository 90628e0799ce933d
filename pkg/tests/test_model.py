import numpy as np
import pytest

from optiwb import geometry as geo
from optiwb.demo import demo_problem
from optiwb.model import (
    ArmJoint,
    BaseLimits,
    FixedJoint,
    JointConfig,
    Scene,
    Sun,
    TaskTrajectory,
    Waypoint,
    validate_model,
    validate_problem,
    validate_scene,
)
from optiwb.transforms import Transform


@pytest.fixture(scope="module")
def demo():
    return demo_problem()


def test_demo_model_valid(demo):
    model, scene, task, config = demo
    assert validate_model(model) == []
    assert validate_scene(scene, task) == []
    assert validate_problem(model, scene, task) == []
    assert config.violations() == []


def _with_joint(model, index, **changes):
    from dataclasses import replace

    joints = list(model.arm_joints)
    joints[index] = replace(joints[index], **changes)
    return replace(model, arm_joints=tuple(joints))


def test_degenerate_joint_interval_flagged(demo):
    model = demo[0]
    bad = _with_joint(model, 2, pos_min=0.5, pos_max=0.5)
    violations = validate_model(bad)
    assert len(violations) == 1
    assert "arm_joints[2]" in violations[0]


def test_zero_base_velocity_flagged(demo):
    from dataclasses import replace

    model = replace(demo[0], base_limits=BaseLimits(0.0, 0.7))
    violations = validate_model(model)
    assert violations == ["base_limits.v_max: must be positive"]


def test_too_few_joints_flagged(demo):
    from dataclasses import replace

    model = replace(demo[0], arm_joints=demo[0].arm_joints[:5], link_volumes=())
    assert any("at least 6 joints" in v for v in validate_model(model))


def test_bad_link_volume_flagged(demo):
    from dataclasses import replace
    from optiwb.model import LinkVolume

    model = replace(
        demo[0],
        link_volumes=(LinkVolume(0, geo.Box([0.1, -0.1, 0.1])),),
    )
    assert any("half extents" in v for v in validate_model(model))


def test_scene_task_happy_path(demo):
    model, scene, task, _ = demo
    square = geo.Polygon([[0, 0], [1, 0], [1, 1], [0, 1]])
    scene2 = Scene((), (square,), Sun(0.2, np.pi / 4), [1, 1, 0])
    assert validate_scene(scene2, task) == []


def test_bad_elevation_flagged(demo):
    _, _, task, _ = demo
    scene = Scene((), (), Sun(0.0, -0.1), [1, 1, 0])
    assert any("sun.elevation" in v for v in validate_scene(scene, task))


def test_non_monotone_timestamps_flagged(demo):
    model, scene, task, _ = demo
    wps = list(task.waypoints)
    wps[5] = Waypoint(3.0, wps[5].position, wps[5].orientation, wps[5].fixed_joints)
    bad = TaskTrajectory(tuple(wps))
    violations = validate_scene(scene, bad)
    assert any("waypoints[5].t" in v or "waypoints[6].t" in v for v in violations)


def test_no_redundancy_flagged(demo):
    model, scene, task, _ = demo
    # fixing four arm joints leaves m = 10 = n: no redundancy left
    wps = tuple(
        Waypoint(wp.t, wp.position, wp.orientation,
                 tuple(FixedJoint(i, 0.0) for i in range(4)))
        for wp in task.waypoints
    )
    violations = validate_problem(model, scene, TaskTrajectory(wps))
    assert any("no redundancy" in v for v in violations)


def test_wrong_fixed_count_flagged(demo):
    model, scene, task, _ = demo
    wps = tuple(
        Waypoint(wp.t, wp.position, wp.orientation, ())
        for wp in task.waypoints
    )
    violations = validate_problem(model, scene, TaskTrajectory(wps))
    assert any("redundancy r = 4" in v for v in violations)


def test_joint_config_normalizes_heading():
    q = JointConfig(1.0, 2.0, 3 * np.pi, np.zeros(7))
    assert -np.pi < q.h <= np.pi
    assert q.q.shape == (10,)
    assert np.allclose(q.base, [1.0, 2.0, q.h])


def test_arm_joint_normalizes_axis():
    j = ArmJoint([0, 0, 2.0], Transform.identity(), -1, 1, 1, 1)
    assert np.allclose(j.axis, [0, 0, 1])
