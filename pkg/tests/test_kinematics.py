"""Forward/inverse kinematics against an independently coded homogeneous
4x4-matrix oracle, plus the camera model."""

import numpy as np
import pytest

from optiwb.demo import THIRD_JOINT_VALUE
from optiwb.errors import KinematicsError
from optiwb.kinematics import (
    arm_frames,
    augmented_ik,
    camera_pose,
    forward_kinematics,
    link_frames,
    project_target,
)
from optiwb.model import ArmJoint, IKConfig, JointConfig
from optiwb.transforms import Transform

IK_CFG = IKConfig(seeds_per_joint=2, max_seeds=16, max_branches=16, max_iterations=80)


def fk_matrix_oracle(model, q: JointConfig):
    """Plain 4x4 homogeneous-matrix chain product."""

    def rot_about(axis, angle):
        axis = np.asarray(axis, float)
        axis = axis / np.linalg.norm(axis)
        k = np.array(
            [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
        )
        m = np.eye(4)
        m[:3, :3] = np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)
        return m

    c, s = np.cos(q.h), np.sin(q.h)
    m = np.array([[c, -s, 0, q.x], [s, c, 0, q.y], [0, 0, 1, 0], [0, 0, 0, 1.0]])
    m = m @ q_mat(model.arm_mount)
    for joint, angle in zip(model.arm_joints, q.arm):
        m = m @ q_mat(joint.origin) @ rot_about(joint.axis, angle)
    return m


def q_mat(t: Transform):
    return t.matrix()


def random_config(model, rng, margin=0.05):
    lo, hi = model.arm_pos_min, model.arm_pos_max
    arm = lo + (margin + (1 - 2 * margin) * rng.uniform(size=model.n_arm)) * (hi - lo)
    return JointConfig(
        rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-np.pi, np.pi), arm
    )


# ---------------------------------------------------------------------------
# forward kinematics
# ---------------------------------------------------------------------------

def test_fk_zero_config_is_origin_composition(model):
    q = JointConfig(0, 0, 0, np.zeros(model.n_arm))
    pose = forward_kinematics(model, q)
    expected = model.arm_mount
    for joint in model.arm_joints:
        expected = expected.compose(joint.origin)
    assert np.allclose(pose.matrix(), expected.matrix(), atol=1e-12)


def test_fk_base_translation_equivariance(model):
    rng = np.random.default_rng(0)
    for _ in range(25):
        q = random_config(model, rng)
        d = rng.uniform(-2, 2, 2)
        q2 = JointConfig(q.x + d[0], q.y + d[1], q.h, q.arm)
        p1 = forward_kinematics(model, q)
        p2 = forward_kinematics(model, q2)
        assert np.allclose(p2.translation, p1.translation + [d[0], d[1], 0.0], atol=1e-12)
        assert np.allclose(p2.rotation, p1.rotation, atol=1e-12)


def test_fk_matches_matrix_oracle(model):
    rng = np.random.default_rng(1)
    for _ in range(100):
        q = random_config(model, rng)
        pose = forward_kinematics(model, q)
        assert np.abs(pose.matrix() - fk_matrix_oracle(model, q)).max() < 1e-12


def test_link_frames_chain_consistency(model):
    rng = np.random.default_rng(2)
    q = random_config(model, rng)
    fr, ft = link_frames(model, q.base[None], q.arm[None])
    assert fr.shape == (1, model.n_arm + 1, 3, 3)
    ee = forward_kinematics(model, q)
    assert np.allclose(ft[0, -1], ee.translation, atol=1e-12)


# ---------------------------------------------------------------------------
# camera
# ---------------------------------------------------------------------------

def test_camera_pose_identity():
    from dataclasses import replace

    from optiwb.demo import demo_robot

    model = replace(demo_robot(), camera_transform=Transform.identity())
    pose = camera_pose(model, [0, 0, 0])
    assert np.allclose(pose.matrix(), np.eye(4), atol=1e-12)


def test_camera_pose_translation(model):
    pose = camera_pose(model, [1, 2, 0])
    base = camera_pose(model, [0, 0, 0])
    assert np.allclose(pose.translation, base.translation + [1, 2, 0], atol=1e-12)


def test_camera_pose_matches_matrix_oracle(model):
    c, s = np.cos(np.pi / 2), np.sin(np.pi / 2)
    mb = np.array([[c, -s, 0, 0.3], [s, c, 0, -0.4], [0, 0, 1, 0], [0, 0, 0, 1.0]])
    expected = mb @ model.camera_transform.matrix()
    got = camera_pose(model, [0.3, -0.4, np.pi / 2]).matrix()
    assert np.allclose(got, expected, atol=1e-12)


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------

def test_project_on_axis(model):
    cam = camera_pose(model, [0, 0, 0])
    target = cam.apply([2.0, 0.0, 0.0])  # on the boresight
    proj = project_target(model, [0, 0, 0], target)
    assert proj is not None
    assert proj.u == pytest.approx(0.0, abs=1e-12)
    assert proj.v == pytest.approx(0.0, abs=1e-12)
    assert proj.in_bounds


def test_project_behind_camera(model):
    cam = camera_pose(model, [0, 0, 0])
    target = cam.apply([-1.0, 0.0, 0.0])
    assert project_target(model, [0, 0, 0], target) is None


def test_project_similar_triangles(model):
    # 45 degrees off boresight at depth 1: u equals the focal length
    cam = camera_pose(model, [0, 0, 0])
    target = cam.apply([1.0, 1.0, 0.0])
    proj = project_target(model, [0, 0, 0], target)
    assert proj.u == pytest.approx(model.camera_ccd.focal, abs=1e-12)
    assert proj.v == pytest.approx(0.0, abs=1e-12)
    assert not proj.in_bounds  # 45 degrees is far outside the CCD half-width


# ---------------------------------------------------------------------------
# augmented inverse kinematics
# ---------------------------------------------------------------------------

def test_ik_round_trip_membership(model):
    rng = np.random.default_rng(3)
    q = random_config(model, rng, margin=0.2)
    pose = forward_kinematics(model, q)
    sols = augmented_ik(model, pose, [(2, q.arm[2])], q.base, IK_CFG)
    best = min(np.abs(s.config.arm - q.arm).max() for s in sols)
    assert best < 1e-6


def test_ik_unreachable_gives_empty_set(model):
    pose = Transform(translation=[100.0, 100.0, 100.0])
    sols = augmented_ik(model, pose, [(2, 0.0)], [0, 0, 0], IK_CFG)
    assert len(sols) == 0


def test_ik_residuals_and_bounds(model):
    rng = np.random.default_rng(4)
    for _ in range(10):
        q = random_config(model, rng, margin=0.15)
        pose = forward_kinematics(model, q)
        sols = augmented_ik(model, pose, [(2, q.arm[2])], q.base, IK_CFG)
        assert len(sols) >= 1
        for s in sols:
            assert s.position_residual < 1e-6
            assert s.orientation_residual < 1e-6
            re = forward_kinematics(model, s.config)
            assert np.linalg.norm(re.translation - pose.translation) < 1e-6
            assert np.all(s.config.arm >= model.arm_pos_min - 1e-9)
            assert np.all(s.config.arm <= model.arm_pos_max + 1e-9)
            assert s.config.arm[2] == pytest.approx(q.arm[2], abs=1e-12)


def test_ik_deterministic_branches(model):
    rng = np.random.default_rng(5)
    q = random_config(model, rng, margin=0.2)
    pose = forward_kinematics(model, q)
    s1 = augmented_ik(model, pose, [(2, q.arm[2])], q.base, IK_CFG)
    s2 = augmented_ik(model, pose, [(2, q.arm[2])], q.base, IK_CFG)
    assert len(s1) == len(s2)
    for a, b in zip(s1, s2):
        assert a.branch_id == b.branch_id
        assert np.array_equal(a.config.arm, b.config.arm)
    # branch ids label the lexicographically sorted solution list
    arms = s1.arm_array()
    order = np.lexsort(arms.T[::-1])
    assert list(order) == sorted(order)


def test_ik_branch_cap(model):
    rng = np.random.default_rng(6)
    q = random_config(model, rng, margin=0.2)
    pose = forward_kinematics(model, q)
    capped = IKConfig(seeds_per_joint=2, max_seeds=16, max_branches=2, max_iterations=80)
    sols = augmented_ik(model, pose, [(2, q.arm[2])], q.base, capped)
    assert len(sols) <= 2


def test_ik_requires_six_free_joints(model):
    pose = forward_kinematics(model, JointConfig(0, 0, 0, np.zeros(7)))
    with pytest.raises(KinematicsError):
        augmented_ik(model, pose, [], [0, 0, 0], IK_CFG)


def test_ik_degenerate_chain_raises():
    from optiwb.model import BaseLimits, CameraCCD, RobotModel

    joints = tuple(
        ArmJoint([0, 0, 1], Transform.identity(), -1, 1, 1, 1) for _ in range(7)
    )
    degenerate = RobotModel(
        BaseLimits(1, 1), joints, Transform.identity(), (),
        Transform.identity(), CameraCCD(0.03, 0.02, 0.02),
    )
    with pytest.raises(KinematicsError):
        augmented_ik(degenerate, Transform.identity(), [(2, 0.0)], [0, 0, 0], IK_CFG)


def test_arm_frames_batch_shapes(model):
    rng = np.random.default_rng(7)
    arms = rng.uniform(-1, 1, (5, model.n_arm))
    fr, ft, axes = arm_frames(model, arms)
    assert fr.shape == (5, model.n_arm + 1, 3, 3)
    assert ft.shape == (5, model.n_arm + 1, 3)
    assert axes.shape == (5, model.n_arm, 3)
