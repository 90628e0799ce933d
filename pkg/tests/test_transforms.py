import numpy as np
from hypothesis import given, strategies as st

from optiwb.transforms import (
    Transform,
    angle_diff,
    planar_transform,
    quat_from_axis_angle,
    quat_from_matrix,
    quat_to_matrix,
    rotvec_from_matrix,
    wrap_angle,
)

finite_angles = st.floats(-50.0, 50.0, allow_nan=False)


@given(finite_angles)
def test_wrap_angle_idempotent(h):
    once = wrap_angle(h)
    assert -np.pi < once <= np.pi
    assert wrap_angle(once) == once


def test_wrap_angle_boundary():
    assert wrap_angle(np.pi) == np.pi
    assert wrap_angle(-np.pi) == np.pi
    assert abs(wrap_angle(3 * np.pi) - np.pi) < 1e-12


@given(finite_angles, finite_angles)
def test_angle_diff_shortest(a, b):
    d = angle_diff(a, b)
    assert -np.pi < d <= np.pi
    assert abs(wrap_angle(b + d) - wrap_angle(a)) < 1e-9


def test_compose_matches_matrix_product():
    rng = np.random.default_rng(0)
    for _ in range(200):
        axes = rng.normal(size=(2, 3))
        axes /= np.linalg.norm(axes, axis=1, keepdims=True)
        t1 = Transform.from_axis_angle(axes[0], rng.uniform(-3, 3), rng.normal(size=3))
        t2 = Transform.from_axis_angle(axes[1], rng.uniform(-3, 3), rng.normal(size=3))
        assert np.allclose(t1.compose(t2).matrix(), t1.matrix() @ t2.matrix(), atol=1e-12)
        assert np.allclose(
            t1.inverse().matrix(), np.linalg.inv(t1.matrix()), atol=1e-10
        )
        p = rng.normal(size=3)
        assert np.allclose(t1.apply(p), (t1.matrix() @ np.append(p, 1.0))[:3], atol=1e-12)


def test_quaternion_matrix_round_trip():
    rng = np.random.default_rng(1)
    for _ in range(300):
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        q2 = quat_from_matrix(quat_to_matrix(q))
        assert min(np.abs(q2 - q).max(), np.abs(q2 + q).max()) < 1e-12


def test_rotvec_round_trip():
    rng = np.random.default_rng(2)
    for _ in range(300):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(1e-8, np.pi - 1e-6)
        rv = rotvec_from_matrix(quat_to_matrix(quat_from_axis_angle(axis, angle)))
        assert np.allclose(rv, axis * angle, atol=1e-6)


def test_planar_transform():
    t = planar_transform(1.0, 2.0, np.pi / 2)
    assert np.allclose(t.apply([1.0, 0.0, 0.0]), [1.0, 3.0, 0.0], atol=1e-12)
