"""Performance indices and integral cost accumulation.

Two indices are blended: target visibility (one minus the cosine between the
camera boresight and the camera-to-target direction) and the squared norm of
all joint rates, a standard energy surrogate.  The same sigma-weighted blend
is scored on discrete trajectories (stage sums with backward-difference
rates) and on spline-backed ones (composite Simpson quadrature with analytic
derivatives), so both planning stages optimize the same objective.
"""

from __future__ import annotations

import numpy as np

from .kinematics import base_rotations, camera_pose
from .model import CostBreakdown, JointConfig, JointTrajectory, RobotModel, Scene
from .transforms import angle_diff


def tv_cost(model: RobotModel, q_b, target) -> float:
    """Visibility index in [0, 2]: 0 when the camera points at the target."""
    return float(tv_cost_batch(model, np.asarray(q_b, float).reshape(1, 3), target)[0])


def tv_cost_batch(model: RobotModel, bases, target):
    """Visibility index for a batch of base configs (B, 3)."""
    bases = np.atleast_2d(np.asarray(bases, dtype=float))
    target = np.asarray(target, dtype=float).reshape(3)
    rb = base_rotations(bases[:, 2])
    cam_r = rb @ model.camera_transform.rotation_matrix
    cam_t = np.concatenate([bases[:, :2], np.zeros((len(bases), 1))], axis=1)
    cam_t = cam_t + np.einsum("bij,j->bi", rb, model.camera_transform.translation)
    to_target = target - cam_t
    dist = np.linalg.norm(to_target, axis=1)
    if np.any(dist <= 1e-9):
        raise ValueError("target coincides with the camera origin")
    boresight = cam_r[:, :, 0]
    return 1.0 - np.einsum("bi,bi->b", boresight, to_target / dist[:, None])


def snv_cost(q_dot) -> float:
    """Squared norm of the full rate vector (base rates plus arm rates)."""
    q_dot = np.asarray(q_dot, dtype=float)
    return float(q_dot @ q_dot)


def phi(model: RobotModel, scene: Scene, q: JointConfig, q_dot, sigma: float) -> float:
    """Stage objective: sigma * visibility + (1 - sigma) * rate norm."""
    if not 0.0 <= sigma <= 1.0:
        raise ValueError("sigma must lie in [0, 1]")
    tv = tv_cost(model, q.base, scene.target_position) if sigma > 0.0 else 0.0
    snv = snv_cost(q_dot) if sigma < 1.0 else 0.0
    return sigma * tv + (1.0 - sigma) * snv


def initial_cost(model: RobotModel, scene: Scene, q0: JointConfig, sigma: float) -> float:
    """Cost charged to the start configuration: the zero-velocity objective."""
    if not 0.0 <= sigma <= 1.0:
        raise ValueError("sigma must lie in [0, 1]")
    if sigma == 0.0:
        return 0.0
    return sigma * tv_cost(model, q0.base, scene.target_position)


def config_rates(q_prev: JointConfig, q: JointConfig, dt: float):
    """Backward-difference rate vector [dx, dy, dh, arm...] / dt with the
    heading rate taken on the shortest angular difference."""
    base = np.array(
        [q.x - q_prev.x, q.y - q_prev.y, angle_diff(q.h, q_prev.h)]
    )
    return np.concatenate([base, q.arm - q_prev.arm]) / dt


def _discrete_cost(model, scene, samples, sigma):
    t0, q0 = samples[0]
    tv_total = tv_cost(model, q0.base, scene.target_position)
    snv_total = 0.0
    for i in range(1, len(samples)):
        t_prev, q_prev = samples[i - 1]
        t_i, q_i = samples[i]
        dt = t_i - t_prev
        tv_total += tv_cost(model, q_i.base, scene.target_position)
        snv_total += snv_cost(config_rates(q_prev, q_i, dt))
    total = sigma * tv_total + (1.0 - sigma) * snv_total
    return CostBreakdown(total, tv_total, snv_total)


def simpson_weights(n_points: int):
    """Composite Simpson weights for an odd count of equispaced samples."""
    if n_points % 2 == 0 or n_points < 3:
        raise ValueError("Simpson rule needs an odd sample count >= 3")
    w = np.ones(n_points)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def quadrature_samples(knot_times, samples_per_interval: int):
    """Per-interval equispaced sample times and Simpson weights.

    Odd per-interval counts are rounded up so each interval carries a valid
    Simpson panel; weights already include the sample spacing.
    """
    m = samples_per_interval + (samples_per_interval % 2)
    times = []
    weights = []
    for a, b in zip(knot_times[:-1], knot_times[1:]):
        ts = np.linspace(a, b, m + 1)
        times.append(ts)
        weights.append(simpson_weights(m + 1) * (b - a) / m)
    return times, weights


def integrate_indices(model, scene, trajectory, knot_times, samples_per_interval):
    """Quadrature of the visibility and rate indices along a spline-backed
    trajectory; returns (tv_integral, snv_integral).

    The base's piecewise-constant rates integrate in closed form (their
    squared norm is discontinuous at phase joints, which sampling would turn
    into jumps of the total); the smooth visibility and arm-rate integrands
    use composite Simpson panels.
    """
    from .smoothing import eval_trajectory_arrays

    times, weights = quadrature_samples(knot_times, samples_per_interval)
    tv_total = 0.0
    snv_total = float(trajectory.base_profile.rate_energy_by_interval().sum())
    for ts, w in zip(times, weights):
        q, q_dot, _ = eval_trajectory_arrays(trajectory, ts)
        tv = tv_cost_batch(model, q[:, :3], scene.target_position)
        snv = np.einsum("bi,bi->b", q_dot[:, 3:], q_dot[:, 3:])
        tv_total += float(w @ tv)
        snv_total += float(w @ snv)
    return tv_total, snv_total


def trajectory_cost(
    model: RobotModel,
    scene: Scene,
    traj: JointTrajectory,
    sigma: float,
    samples_per_interval: int = 8,
) -> CostBreakdown:
    """Accumulated cost of a trajectory under the sigma-weighted objective.

    Discrete trajectories get the stage sum (initial visibility term plus
    per-stage objective with backward-difference rates); spline-backed ones
    get the integral of the same blend.
    """
    if not 0.0 <= sigma <= 1.0:
        raise ValueError("sigma must lie in [0, 1]")
    if traj.is_spline:
        knot_times = traj.base_profile.knot_times
        tv_total, snv_total = integrate_indices(
            model, scene, traj, knot_times, samples_per_interval
        )
        total = sigma * tv_total + (1.0 - sigma) * snv_total
        return CostBreakdown(total, tv_total, snv_total)
    if not traj.samples:
        raise ValueError("trajectory has no samples")
    return _discrete_cost(model, scene, traj.samples, sigma)
