"""Feasibility checks: positional constraints, discrete-derivative limits,
pure rolling, and the final-waypoint shadow rule.

A configuration is positionally admissible when the arm respects its
position bounds, no link volume meets an obstacle, non-adjacent links stay
clear of each other, and the base center stays out of forbidden areas; the
final waypoint additionally keeps every link off the sun-to-target ray.
Edge feasibility between consecutive configurations adds velocity and
acceleration limits and the rolling maneuver model (rotate toward the motion
direction, translate, rotate to the final heading, all within the interval).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry
from .kinematics import link_frames
from .model import JointConfig, JointTrajectory, RobotModel, Scene
from .transforms import angle_diff

_TRANSLATION_EPS = 1e-9


@dataclass(frozen=True)
class Violation:
    constraint_id: str
    where: float  # time in seconds, or waypoint index for discrete checks
    magnitude: float


@dataclass(frozen=True)
class ConstraintReport:
    violations: tuple[Violation, ...]

    def __post_init__(self):
        object.__setattr__(self, "violations", tuple(self.violations))

    @property
    def feasible(self) -> bool:
        return not self.violations

    def merged(self, other: "ConstraintReport") -> "ConstraintReport":
        return ConstraintReport(self.violations + other.violations)


def _self_collision_pairs(model: RobotModel):
    """Volume index pairs to test: link distance >= 2 (adjacent links and
    same-link volumes permanently touch)."""
    pairs = []
    vols = model.link_volumes
    for i in range(len(vols)):
        for j in range(i + 1, len(vols)):
            if abs(vols[i].link - vols[j].link) >= 2:
                pairs.append((i, j))
    return pairs


def positional_mask(model, scene, bases, arms, is_final, check_arm_bounds=True):
    """Batched admissibility of configurations, with pruning attribution.

    Constraints short-circuit in a fixed order, so each infeasible row is
    attributed to the first failed check.  Returns (feasible (B,), counts).
    """
    bases = np.atleast_2d(np.asarray(bases, dtype=float))
    arms = np.atleast_2d(np.asarray(arms, dtype=float))
    b = len(bases)
    alive = np.ones(b, dtype=bool)
    counts = {}

    if check_arm_bounds:
        lo, hi = model.arm_pos_min, model.arm_pos_max
        ok = np.all((arms >= lo - 1e-9) & (arms <= hi + 1e-9), axis=1)
        counts["arm_bounds"] = int(np.sum(alive & ~ok))
        alive &= ok

    if np.any(alive) and scene.forbidden_areas:
        hit = geometry.points_in_forbidden(bases[:, :2], scene.forbidden_areas)
        counts["forbidden_area"] = int(np.sum(alive & hit))
        alive &= ~hit

    needs_frames = np.any(alive) and (
        scene.obstacles or _self_collision_pairs(model) or is_final
    )
    if needs_frames:
        idx = np.nonzero(alive)[0]
        fr, ft = link_frames(model, bases[idx], arms[idx])
        sub_alive = np.ones(len(idx), dtype=bool)

        if scene.obstacles:
            killed = np.zeros(len(idx), dtype=bool)
            for lv in model.link_volumes:
                for obs in scene.obstacles:
                    live = sub_alive & ~killed
                    if not np.any(live):
                        break
                    rows = np.nonzero(live)[0]
                    hit = geometry.batch_volume_intersects(
                        lv.volume, fr[rows, lv.link], ft[rows, lv.link], obs
                    )
                    killed[rows] |= hit
            counts["collision"] = int(np.sum(killed))
            sub_alive &= ~killed

        pairs = _self_collision_pairs(model)
        if pairs and np.any(sub_alive):
            killed = np.zeros(len(idx), dtype=bool)
            for i, j in pairs:
                live = sub_alive & ~killed
                if not np.any(live):
                    break
                rows = np.nonzero(live)[0]
                vi, vj = model.link_volumes[i], model.link_volumes[j]
                hit = geometry.batch_pair_intersects(
                    vi.volume, fr[rows, vi.link], ft[rows, vi.link],
                    vj.volume, fr[rows, vj.link], ft[rows, vj.link],
                )
                killed[rows] |= hit
            counts["self_collision"] = int(np.sum(killed))
            sub_alive &= ~killed

        if is_final and np.any(sub_alive):
            ray = geometry.sun_ray(scene)
            killed = np.zeros(len(idx), dtype=bool)
            for lv in model.link_volumes:
                live = sub_alive & ~killed
                if not np.any(live):
                    break
                rows = np.nonzero(live)[0]
                hit = geometry.batch_ray_intersects(
                    ray, lv.volume, fr[rows, lv.link], ft[rows, lv.link]
                )
                killed[rows] |= hit
            counts["overshadow"] = int(np.sum(killed))
            sub_alive &= ~killed

        alive[idx] = sub_alive
    return alive, counts


def check_positional(
    model: RobotModel, scene: Scene, q: JointConfig, is_final: bool = False,
    where: float = 0.0,
) -> ConstraintReport:
    """Full positional report for one configuration (all constraints
    evaluated, not short-circuited)."""
    violations = []
    lo, hi = model.arm_pos_min, model.arm_pos_max
    for i, (a, l, u) in enumerate(zip(q.arm, lo, hi)):
        if a < l - 1e-9 or a > u + 1e-9:
            violations.append(
                Violation(f"arm_bounds[{i}]", where, float(max(l - a, a - u)))
            )
    if scene.forbidden_areas and geometry.point_in_forbidden(
        (q.x, q.y), scene.forbidden_areas
    ):
        violations.append(Violation("forbidden_area", where, 1.0))

    fr, ft = link_frames(model, q.base[None], q.arm[None])
    posed = [
        lv.volume.transformed(_frame_transform(fr[0, lv.link], ft[0, lv.link]))
        for lv in model.link_volumes
    ]
    for k, vol in enumerate(posed):
        for obs in scene.obstacles:
            if geometry.volumes_intersect(vol, obs):
                violations.append(Violation(f"collision[{k}]", where, 1.0))
                break
    for i, j in _self_collision_pairs(model):
        if geometry.volumes_intersect(posed[i], posed[j]):
            violations.append(Violation(f"self_collision[{i},{j}]", where, 1.0))
    if is_final:
        ray = geometry.sun_ray(scene)
        for k, vol in enumerate(posed):
            if geometry.ray_intersects_volume(ray, vol):
                violations.append(Violation(f"overshadow[{k}]", where, 1.0))
    return ConstraintReport(tuple(violations))


def _frame_transform(r, t):
    from .transforms import Transform, quat_from_matrix

    return Transform(quat_from_matrix(r), t)


def check_differential(
    model: RobotModel,
    q_prev: JointConfig,
    q: JointConfig,
    q_prev2: JointConfig | None,
    dt: float,
    where: float = 0.0,
) -> ConstraintReport:
    """Backward-difference velocity limits, plus acceleration limits when a
    second predecessor is available."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    violations = []
    arm_v = (q.arm - q_prev.arm) / dt
    for i, (v, vmax) in enumerate(zip(arm_v, model.arm_vel_max)):
        if abs(v) > vmax + 1e-9:
            violations.append(Violation(f"arm_velocity[{i}]", where, float(abs(v) - vmax)))
    speed = float(np.hypot(q.x - q_prev.x, q.y - q_prev.y)) / dt
    if speed > model.base_limits.v_max + 1e-9:
        violations.append(Violation("base_speed", where, speed - model.base_limits.v_max))
    spin = abs(float(angle_diff(q.h, q_prev.h))) / dt
    if spin > model.base_limits.omega_max + 1e-9:
        violations.append(Violation("base_spin", where, spin - model.base_limits.omega_max))
    if q_prev2 is not None:
        arm_a = (q.arm - 2.0 * q_prev.arm + q_prev2.arm) / dt**2
        for i, (a, amax) in enumerate(zip(arm_a, model.arm_acc_max)):
            if abs(a) > amax + 1e-9:
                violations.append(
                    Violation(f"arm_acceleration[{i}]", where, float(abs(a) - amax))
                )
    return ConstraintReport(tuple(violations))


def rolling_times(q_prev: JointConfig, q: JointConfig, model: RobotModel):
    """(rotation time, translation time) of the composite maneuver joining
    two configurations at the base limits."""
    dx = q.x - q_prev.x
    dy = q.y - q_prev.y
    dist = float(np.hypot(dx, dy))
    omega = model.base_limits.omega_max
    if dist <= _TRANSLATION_EPS:
        return abs(float(angle_diff(q.h, q_prev.h))) / omega, 0.0
    theta = float(np.arctan2(dy, dx))
    rot = abs(float(angle_diff(theta, q_prev.h))) + abs(float(angle_diff(q.h, theta)))
    return rot / omega, dist / model.base_limits.v_max


def check_rolling(
    q_prev: JointConfig,
    q: JointConfig,
    dt: float,
    model: RobotModel,
    tol: float,
    where: float = 0.0,
) -> ConstraintReport:
    """Pure-rolling admissibility of one base step.

    Zero translation is a turn-in-place; otherwise the final heading must
    align with the motion direction within tol and the rotate-translate-
    rotate maneuver must fit in dt at the base limits.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    violations = []
    dx = q.x - q_prev.x
    dy = q.y - q_prev.y
    dist = float(np.hypot(dx, dy))
    if dist > _TRANSLATION_EPS:
        theta = float(np.arctan2(dy, dx))
        mis = abs(float(angle_diff(q.h, theta)))
        if mis > tol + 1e-12:
            violations.append(Violation("heading_misaligned", where, mis - tol))
    t_rot, t_trans = rolling_times(q_prev, q, model)
    if t_rot + t_trans > dt + 1e-9:
        violations.append(Violation("timing", where, t_rot + t_trans - dt))
    return ConstraintReport(tuple(violations))


def in_B(
    model: RobotModel,
    scene: Scene,
    q: JointConfig,
    q_prev: JointConfig | None = None,
    q_prev2: JointConfig | None = None,
    dt: float = 1.0,
    is_final: bool = False,
    rolling_tol: float = 0.1,
) -> bool:
    """Membership in the reachable set: positional admissibility plus, when a
    predecessor is given, the differential and rolling constraints."""
    report = check_positional(model, scene, q, is_final)
    if q_prev is not None:
        report = report.merged(check_differential(model, q_prev, q, q_prev2, dt))
        report = report.merged(check_rolling(q_prev, q, dt, model, rolling_tol))
    return report.feasible


# --------------------------------------------------------------------------
# whole-trajectory verification
# --------------------------------------------------------------------------

def _check_discrete_trajectory(model, scene, samples, rolling_tol):
    violations = []
    n = len(samples)
    for i, (t_i, q_i) in enumerate(samples):
        rep = check_positional(model, scene, q_i, is_final=(i == n - 1), where=t_i)
        violations.extend(rep.violations)
        if i >= 1:
            t_prev, q_prev = samples[i - 1]
            q_prev2 = samples[i - 2][1] if i >= 2 else None
            dt = t_i - t_prev
            rep = check_differential(model, q_prev, q_i, q_prev2, dt, where=t_i)
            violations.extend(rep.violations)
            rep = check_rolling(q_prev, q_i, dt, model, rolling_tol, where=t_i)
            violations.extend(rep.violations)
    return ConstraintReport(tuple(violations))


def check_trajectory(
    model: RobotModel,
    scene: Scene,
    traj: JointTrajectory,
    samples_per_interval: int = 8,
    rolling_tol: float = 1e-6,
    tol: float = 1e-6,
) -> ConstraintReport:
    """Verify a trajectory against every constraint.

    Spline-backed trajectories are sampled densely with analytic derivatives
    (the shadow rule only at the final time); discrete ones are checked
    waypoint by waypoint with difference quotients.
    """
    if samples_per_interval < 1:
        raise ValueError("samples_per_interval must be >= 1")
    if not traj.is_spline:
        return _check_discrete_trajectory(model, scene, traj.samples, rolling_tol)

    from .smoothing import eval_trajectory_arrays

    knot_times = traj.base_profile.knot_times
    ts = [
        np.linspace(a, b, samples_per_interval + 1)[:-1]
        for a, b in zip(knot_times[:-1], knot_times[1:])
    ]
    times = np.concatenate(ts + [np.array([knot_times[-1]])])
    q, q_dot, q_ddot = eval_trajectory_arrays(traj, times)

    violations = []
    lo, hi = model.arm_pos_min, model.arm_pos_max
    arm = q[:, 3:]
    arm_v = q_dot[:, 3:]
    arm_a = q_ddot[:, 3:]
    for i in range(model.n_arm):
        for k in np.nonzero((arm[:, i] < lo[i] - tol) | (arm[:, i] > hi[i] + tol))[0]:
            mag = float(max(lo[i] - arm[k, i], arm[k, i] - hi[i]))
            violations.append(Violation(f"arm_bounds[{i}]", float(times[k]), mag))
        for k in np.nonzero(np.abs(arm_v[:, i]) > model.arm_vel_max[i] + tol)[0]:
            violations.append(
                Violation(
                    f"arm_velocity[{i}]", float(times[k]),
                    float(abs(arm_v[k, i]) - model.arm_vel_max[i]),
                )
            )
        for k in np.nonzero(np.abs(arm_a[:, i]) > model.arm_acc_max[i] + tol)[0]:
            violations.append(
                Violation(
                    f"arm_acceleration[{i}]", float(times[k]),
                    float(abs(arm_a[k, i]) - model.arm_acc_max[i]),
                )
            )
    speed = np.hypot(q_dot[:, 0], q_dot[:, 1])
    for k in np.nonzero(speed > model.base_limits.v_max + tol)[0]:
        violations.append(
            Violation("base_speed", float(times[k]), float(speed[k] - model.base_limits.v_max))
        )
    spin = np.abs(q_dot[:, 2])
    for k in np.nonzero(spin > model.base_limits.omega_max + tol)[0]:
        violations.append(
            Violation(
                "base_spin", float(times[k]), float(spin[k] - model.base_limits.omega_max)
            )
        )
    moving = speed > _TRANSLATION_EPS
    theta = np.arctan2(q_dot[:, 1], q_dot[:, 0])
    mis = np.abs(angle_diff(q[:, 2], theta))
    for k in np.nonzero(moving & (mis > rolling_tol + tol))[0]:
        violations.append(Violation("heading_misaligned", float(times[k]), float(mis[k])))

    if scene.forbidden_areas:
        hit = geometry.points_in_forbidden(q[:, :2], scene.forbidden_areas)
        for k in np.nonzero(hit)[0]:
            violations.append(Violation("forbidden_area", float(times[k]), 1.0))

    if scene.obstacles or _self_collision_pairs(model):
        fr, ft = link_frames(model, q[:, :3], q[:, 3:])
        for lv_i, lv in enumerate(model.link_volumes):
            for obs in scene.obstacles:
                hit = geometry.batch_volume_intersects(
                    lv.volume, fr[:, lv.link], ft[:, lv.link], obs
                )
                for k in np.nonzero(hit)[0]:
                    violations.append(
                        Violation(f"collision[{lv_i}]", float(times[k]), 1.0)
                    )
        for i, j in _self_collision_pairs(model):
            vi, vj = model.link_volumes[i], model.link_volumes[j]
            hit = geometry.batch_pair_intersects(
                vi.volume, fr[:, vi.link], ft[:, vi.link],
                vj.volume, fr[:, vj.link], ft[:, vj.link],
            )
            for k in np.nonzero(hit)[0]:
                violations.append(
                    Violation(f"self_collision[{i},{j}]", float(times[k]), 1.0)
                )

    q_final = JointConfig(q[-1, 0], q[-1, 1], q[-1, 2], q[-1, 3:])
    final_rep = check_positional(
        model, scene, q_final, is_final=True, where=float(times[-1])
    )
    violations.extend(
        v for v in final_rep.violations if v.constraint_id.startswith("overshadow")
    )
    return ConstraintReport(tuple(violations))
