"""Smoothing stage: turns the discrete grid solution into a smooth
trajectory by optimizing the base-knot values under the task, limit,
rolling, and collision constraints.

The arm follows clamped cubic B-splines through its knot values (rest to
rest); the base follows straight segments joined by turn-in-place rotations,
with rotations run at the angular-rate limit and the translation filling the
remaining interval time.  The decision variables are the base knots; the arm
knot values track them through inverse kinematics, so the task pose stays
met at every waypoint time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline, make_interp_spline

from . import geometry
from .constraints import check_trajectory, rolling_times
from .errors import SmoothingError
from .kinematics import (
    augmented_ik,
    base_rotations,
    link_frames,
    solve_arm_ik,
)
from .model import (
    CostBreakdown,
    JointConfig,
    JointTrajectory,
    PlannerConfig,
    RobotModel,
    Scene,
    TaskTrajectory,
)
from .objective import quadrature_samples, tv_cost_batch
from .transforms import angle_diff, quat_to_matrix

_TRANSLATION_EPS = 1e-9


# --------------------------------------------------------------------------
# spline and base-profile representations
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SplineCurve:
    """Clamped cubic B-spline bundle, one column per arm joint."""

    knots: np.ndarray
    coefficients: np.ndarray  # (n_coef, n_joints)

    def __post_init__(self):
        object.__setattr__(self, "knots", np.asarray(self.knots, dtype=float))
        object.__setattr__(
            self, "coefficients", np.atleast_2d(np.asarray(self.coefficients, dtype=float))
        )

    @property
    def degree(self) -> int:
        return 3

    @property
    def t0(self) -> float:
        return float(self.knots[0])

    @property
    def t1(self) -> float:
        return float(self.knots[-1])

    def _basis(self, order):
        spl = BSpline(self.knots, self.coefficients, 3, extrapolate=False)
        return spl if order == 0 else spl.derivative(order)

    def eval(self, times, order=0):
        times = np.clip(np.asarray(times, dtype=float), self.t0, self.t1)
        return self._basis(order)(times)


def fit_clamped_cubic(times, values) -> SplineCurve:
    """Interpolating clamped cubic with zero end velocities."""
    times = np.asarray(times, dtype=float)
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] != len(times):
        values = values.T
    if len(times) == 2:
        # one cubic Bezier panel; repeated control values pin the end slopes
        t0, t1 = times
        knots = np.array([t0, t0, t0, t0, t1, t1, t1, t1])
        coef = np.vstack([values[0], values[0], values[1], values[1]])
        return SplineCurve(knots, coef)
    zero = np.zeros(values.shape[1])
    spl = make_interp_spline(times, values, k=3, bc_type=([(1, zero)], [(1, zero)]))
    return SplineCurve(spl.t, spl.c)


@dataclass(frozen=True)
class BaseProfile:
    """Piecewise-linear base path with turn-in-place joints.

    Segments are constant-rate pieces (t0, t1, x0, y0, vx, vy, h0, hdot)
    covering [0, t_f]; headings during translation equal the segment
    direction by construction.  `timing_excess` holds, per knot interval,
    how many seconds the limit-rate maneuver overruns the interval (0 when
    feasible; positive means the profile runs above the base limits).
    """

    knot_times: np.ndarray
    knot_xy: np.ndarray
    knot_h: np.ndarray
    seg_bounds: np.ndarray  # (S, 2) start/end times
    seg_xy0: np.ndarray  # (S, 2)
    seg_vel: np.ndarray  # (S, 2)
    seg_h0: np.ndarray  # (S,)
    seg_hdot: np.ndarray  # (S,)
    timing_excess: np.ndarray  # (N,)
    timing_total: np.ndarray  # (N,) limit-rate maneuver time per interval

    @property
    def duration(self) -> float:
        return float(self.knot_times[-1])

    def rate_energy_by_interval(self):
        """Exact integral of the base rate norm (vx^2 + vy^2 + hdot^2) over
        each knot interval; rates are piecewise constant, so the integral is
        a finite sum and smooth in the knot values (a sampled version would
        jump whenever a short rotation phase crosses a sample)."""
        energy = (self.seg_vel**2).sum(axis=1) + self.seg_hdot**2
        dur = self.seg_bounds[:, 1] - self.seg_bounds[:, 0]
        idx = np.searchsorted(self.knot_times, self.seg_bounds[:, 0], side="right") - 1
        idx = np.clip(idx, 0, len(self.knot_times) - 2)
        out = np.zeros(len(self.knot_times) - 1)
        np.add.at(out, idx, energy * dur)
        return out

    def eval(self, times):
        """Base pose, velocity, acceleration at `times` (right-continuous at
        segment joints; acceleration is zero within segments)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        idx = np.searchsorted(self.seg_bounds[:, 0], times, side="right") - 1
        idx = np.clip(idx, 0, len(self.seg_bounds) - 1)
        tau = times - self.seg_bounds[idx, 0]
        xy = self.seg_xy0[idx] + self.seg_vel[idx] * tau[:, None]
        h = self.seg_h0[idx] + self.seg_hdot[idx] * tau
        pos = np.column_stack([xy, h])
        vel = np.column_stack([self.seg_vel[idx], self.seg_hdot[idx]])
        acc = np.zeros_like(vel)
        return pos, vel, acc


def _allocate_phase_times(amounts, minima, dt):
    """Durations minimizing the summed rate energy (amount^2 / duration)
    over the interval: time proportional to each phase's displacement,
    water-filled against the minimum-time (rate-limit) floors."""
    amounts = np.asarray(amounts, dtype=float)
    times = np.array(minima, dtype=float)
    free = amounts > 0
    for _ in range(len(amounts)):
        remaining = dt - times[~free].sum()
        total = amounts[free].sum()
        if total <= 0 or remaining <= 0:
            break
        cand = amounts * (remaining / total)
        low = free & (cand < times - 1e-15)
        if not np.any(low):
            times[free] = cand[free]
            break
        free &= ~low
    return times


def build_base_profile(
    model: RobotModel, knot_times, knot_xy, knot_h, strict=True
) -> BaseProfile:
    """Rotate toward the segment direction, translate, rotate to the end
    heading; phase durations split the interval in proportion to each
    phase's displacement (the constant-rate energy optimum), floored at the
    rate-limit minimum times.

    When even the limit-rate maneuver does not fit the interval, strict
    mode raises; relaxed mode compresses all phases proportionally (rates
    exceed the limits and the overrun is recorded in `timing_excess`).
    """
    knot_times = np.asarray(knot_times, dtype=float)
    knot_xy = np.asarray(knot_xy, dtype=float)
    knot_h = np.asarray(knot_h, dtype=float)
    omega = model.base_limits.omega_max
    v_max = model.base_limits.v_max
    n = len(knot_times) - 1
    bounds, xy0, vel, h0s, hdots = [], [], [], [], []
    excess = np.zeros(n)
    totals = np.zeros(n)

    def add(t0, t1, p0, v, h0, hdot):
        if t1 - t0 <= 0:
            return
        bounds.append((t0, t1))
        xy0.append(p0)
        vel.append(v)
        h0s.append(h0)
        hdots.append(hdot)

    for i in range(n):
        t0, t1 = knot_times[i], knot_times[i + 1]
        dt = t1 - t0
        p0, p1 = knot_xy[i], knot_xy[i + 1]
        h_a, h_b = knot_h[i], knot_h[i + 1]
        delta = p1 - p0
        dist = float(np.hypot(*delta))
        if dist <= _TRANSLATION_EPS:
            rot = float(angle_diff(h_b, h_a))
            t_rot = abs(rot) / omega
            totals[i] = t_rot
            if t_rot > dt + 1e-12:
                if strict:
                    raise SmoothingError(
                        f"base timing infeasible on segment {i}: "
                        f"turn needs {t_rot:.3f} s > {dt:.3f} s"
                    )
                excess[i] = t_rot - dt
            # spread the turn over the whole interval (lowest rate energy)
            add(t0, t1, p0, np.zeros(2), h_a, rot / dt)
            continue

        theta = float(np.arctan2(delta[1], delta[0]))
        rot1 = float(angle_diff(theta, h_a))
        rot2 = float(angle_diff(h_b, theta))
        minima = [abs(rot1) / omega, dist / v_max, abs(rot2) / omega]
        total = sum(minima)
        totals[i] = total
        if total > dt + 1e-12:
            if strict:
                raise SmoothingError(
                    f"base timing infeasible on segment {i}: maneuver needs "
                    f"{total:.3f} s > {dt:.3f} s"
                )
            excess[i] = total - dt
            scale = dt / total
            d1, db, d2 = (m * scale for m in minima)
        else:
            d1, db, d2 = _allocate_phase_times(
                [abs(rot1), dist, abs(rot2)], minima, dt
            )
        ta = t0 + d1
        tb = ta + db
        if d1 > 0:
            add(t0, ta, p0, np.zeros(2), h_a, rot1 / d1)
        add(ta, tb, p0, delta / db, theta, 0.0)
        if d2 > 0:
            add(tb, t1, p1, np.zeros(2), theta, rot2 / d2)

    if not bounds:  # single-knot degenerate domain
        add(knot_times[0], knot_times[0] + 1e-12, knot_xy[0], np.zeros(2), knot_h[0], 0.0)
    return BaseProfile(
        knot_times, knot_xy, knot_h,
        np.asarray(bounds, dtype=float), np.asarray(xy0, dtype=float),
        np.asarray(vel, dtype=float), np.asarray(h0s, dtype=float),
        np.asarray(hdots, dtype=float), excess, totals,
    )


# --------------------------------------------------------------------------
# trajectory evaluation
# --------------------------------------------------------------------------

def eval_trajectory_arrays(traj: JointTrajectory, times):
    """Whole-body samples of a spline-backed trajectory: (q, q_dot, q_ddot)
    with rows [x, y, h, arm...]."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    base, base_v, base_a = traj.base_profile.eval(times)
    arm = traj.arm_spline.eval(times)
    arm_v = traj.arm_spline.eval(times, order=1)
    arm_a = traj.arm_spline.eval(times, order=2)
    q = np.column_stack([base, arm])
    qd = np.column_stack([base_v, arm_v])
    qdd = np.column_stack([base_a, arm_a])
    return q, qd, qdd


def eval_trajectory(traj: JointTrajectory, t: float):
    """Configuration and derivatives at one time (one-sided at segment
    joints).  Raises outside the trajectory domain."""
    if not traj.is_spline:
        raise ValueError("eval_trajectory needs a spline-backed trajectory")
    t_f = traj.duration
    if not 0.0 <= t <= t_f:
        raise ValueError(f"t = {t} outside [0, {t_f}]")
    q, qd, qdd = eval_trajectory_arrays(traj, [t])
    cfg = JointConfig(q[0, 0], q[0, 1], q[0, 2], q[0, 3:])
    return cfg, qd[0], qdd[0]


# --------------------------------------------------------------------------
# seed interpolation
# --------------------------------------------------------------------------

def _nearest_branch(solutions, reference):
    arms = solutions.arm_array()
    if reference is None:
        return solutions.solutions[0]
    k = int(np.argmin(np.linalg.norm(arms - reference, axis=1)))
    return solutions.solutions[k]


def interpolate_seed(
    model: RobotModel,
    task: TaskTrajectory,
    nu_knots,
    config: PlannerConfig,
    reference_arm=None,
) -> JointTrajectory:
    """Spline-backed trajectory through the IK solutions at the given base
    knots (one per waypoint).

    At each knot the IK branch nearest to `reference_arm` (falling back to
    the previous knot's choice) is selected.  Raises when a knot has no IK
    solution or a base segment cannot be timed within the limits.
    """
    nu_knots = np.asarray(nu_knots, dtype=float).reshape(len(task.waypoints), 3)
    times = np.array([wp.t for wp in task.waypoints])
    arms = []
    prev = None
    for i, wp in enumerate(task.waypoints):
        sols = augmented_ik(model, wp.pose, wp.fixed_joints, nu_knots[i], config.ik)
        if len(sols) == 0:
            raise SmoothingError(f"no IK solution at waypoint {i} for the given base knot")
        ref = None
        if reference_arm is not None:
            ref = np.asarray(reference_arm[i], dtype=float)
        elif prev is not None:
            ref = prev
        chosen = _nearest_branch(sols, ref)
        arms.append(chosen.config.arm)
        prev = chosen.config.arm
    arm_spline = fit_clamped_cubic(times, np.asarray(arms))
    profile = build_base_profile(
        model, times, nu_knots[:, :2], nu_knots[:, 2], strict=True
    )
    return JointTrajectory.from_spline(arm_spline, profile)


# --------------------------------------------------------------------------
# penalty evaluator
# --------------------------------------------------------------------------

_ARM_WINDOW = 5  # knot intervals re-scored around a perturbed knot
_CONTACT_WINDOW = 2  # narrower window for collision/containment terms


@dataclass
class _EvalState:
    nu: np.ndarray  # (K, 3)
    arm: np.ndarray  # (K, n_arm)
    tv: np.ndarray  # (N,) per-interval integrals
    snv: np.ndarray
    pen_lim: np.ndarray  # (N,) squared shortfalls: limits, timing, task residual
    pen_con: np.ndarray  # (N,) squared shortfalls: collision, forbidden, shadow
    worst_lim: np.ndarray
    worst_con: np.ndarray
    ik_short: np.ndarray = None  # (K,) per-knot residual shortfall
    seed_arm: np.ndarray = None  # (K, n_arm) warm start the state was solved from
    spline: SplineCurve = None
    profile: BaseProfile = None

    def objective(self, sigma, mu):
        cost = sigma * self.tv.sum() + (1 - sigma) * self.snv.sum()
        return cost + mu * (self.pen_lim.sum() + self.pen_con.sum())

    def cost_breakdown(self, sigma):
        tv, snv = self.tv.sum(), self.snv.sum()
        return CostBreakdown(sigma * tv + (1 - sigma) * snv, tv, snv)

    @property
    def max_short(self):
        return max(float(self.worst_lim.max()), float(self.worst_con.max()))


class _PenaltyEvaluator:
    """Objective + squared-shortfall penalties over the base-knot variables.

    Arm knot values are tracked by warm-started IK (branch continuity);
    per-interval integrals are cached so single-knot perturbations only
    re-score a window of intervals, with the contact (collision/containment)
    terms re-scored over an even narrower window since their dependence on
    remote knots decays with the spline basis.
    """

    def __init__(self, model, scene, task, config, margin=0.01, limit_margin=2e-3):
        from dataclasses import replace

        self.model = model
        self.scene = scene
        self.task = task
        self.config = config
        # warm-started solves must actually converge or the objective picks
        # up history dependence; give them a generous iteration budget
        self.ik_cfg = replace(config.ik, max_iterations=max(120, config.ik.max_iterations))
        self.sigma = config.sigma
        self.times = np.array([wp.t for wp in task.waypoints])
        # the clearance margin must cover the widest excursion the base can
        # make between two penalty samples, or the verifier's finer sampling
        # can catch dips the optimizer never saw
        sample_dt = float(np.diff(self.times).max()) / max(
            2, config.smoothing.samples_per_interval
        )
        self.margin = max(margin, 0.51 * model.base_limits.v_max * sample_dt)
        self.limit_margin = limit_margin  # interior margin on rate/bound limits
        self.n_int = len(self.times) - 1
        self.fixed = [(f.index, f.value) for f in task.waypoints[0].fixed_joints]
        self.free_idx = [
            i for i in range(model.n_arm) if i not in [f[0] for f in self.fixed]
        ]
        # per-knot task pose matrices
        self.pose_r = np.array([quat_to_matrix(wp.pose.rotation) for wp in task.waypoints])
        self.pose_t = np.array([wp.position for wp in task.waypoints])
        qt, qw = quadrature_samples(self.times, config.smoothing.samples_per_interval)
        self.quad_t = qt
        self.quad_w = qw
        self._pairs = self._collision_pairs()

    def _collision_pairs(self):
        from .constraints import _self_collision_pairs

        return _self_collision_pairs(self.model)

    def solve_rows(self, nus, knot_rows, seed_arm):
        """Warm-started IK at arbitrary (base config, waypoint) rows;
        returns (arm values, residual shortfall) per row."""
        knot_rows = np.asarray(knot_rows)
        rb = base_rotations(nus[:, 2])
        tb = np.concatenate([nus[:, :2], np.zeros((len(nus), 1))], axis=1)
        root_r = rb @ self.model.arm_mount.rotation_matrix
        root_t = tb + np.einsum("bij,j->bi", rb, self.model.arm_mount.translation)
        r_tgt = np.einsum("bji,bjk->bik", root_r, self.pose_r[knot_rows])
        t_tgt = np.einsum("bji,bj->bi", root_r, self.pose_t[knot_rows] - root_t)
        q, pos_res, ori_res, _ = solve_arm_ik(
            self.model, r_tgt, t_tgt, self.fixed, seed_arm[:, self.free_idx],
            self.ik_cfg,
        )
        tol = self.config.ik.accept_tol
        short = np.maximum(pos_res - tol, 0.0) + np.maximum(ori_res - tol, 0.0)
        return q, short

    def solve_knots(self, nu, arm_init, rows=None):
        """IK at the requested knots (default all), warm-started from
        arm_init; returns (arm values, per-knot residual shortfall)."""
        k = len(self.times)
        rows = np.arange(k) if rows is None else np.asarray(rows)
        return self.solve_rows(nu[rows], rows, arm_init[rows])

    def _smooth_scores(self, spline, profile, intervals, ik_short):
        """tv/snv integrals plus limit/timing/residual shortfalls."""
        model = self.model
        tvs = np.zeros(len(intervals))
        snvs = np.zeros(len(intervals))
        pens = np.zeros(len(intervals))
        worst = np.zeros(len(intervals))
        all_t = np.concatenate([self.quad_t[k] for k in intervals])
        base, _, _ = profile.eval(all_t)
        arm = spline.eval(all_t)
        arm_v = spline.eval(all_t, order=1)
        arm_a = spline.eval(all_t, order=2)
        tv = tv_cost_batch(model, base, self.scene.target_position)
        # arm rate norm is sampled (smooth integrand); the piecewise-constant
        # base rates integrate exactly per interval
        snv = np.einsum("bi,bi->b", arm_v, arm_v)
        base_energy = profile.rate_energy_by_interval()

        # limits shrunk by a small interior margin so the relaxed optimum
        # verifies strictly
        eps = self.limit_margin
        short = np.zeros(len(all_t))
        lo, hi = model.arm_pos_min, model.arm_pos_max
        short += np.maximum((lo + eps) - arm, 0.0).sum(axis=1)
        short += np.maximum(arm - (hi - eps), 0.0).sum(axis=1)
        short += np.maximum(np.abs(arm_v) - (model.arm_vel_max - eps), 0.0).sum(axis=1)
        short += np.maximum(np.abs(arm_a) - (model.arm_acc_max - eps), 0.0).sum(axis=1)

        pos = 0
        dt_int = np.diff(self.times)
        for row, k in enumerate(intervals):
            n = len(self.quad_t[k])
            w = self.quad_w[k]
            sl = slice(pos, pos + n)
            tvs[row] = w @ tv[sl]
            snvs[row] = w @ snv[sl] + base_energy[k]
            s = short[sl]
            pens[row] = float(s @ s)
            worst[row] = float(s.max()) if n else 0.0
            pos += n
            te = max(0.0, float(profile.timing_total[k] - dt_int[k] + eps))
            pens[row] += te * te
            worst[row] = max(worst[row], te)
            r = ik_short[k + 1] + (ik_short[0] if k == 0 else 0.0)
            pens[row] += r * r
            worst[row] = max(worst[row], r)
        return tvs, snvs, pens, worst

    def _contact_scores(self, spline, profile, intervals):
        """Collision, self-collision, containment, and shadow shortfalls."""
        model = self.model
        pens = np.zeros(len(intervals))
        worst = np.zeros(len(intervals))
        has_contact = bool(self.scene.obstacles or self._pairs or self.scene.forbidden_areas)
        include_shadow = intervals and intervals[-1] == self.n_int - 1
        if not has_contact and not include_shadow:
            return pens, worst
        all_t = np.concatenate([self.quad_t[k] for k in intervals])
        base, _, _ = profile.eval(all_t)
        arm = spline.eval(all_t)
        short = np.zeros(len(all_t))
        if self.scene.obstacles or self._pairs or include_shadow:
            fr, ft = link_frames(model, base, arm)
            # capsule-vs-box pairs stack into a single ternary solve; other
            # combinations take the per-pair clearance path
            stack_a, stack_b, stack_he, stack_r = [], [], [], []
            for lv in model.link_volumes:
                for obs in self.scene.obstacles:
                    if isinstance(lv.volume, geometry.Capsule) and isinstance(
                        obs, geometry.Box
                    ):
                        p0, p1 = geometry._pose_arrays(
                            lv.volume, fr[:, lv.link], ft[:, lv.link]
                        )
                        inv_r = obs.pose.rotation_matrix.T
                        stack_a.append((p0 - obs.pose.translation) @ inv_r.T)
                        stack_b.append((p1 - obs.pose.translation) @ inv_r.T)
                        stack_he.append(
                            np.broadcast_to(obs.half_extents, p0.shape)
                        )
                        stack_r.append(np.full(len(p0), lv.volume.radius))
                    else:
                        d = geometry.batch_volume_clearance(
                            lv.volume, fr[:, lv.link], ft[:, lv.link], obs
                        )
                        short += np.maximum(self.margin - d, 0.0)
            if stack_a:
                d = geometry.segment_aabb_distance_batch(
                    np.concatenate(stack_a),
                    np.concatenate(stack_b),
                    np.concatenate(stack_he),
                ) - np.concatenate(stack_r)
                short += (
                    np.maximum(self.margin - d, 0.0)
                    .reshape(len(stack_a), len(all_t))
                    .sum(axis=0)
                )
            cc_p, cc_q, cc_r = [], [], []
            for i, j in self._pairs:
                vi, vj = model.link_volumes[i], model.link_volumes[j]
                if isinstance(vi.volume, geometry.Capsule) and isinstance(
                    vj.volume, geometry.Capsule
                ):
                    p0, p1 = geometry._pose_arrays(
                        vi.volume, fr[:, vi.link], ft[:, vi.link]
                    )
                    q0, q1 = geometry._pose_arrays(
                        vj.volume, fr[:, vj.link], ft[:, vj.link]
                    )
                    cc_p.append((p0, p1))
                    cc_q.append((q0, q1))
                    cc_r.append(vi.volume.radius + vj.volume.radius)
                else:
                    d = geometry.batch_pair_clearance(
                        vi.volume, fr[:, vi.link], ft[:, vi.link],
                        vj.volume, fr[:, vj.link], ft[:, vj.link],
                    )
                    short += np.maximum(self.margin - d, 0.0)
            if cc_p:
                d = geometry.segment_segment_distance_batch(
                    np.concatenate([p[0] for p in cc_p]),
                    np.concatenate([p[1] for p in cc_p]),
                    np.concatenate([q[0] for q in cc_q]),
                    np.concatenate([q[1] for q in cc_q]),
                ) - np.repeat(cc_r, len(all_t))
                short += (
                    np.maximum(self.margin - d, 0.0)
                    .reshape(len(cc_p), len(all_t))
                    .sum(axis=0)
                )
            if include_shadow:
                ray = geometry.sun_ray(self.scene)
                row = len(all_t) - 1
                for lv in model.link_volumes:
                    d = geometry.batch_ray_clearance(
                        ray, lv.volume, fr[row : row + 1, lv.link],
                        ft[row : row + 1, lv.link],
                    )
                    short[row] += np.maximum(self.margin - d, 0.0)[0]
        for area in self.scene.forbidden_areas:
            if isinstance(area, geometry.Polygon):
                sd = geometry.polygon_signed_distance(base[:, :2], area)
                short += np.maximum(self.margin - sd, 0.0)
            else:
                inside = geometry.points_in_grid(base[:, :2], area)
                short += np.where(inside, self.margin, 0.0)
        pos = 0
        for row, k in enumerate(intervals):
            n = len(self.quad_t[k])
            s = short[pos : pos + n]
            pens[row] = float(s @ s)
            worst[row] = float(s.max()) if n else 0.0
            pos += n
        return pens, worst

    def evaluate(self, nu, arm_init) -> _EvalState:
        nu = nu.reshape(-1, 3)
        arm_init = np.asarray(arm_init, dtype=float)
        arm, ik_short = self.solve_knots(nu, arm_init)
        spline = fit_clamped_cubic(self.times, arm)
        profile = build_base_profile(
            self.model, self.times, nu[:, :2], nu[:, 2], strict=False
        )
        intervals = list(range(self.n_int))
        tv, snv, pen_lim, worst_lim = self._smooth_scores(
            spline, profile, intervals, ik_short
        )
        pen_con, worst_con = self._contact_scores(spline, profile, intervals)
        return _EvalState(
            nu.copy(), arm, tv, snv, pen_lim, pen_con, worst_lim, worst_con,
            ik_short, arm_init.copy(), spline, profile,
        )

    def _scored_shift(self, base, knots, nu, arm, short_k) -> _EvalState:
        """Windowed re-score after knot rows were re-solved externally."""
        spline = fit_clamped_cubic(self.times, arm)
        profile = build_base_profile(
            self.model, self.times, nu[:, :2], nu[:, 2], strict=False
        )
        lo = max(0, min(knots) - _ARM_WINDOW)
        hi = min(self.n_int, max(knots) + _ARM_WINDOW)
        c_lo = max(0, min(knots) - _CONTACT_WINDOW)
        c_hi = min(self.n_int, max(knots) + _CONTACT_WINDOW)
        full_short = base.ik_short.copy()
        full_short[knots] = short_k
        tv, snv, pen_lim, worst_lim = self._smooth_scores(
            spline, profile, list(range(lo, hi)), full_short
        )
        pen_con, worst_con = self._contact_scores(
            spline, profile, list(range(c_lo, c_hi))
        )
        out = _EvalState(
            nu, arm, base.tv.copy(), base.snv.copy(), base.pen_lim.copy(),
            base.pen_con.copy(), base.worst_lim.copy(), base.worst_con.copy(),
            full_short, base.seed_arm, spline, profile,
        )
        out.tv[lo:hi] = tv
        out.snv[lo:hi] = snv
        out.pen_lim[lo:hi] = pen_lim
        out.worst_lim[lo:hi] = worst_lim
        out.pen_con[c_lo:c_hi] = pen_con
        out.worst_con[c_lo:c_hi] = worst_con
        return out

    def evaluate_knots_shift(self, base: _EvalState, knots, delta) -> _EvalState:
        """Re-evaluate after shifting a set of knots' base values by the same
        delta, re-scoring only the window of intervals the shift can reach."""
        knots = list(knots)
        nu = base.nu.copy()
        nu[knots] = nu[knots] + np.asarray(delta, float)
        arm = base.arm.copy()
        new_arm, short_k = self.solve_knots(nu, base.seed_arm, rows=knots)
        arm[knots] = new_arm
        return self._scored_shift(base, knots, nu, arm, short_k)

    def gradient(self, base: _EvalState, var, mu, h=1e-6):
        """Forward-difference gradient over the packed variables; all
        perturbed-knot IK solves run as one batch."""
        jobs = []  # (knots, delta)
        for group in var.groups:
            for comp in range(2):
                delta = np.zeros(3)
                delta[comp] = h
                jobs.append((group, delta))
        for knot in range(var.n_knots):
            jobs.append(([knot], np.array([0.0, 0.0, h])))

        rows = np.concatenate([np.asarray(k) for k, _ in jobs])
        nus = np.concatenate(
            [base.nu[np.asarray(k)] + d for k, d in jobs]
        )
        seeds = base.seed_arm[rows]
        arm_all, short_all = self.solve_rows(nus, rows, seeds)

        f0 = base.objective(self.sigma, mu)
        grad = np.empty(len(jobs))
        pos = 0
        for j, (knots, delta) in enumerate(jobs):
            span = len(knots)
            nu = base.nu.copy()
            nu[knots] = nu[knots] + delta
            arm = base.arm.copy()
            arm[knots] = arm_all[pos : pos + span]
            st = self._scored_shift(base, list(knots), nu, arm, short_all[pos : pos + span])
            grad[j] = (st.objective(self.sigma, mu) - f0) / h
            pos += span
        return grad


# --------------------------------------------------------------------------
# smoothing driver
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SmoothingResult:
    trajectory: JointTrajectory
    cost: CostBreakdown
    seed_cost: CostBreakdown
    iterations: int
    converged: bool
    max_violation: float


def _dwell_groups(nu0):
    """Runs of consecutive knots with coincident base positions.

    The rotate-translate-rotate timing model is discontinuous at zero
    translation, so knots the seed holds coincident keep sharing their
    position variables; headings stay free per knot.
    """
    groups = [[0]]
    for i in range(1, len(nu0)):
        if np.hypot(*(nu0[i, :2] - nu0[i - 1, :2])) <= _TRANSLATION_EPS:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


class _Variables:
    """Packing between the optimizer vector and per-knot base values."""

    def __init__(self, nu0):
        self.groups = _dwell_groups(nu0)
        self.n_knots = len(nu0)

    @property
    def dim(self):
        return 2 * len(self.groups) + self.n_knots

    def pack(self, nu):
        xy = np.array([nu[g[0], :2] for g in self.groups]).ravel()
        return np.concatenate([xy, nu[:, 2]])

    def unpack(self, x):
        nu = np.empty((self.n_knots, 3))
        xy = x[: 2 * len(self.groups)].reshape(-1, 2)
        for g, p in zip(self.groups, xy):
            nu[g, :2] = p
        nu[:, 2] = x[2 * len(self.groups) :]
        return nu


def smooth_optimize(
    model: RobotModel,
    scene: Scene,
    task: TaskTrajectory,
    dp_solution,
    config: PlannerConfig,
) -> SmoothingResult:
    """Minimize the integral objective over the base knots, seeded by the
    grid solution.

    Returns the best feasible iterate found; when the seed itself verifies,
    the result never costs more than the interpolated seed.  Raises
    SmoothingError (carrying the best-effort trajectory and report) when no
    feasible iterate emerges.
    """
    from scipy.optimize import minimize

    knots = dp_solution.trajectory
    if len(knots) < 2:
        raise SmoothingError("smoothing needs at least two waypoints")
    nu0 = np.array([q.base for _, q in knots])
    arm0 = np.array([q.arm for _, q in knots])
    scfg = config.smoothing
    m_check = scfg.samples_per_interval
    tol = scfg.constraint_tol

    ev = _PenaltyEvaluator(model, scene, task, config)
    var = _Variables(nu0)
    state0 = ev.evaluate(nu0, arm0)
    seed_traj = JointTrajectory.from_spline(state0.spline, state0.profile)
    seed_cost = state0.cost_breakdown(ev.sigma)

    def verify(traj):
        return check_trajectory(
            model, scene, traj, samples_per_interval=m_check, rolling_tol=tol, tol=tol
        )

    def acceptable(state, report):
        # feasible per the exact checks AND the task poses met at every knot
        return report.feasible and float(state.ik_short.max()) == 0.0

    best = None  # (cost_total, trajectory, cost_breakdown, state)
    seed_report = verify(seed_traj)
    if acceptable(state0, seed_report):
        best = (seed_cost.total, seed_traj, seed_cost, state0)

    mu = scfg.penalty_initial
    iters = 0
    warm = {"arm": state0.arm}
    h_fd = 1e-6
    x = var.pack(nu0)
    per_round = max(3, int(np.ceil(scfg.max_iterations / scfg.penalty_rounds)))
    rounds = 0
    while rounds < scfg.penalty_rounds and iters < scfg.max_iterations:
        cache = {}

        def f_and_g(xv, mu=mu):
            key = xv.tobytes()
            st = cache.get(key)
            if st is None:
                st = ev.evaluate(var.unpack(xv), warm["arm"])
                cache[key] = st
            return st.objective(ev.sigma, mu), ev.gradient(st, var, mu, h_fd)

        res = minimize(
            f_and_g, x, jac=True, method="L-BFGS-B",
            options={
                "maxiter": min(per_round, max(1, scfg.max_iterations - iters)),
                "ftol": 1e-12, "gtol": 1e-10,
            },
        )
        iters += int(res.nit)
        rounds += 1
        x = res.x
        st = ev.evaluate(var.unpack(x), warm["arm"])
        warm["arm"] = st.arm
        cand = JointTrajectory.from_spline(st.spline, st.profile)
        report = verify(cand)
        if acceptable(st, report):
            cost = st.cost_breakdown(ev.sigma)
            if best is None or cost.total < best[0]:
                best = (cost.total, cand, cost, st)
        mu *= 2.0

    if best is None:
        st = ev.evaluate(var.unpack(x), warm["arm"])
        cand = JointTrajectory.from_spline(st.spline, st.profile)
        raise SmoothingError(
            "no feasible smoothed trajectory found",
            trajectory=cand,
            report=verify(cand),
        )

    total, traj, cost, st_best = best
    traj = traj.with_cost(cost)
    return SmoothingResult(
        trajectory=traj,
        cost=cost,
        seed_cost=seed_cost,
        iterations=iters,
        converged=True,
        max_violation=float(st_best.max_short),
    )
