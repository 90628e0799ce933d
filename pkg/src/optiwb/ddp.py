"""Global redundancy resolution: forward dynamic programming over the
discretized base-pose grid, one stage per task waypoint.

Each stage's nodes are the feasible IK branches over all grid points; edges
connect consecutive stages and carry the stage objective evaluated with
backward-difference rates.  Relaxation is exact over all stage pairs (the
velocity window only discards pairs that provably violate the rate limits),
with ties broken toward the lexicographically smallest grid index and
branch, so results are deterministic and independent of the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import geometry
from .constraints import positional_mask
from .errors import InfeasiblePlanError
from .kinematics import augmented_ik_arrays, base_rotations
from .model import (
    CostBreakdown,
    JointConfig,
    JointTrajectory,
    PlannerConfig,
    RobotModel,
    Scene,
    TaskTrajectory,
    validate_problem,
)
from .objective import trajectory_cost, tv_cost_batch
from .transforms import wrap_angle

_EDGE_CHUNK = 2_000_000  # max pair-matrix entries per relaxation block


def _axis_values(lo, hi, step):
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


@dataclass(frozen=True)
class RedundancyGrid:
    x_values: np.ndarray
    y_values: np.ndarray
    h_values: np.ndarray

    def __post_init__(self):
        for name in ("x_values", "y_values", "h_values"):
            v = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, v)
            if v.size == 0 or np.any(np.diff(v) <= 0):
                raise ValueError(f"{name} must be non-empty and strictly increasing")
        if np.any(self.h_values <= -np.pi) or np.any(self.h_values > np.pi):
            raise ValueError("h_values must lie in (-pi, pi]")

    @property
    def shape(self):
        return (len(self.x_values), len(self.y_values), len(self.h_values))

    def points(self):
        """All grid base configs in lexicographic (jx, jy, jh) order, plus
        their integer indices."""
        jx, jy, jh = np.meshgrid(
            np.arange(len(self.x_values)),
            np.arange(len(self.y_values)),
            np.arange(len(self.h_values)),
            indexing="ij",
        )
        jx, jy, jh = jx.ravel(), jy.ravel(), jh.ravel()
        bases = np.column_stack(
            [self.x_values[jx], self.y_values[jy], self.h_values[jh]]
        )
        return bases, jx, jy, jh


def make_grid(model: RobotModel, task: TaskTrajectory, config: PlannerConfig) -> RedundancyGrid:
    """Grid from the config ranges; missing x/y ranges default to the task's
    bounding box inflated by the arm reach, heading to the full circle."""
    g = config.grid
    positions = np.array([wp.position for wp in task.waypoints])
    reach = model.reach()
    if g.x_range is not None:
        x_lo, x_hi = g.x_range
    else:
        x_lo, x_hi = positions[:, 0].min() - reach, positions[:, 0].max() + reach
    if g.y_range is not None:
        y_lo, y_hi = g.y_range
    else:
        y_lo, y_hi = positions[:, 1].min() - reach, positions[:, 1].max() + reach
    if g.h_range is not None:
        h_vals = _axis_values(g.h_range[0], g.h_range[1], g.dh)
    else:
        n_h = int(np.floor(2 * np.pi / g.dh + 1e-9))
        h_vals = -np.pi + g.dh * (np.arange(n_h) + 1)
        h_vals = h_vals[h_vals <= np.pi + 1e-12]
    return RedundancyGrid(
        _axis_values(x_lo, x_hi, g.dx), _axis_values(y_lo, y_hi, g.dy), h_vals
    )


@dataclass(frozen=True)
class DPNode:
    waypoint: int
    grid_index: tuple[int, int, int]
    branch_id: int
    config: JointConfig
    best_cost: float | None = None
    best_predecessor: tuple[int, int, int, int] | None = None  # (jx, jy, jh, branch)


@dataclass(frozen=True)
class DPSolution:
    trajectory: tuple  # ((t, JointConfig), ...)
    cost: CostBreakdown
    stats: dict


@dataclass
class _Stage:
    bases: np.ndarray  # (K, 3)
    arms: np.ndarray  # (K, n_arm)
    jx: np.ndarray
    jy: np.ndarray
    jh: np.ndarray
    branch: np.ndarray
    tv: np.ndarray  # visibility index per node
    cost: np.ndarray | None = None
    pred: np.ndarray | None = None  # index into previous stage, -1 at stage 0
    pp_base: np.ndarray | None = None  # best predecessor's predecessor config
    pp_arm: np.ndarray | None = None
    has_pp: np.ndarray | None = None

    def __len__(self):
        return len(self.bases)


def _build_stage_arrays(model, scene, task, grid, i, config) -> tuple[_Stage, dict]:
    wp = task.waypoints[i]
    is_final = i == len(task.waypoints) - 1
    bases, jx, jy, jh = grid.points()
    counts = {}

    # necessary-condition cull: the task point must be within arm reach of
    # the arm root (exact IK would return empty for the rest anyway)
    rb = base_rotations(bases[:, 2])
    root = np.concatenate([bases[:, :2], np.zeros((len(bases), 1))], axis=1)
    root = root + np.einsum("bij,j->bi", rb, model.arm_mount.translation)
    close = np.linalg.norm(wp.position - root, axis=1) <= model.reach() + 1e-9
    counts["unreachable"] = int(np.sum(~close))
    bases, jx, jy, jh = bases[close], jx[close], jy[close], jh[close]

    # arm-independent cell pruning before the expensive IK: forbidden areas
    # and base-body collisions depend on the base pose alone
    if len(bases) and scene.forbidden_areas:
        hit = geometry.points_in_forbidden(bases[:, :2], scene.forbidden_areas)
        counts["forbidden_area"] = int(hit.sum())
        bases, jx, jy, jh = bases[~hit], jx[~hit], jy[~hit], jh[~hit]
    base_vols = [lv for lv in model.link_volumes if lv.link == 0]
    if len(bases) and scene.obstacles and base_vols:
        rb = base_rotations(bases[:, 2])
        tb = np.concatenate([bases[:, :2], np.zeros((len(bases), 1))], axis=1)
        hit = np.zeros(len(bases), dtype=bool)
        for lv in base_vols:
            for obs in scene.obstacles:
                hit |= geometry.batch_volume_intersects(lv.volume, rb, tb, obs)
        counts["collision"] = int(hit.sum())
        bases, jx, jy, jh = bases[~hit], jx[~hit], jy[~hit], jh[~hit]

    if len(bases):
        arm, owner, branch, _, _ = augmented_ik_arrays(
            model, wp.pose, wp.fixed_joints, bases, config.ik
        )
    else:
        arm = np.zeros((0, model.n_arm))
        owner = branch = np.zeros(0, dtype=int)
    no_ik = len(bases) - len(np.unique(owner)) if len(bases) else 0
    counts["unreachable"] += int(no_ik)

    node_bases = bases[owner] if len(owner) else np.zeros((0, 3))
    feasible, prune = positional_mask(
        model, scene, node_bases, arm, is_final, check_arm_bounds=False
    )
    for k, v in prune.items():
        counts[k] = counts.get(k, 0) + v
    stage = _Stage(
        bases=node_bases[feasible],
        arms=arm[feasible] if len(arm) else arm,
        jx=jx[owner][feasible] if len(owner) else owner,
        jy=jy[owner][feasible] if len(owner) else owner,
        jh=jh[owner][feasible] if len(owner) else owner,
        branch=branch[feasible] if len(branch) else branch,
        tv=np.zeros(int(np.sum(feasible))),
    )
    if len(stage):
        stage.tv = tv_cost_batch(model, stage.bases, scene.target_position)
    return stage, counts


def build_stage(model, scene, task, grid, i, config) -> list[DPNode]:
    """Candidate nodes for waypoint i: every feasible IK branch over the
    grid.  Raises InfeasiblePlanError when the stage is empty."""
    stage, counts = _build_stage_arrays(model, scene, task, grid, i, config)
    if len(stage) == 0:
        raise InfeasiblePlanError(
            f"infeasible stage {i}: no admissible IK branch on the grid "
            f"(pruned: {counts})",
            stage=i,
            pruned=counts,
        )
    return [
        DPNode(
            waypoint=i,
            grid_index=(int(stage.jx[k]), int(stage.jy[k]), int(stage.jh[k])),
            branch_id=int(stage.branch[k]),
            config=JointConfig(*stage.bases[k], stage.arms[k]),
        )
        for k in range(len(stage))
    ]


def _relax_block(model, config, sigma, prev, cur, rows, dt, need_acc):
    """Best predecessor for a block of current-stage nodes.

    Returns (best cost (R,), argmin predecessor index (R,)); the pair cost
    matrix is ordered by the previous stage's lexicographic node order, so
    the first minimum realizes the tie-break rule.
    """
    v_max = model.base_limits.v_max
    omega = model.base_limits.omega_max
    finite = np.isfinite(prev.cost)

    dxy = cur.bases[rows, None, :2] - prev.bases[None, :, :2]
    dist = np.hypot(dxy[:, :, 0], dxy[:, :, 1])
    dh = wrap_angle(cur.bases[rows, None, 2] - prev.bases[None, :, 2])
    ok = (
        finite[None, :]
        & (dist <= v_max * dt + 1e-9)
        & (np.abs(dh) <= omega * dt + 1e-9)
    )

    # pure rolling: either a turn in place, or heading aligned with motion
    # and the rotate-translate-rotate maneuver fits the interval
    theta = np.arctan2(dxy[:, :, 1], dxy[:, :, 0])
    moving = dist > 1e-9
    rot1 = np.abs(wrap_angle(theta - prev.bases[None, :, 2]))
    rot2 = np.abs(wrap_angle(cur.bases[rows, None, 2] - theta))
    t_total = np.where(
        moving, (rot1 + rot2) / omega + dist / v_max, np.abs(dh) / omega
    )
    ok &= np.where(moving, rot2 <= config.heading_tol + 1e-12, True)
    ok &= t_total <= dt + 1e-9

    # arm velocity limits on surviving pairs only
    costs = np.full(ok.shape, np.inf)
    ib, kp = np.nonzero(ok)
    if len(ib):
        darm = cur.arms[rows][ib] - prev.arms[kp]
        vel_ok = np.all(np.abs(darm) <= model.arm_vel_max * dt + 1e-9, axis=1)
        if need_acc:
            has = prev.has_pp[kp] & vel_ok
            idx = np.nonzero(has)[0]
            if len(idx):
                acc = (
                    cur.arms[rows][ib[idx]]
                    - 2.0 * prev.arms[kp[idx]]
                    + prev.pp_arm[kp[idx]]
                ) / dt**2
                acc_ok = np.all(np.abs(acc) <= model.arm_acc_max + 1e-9, axis=1)
                vel_ok[idx] &= acc_ok
        ib, kp, darm = ib[vel_ok], kp[vel_ok], darm[vel_ok]
        if len(ib):
            snv = (
                dist[ib, kp] ** 2 + dh[ib, kp] ** 2 + np.einsum("ei,ei->e", darm, darm)
            ) / dt**2
            phi = sigma * cur.tv[rows][ib] + (1.0 - sigma) * snv
            costs[ib, kp] = prev.cost[kp] + phi
    best_k = np.argmin(costs, axis=1)
    best_c = costs[np.arange(len(rows)), best_k]
    return best_c, best_k


def dp_solve(model: RobotModel, scene: Scene, task: TaskTrajectory, config: PlannerConfig) -> DPSolution:
    """Globally optimal discrete trajectory over the grid (per the grid's
    node/edge graph), backtracked from the cheapest final node."""
    problems = validate_problem(model, scene, task) + config.violations()
    if problems:
        raise ValueError("invalid planning problem: " + "; ".join(problems))
    grid = make_grid(model, task, config)
    sigma = config.sigma
    workers = int(os.environ.get("OPTIWB_PARALLELISM", "1") or "1")

    n_stages = len(task.waypoints)
    stats = {"stage_nodes": [], "pruned": [], "nodes_expanded": 0, "grid_shape": grid.shape}
    prev: _Stage | None = None
    stages: list[_Stage] = []
    for i in range(n_stages):
        stage, counts = _build_stage_arrays(model, scene, task, grid, i, config)
        stats["stage_nodes"].append(len(stage))
        stats["pruned"].append(counts)
        stats["nodes_expanded"] += len(stage)
        if len(stage) == 0:
            raise InfeasiblePlanError(
                f"infeasible stage {i}: no admissible IK branch on the grid "
                f"(pruned: {counts})",
                stage=i,
                pruned=counts,
            )
        if i == 0:
            stage.cost = sigma * stage.tv
            stage.pred = np.full(len(stage), -1, dtype=int)
            stage.has_pp = np.zeros(len(stage), dtype=bool)
            stage.pp_base = np.zeros((len(stage), 3))
            stage.pp_arm = np.zeros_like(stage.arms)
        else:
            dt = task.waypoints[i].t - task.waypoints[i - 1].t
            need_acc = i >= 2
            k = len(stage)
            block = max(1, _EDGE_CHUNK // max(1, len(prev)))
            blocks = [
                np.arange(s, min(s + block, k)) for s in range(0, k, block)
            ]

            def run(rows):
                return _relax_block(model, config, sigma, prev, stage, rows, dt, need_acc)

            if workers > 1 and len(blocks) > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    results = list(pool.map(run, blocks))
            else:
                results = [run(rows) for rows in blocks]
            stage.cost = np.concatenate([r[0] for r in results])
            stage.pred = np.concatenate([r[1] for r in results])
            reached = np.isfinite(stage.cost)
            if not np.any(reached):
                raise InfeasiblePlanError(
                    f"disconnected at stage {i}: no feasible edge from stage {i - 1}",
                    stage=i,
                    pruned=counts,
                )
            stage.pred[~reached] = -1
            stage.has_pp = np.zeros(k, dtype=bool)
            stage.pp_base = np.zeros((k, 3))
            stage.pp_arm = np.zeros((k, model.n_arm))
            good = np.nonzero(reached)[0]
            stage.has_pp[good] = True
            stage.pp_base[good] = prev.bases[stage.pred[good]]
            stage.pp_arm[good] = prev.arms[stage.pred[good]]
        stages.append(stage)
        prev = stage

    final = stages[-1]
    best = int(np.argmin(np.where(np.isfinite(final.cost), final.cost, np.inf)))
    path = []
    k = best
    for i in range(n_stages - 1, -1, -1):
        st = stages[i]
        path.append(
            (
                task.waypoints[i].t,
                JointConfig(st.bases[k, 0], st.bases[k, 1], st.bases[k, 2], st.arms[k]),
            )
        )
        k = int(st.pred[k])
    path.reverse()

    traj = JointTrajectory.from_samples(path)
    cost = trajectory_cost(model, scene, traj, sigma)
    stats["optimal_cost"] = float(final.cost[best])
    return DPSolution(trajectory=tuple(path), cost=cost, stats=stats)
