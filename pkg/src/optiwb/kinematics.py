"""Forward kinematics, redundancy-parametrized inverse kinematics, and the
camera model.

The whole-body configuration is q = [x, y, h, arm...]: the base contributes
two prismatic pseudo-joints and one revolute pseudo-joint (heading), the arm
is a serial revolute chain described by per-joint origin transforms and
axes.  Everything here is a pure function of its inputs; the heavy paths are
batched over configurations.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import KinematicsError
from .model import FixedJoint, IKConfig, JointConfig, RobotModel
from .transforms import (
    Transform,
    planar_transform,
    quat_from_matrix,
    quat_to_matrix,
    rotvec_from_matrix,
)


# --------------------------------------------------------------------------
# forward kinematics
# --------------------------------------------------------------------------

def base_rotations(h):
    """Batched rotation matrices about +z for headings h (B,)."""
    h = np.asarray(h, dtype=float)
    c, s = np.cos(h), np.sin(h)
    zero = np.zeros_like(h)
    one = np.ones_like(h)
    return np.stack(
        [
            np.stack([c, -s, zero], axis=-1),
            np.stack([s, c, zero], axis=-1),
            np.stack([zero, zero, one], axis=-1),
        ],
        axis=-2,
    )


@dataclass(frozen=True)
class _ChainData:
    """Precomputed per-joint constants for batched chain evaluation."""

    r_origin: np.ndarray  # (n, 3, 3)
    t_origin: np.ndarray  # (n, 3)
    axes: np.ndarray  # (n, 3)
    k: np.ndarray  # (n, 3, 3) cross-product matrices of axes
    k2: np.ndarray  # (n, 3, 3)


@lru_cache(maxsize=32)
def _chain_data_cached(key):
    r_origin, t_origin, axes = key
    r_origin = np.asarray(r_origin, float)
    t_origin = np.asarray(t_origin, float)
    axes = np.asarray(axes, float)
    n = len(axes)
    k = np.zeros((n, 3, 3))
    k[:, 0, 1] = -axes[:, 2]
    k[:, 0, 2] = axes[:, 1]
    k[:, 1, 0] = axes[:, 2]
    k[:, 1, 2] = -axes[:, 0]
    k[:, 2, 0] = -axes[:, 1]
    k[:, 2, 1] = axes[:, 0]
    return _ChainData(r_origin, t_origin, axes, k, k @ k)


def _chain_data(model: RobotModel) -> _ChainData:
    key = (
        tuple(tuple(map(tuple, j.origin.rotation_matrix)) for j in model.arm_joints),
        tuple(tuple(j.origin.translation) for j in model.arm_joints),
        tuple(tuple(j.axis) for j in model.arm_joints),
    )
    return _chain_data_cached(key)


def arm_frames(model: RobotModel, arm):
    """Arm link frames in the arm-root frame for a batch of arm configs.

    Returns rotations (B, n+1, 3, 3), origins (B, n+1, 3), and joint axis
    directions (B, n, 3); frame 0 is the arm root, frame i follows joint i.
    """
    chain = _chain_data(model)
    q = np.atleast_2d(np.asarray(arm, dtype=float))
    b, n = q.shape
    sin_q = np.sin(q)
    cos_q = np.cos(q)
    eye = np.eye(3)
    frames_r = np.empty((b, n + 1, 3, 3))
    frames_t = np.empty((b, n + 1, 3))
    axes_world = np.empty((b, n, 3))
    frames_r[:, 0] = eye
    frames_t[:, 0] = 0.0
    r_cur = np.broadcast_to(eye, (b, 3, 3))
    t_cur = np.zeros((b, 3))
    for i in range(n):
        rot_axis = (
            eye
            + sin_q[:, i, None, None] * chain.k[i]
            + (1.0 - cos_q[:, i, None, None]) * chain.k2[i]
        )
        r_pre = r_cur @ chain.r_origin[i]
        t_cur = t_cur + r_cur @ chain.t_origin[i]
        axes_world[:, i] = r_pre @ chain.axes[i]
        r_cur = r_pre @ rot_axis
        frames_r[:, i + 1] = r_cur
        frames_t[:, i + 1] = t_cur
    return frames_r, frames_t, axes_world


def link_frames(model: RobotModel, bases, arms):
    """World link frames for a batch: index 0 is the base body, index i in
    1..n_arm the frame after arm joint i.  Returns (R (B, n+1, 3, 3),
    t (B, n+1, 3))."""
    bases = np.atleast_2d(np.asarray(bases, dtype=float))
    arms = np.atleast_2d(np.asarray(arms, dtype=float))
    rb = base_rotations(bases[:, 2])
    tb = np.concatenate([bases[:, :2], np.zeros((len(bases), 1))], axis=1)
    mount_r = model.arm_mount.rotation_matrix
    mount_t = model.arm_mount.translation
    root_r = rb @ mount_r
    root_t = tb + np.einsum("bij,j->bi", rb, mount_t)
    fr, ft, _ = arm_frames(model, arms)
    world_r = np.empty_like(fr)
    world_t = np.empty_like(ft)
    world_r[:, 0] = rb
    world_t[:, 0] = tb
    world_r[:, 1:] = np.einsum("bij,bkjl->bkil", root_r, fr[:, 1:])
    world_t[:, 1:] = root_t[:, None, :] + np.einsum("bij,bkj->bki", root_r, ft[:, 1:])
    return world_r, world_t


def forward_kinematics_arrays(model: RobotModel, bases, arms):
    """End-effector world pose for a batch: (R (B, 3, 3), t (B, 3))."""
    wr, wt = link_frames(model, bases, arms)
    return wr[:, -1], wt[:, -1]


def forward_kinematics(model: RobotModel, q: JointConfig) -> Transform:
    """World pose of the end-effector frame (the last arm link frame)."""
    r, t = forward_kinematics_arrays(model, q.base[None], q.arm[None])
    return Transform(quat_from_matrix(r[0]), t[0])


def camera_pose(model: RobotModel, q_b) -> Transform:
    """World pose of the base-mounted camera for base config (x, y, h)."""
    q_b = np.asarray(q_b, dtype=float).reshape(3)
    return planar_transform(*q_b).compose(model.camera_transform)


@dataclass(frozen=True)
class Projection:
    """Image-plane coordinates of a point, in meters on the CCD."""

    u: float
    v: float
    in_bounds: bool


def project_target(model: RobotModel, q_b, target):
    """Pinhole projection of a world point onto the camera CCD plane.

    The camera boresight is its +x axis; u grows along camera +y, v along
    camera +z.  Returns None when the point is at or behind the camera.
    """
    cam = camera_pose(model, q_b)
    local = cam.inverse().apply(np.asarray(target, dtype=float))
    depth = local[0]
    if depth <= 0.0:
        return None
    ccd = model.camera_ccd
    u = ccd.focal * local[1] / depth
    v = ccd.focal * local[2] / depth
    in_bounds = abs(u) <= ccd.width / 2 and abs(v) <= ccd.height / 2
    return Projection(float(u), float(v), bool(in_bounds))


# --------------------------------------------------------------------------
# augmented inverse kinematics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class IKSolution:
    config: JointConfig
    branch_id: int
    position_residual: float
    orientation_residual: float


@dataclass(frozen=True)
class IKSolutionSet:
    solutions: tuple[IKSolution, ...]

    def __post_init__(self):
        object.__setattr__(self, "solutions", tuple(self.solutions))

    def __len__(self):
        return len(self.solutions)

    def __iter__(self):
        return iter(self.solutions)

    def arm_array(self):
        return np.array([s.config.arm for s in self.solutions]).reshape(len(self), -1)


def _normalize_fixed(fixed_joints):
    out = []
    for f in fixed_joints:
        if isinstance(f, FixedJoint):
            out.append((int(f.index), float(f.value)))
        else:
            idx, val = f
            out.append((int(idx), float(val)))
    return sorted(out)


def _spread_subsample(digits, k):
    """Greedy max-min-Hamming subsample of a digit lattice (rows of
    `digits`); deterministic, ties toward the lowest row index."""
    chosen = [0]
    dist = np.sum(digits != digits[0], axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(dist))
        if dist[nxt] == -1:
            break
        chosen.append(nxt)
        dist = np.minimum(dist, np.sum(digits != digits[nxt], axis=1))
        dist[chosen] = -1
    return chosen


def seed_lattice(model: RobotModel, free_idx, cfg: IKConfig):
    """Deterministic seed configurations spanning the free-joint box: the
    box center plus a lattice of per-joint quantile levels, subsampled (when
    capped) for maximal level disagreement across joints."""
    lo = model.arm_pos_min[free_idx]
    hi = model.arm_pos_max[free_idx]
    s = max(1, cfg.seeds_per_joint)
    fracs = (np.arange(s) + 0.5) / s
    grids = np.meshgrid(*[fracs] * len(free_idx), indexing="ij")
    lattice = np.stack([g.ravel() for g in grids], axis=-1)
    center = np.full((1, len(free_idx)), 0.5)
    if len(lattice) + 1 > cfg.max_seeds:
        digits = np.rint(lattice * s - 0.5).astype(int)
        keep = _spread_subsample(digits, cfg.max_seeds - 1)
        lattice = lattice[sorted(keep)]
    seeds = np.concatenate([center, lattice], axis=0)
    return lo + seeds * (hi - lo)


def _pose_error(r_cur, t_cur, r_tgt, t_tgt):
    e_pos = t_tgt - t_cur
    r_err = r_tgt @ np.swapaxes(r_cur, -1, -2)
    e_rot = rotvec_from_matrix(r_err)
    return np.concatenate([e_pos, e_rot], axis=-1)


def _arm_jacobian(frames_r, frames_t, axes, free_idx):
    """Geometric Jacobian columns (B, 6, n_free) for the end-effector."""
    p_ee = frames_t[:, -1]
    z = axes[:, free_idx]  # (B, F, 3)
    p = frames_t[:, [i + 1 for i in free_idx]]  # frame i+1 sits on joint i's axis
    jv = np.cross(z, (p_ee[:, None, :] - p))
    return np.concatenate([jv, z], axis=-1).transpose(0, 2, 1)


def solve_arm_ik(model, r_tgt, t_tgt, fixed, seeds, cfg: IKConfig):
    """Damped least-squares arm IK toward per-row target poses.

    r_tgt/t_tgt are (B, 3, 3)/(B, 3) targets in the arm-root frame; `seeds`
    is (B, n_free) initial free-joint values.  Returns (arm (B, n_arm),
    pos_res (B,), ori_res (B,), converged (B,)).
    """
    n_arm = model.n_arm
    fixed_idx = [i for i, _ in fixed]
    free_idx = [i for i in range(n_arm) if i not in fixed_idx]
    b = len(seeds)
    q = np.zeros((b, n_arm))
    for i, v in fixed:
        q[:, i] = v
    q[:, free_idx] = seeds

    lam = np.full(b, cfg.damping)
    fr, ft, axes = arm_frames(model, q)
    err = _pose_error(fr[:, -1], ft[:, -1], r_tgt, t_tgt)
    err_norm = np.linalg.norm(err, axis=1)
    stall = np.zeros(b, dtype=int)

    active = np.arange(b)
    frames = (fr, ft, axes)
    tol = cfg.residual_tol
    eye6 = np.eye(6)
    for _ in range(cfg.max_iterations):
        pos_n = np.linalg.norm(err[active, :3], axis=1)
        ori_n = np.linalg.norm(err[active, 3:], axis=1)
        # stop rows that converged or stopped making progress (6 straight
        # rejected steps means the damping has grown past recovery)
        keep = ~((pos_n < tol) & (ori_n < tol)) & (stall[active] < 6)
        if not np.all(keep):
            active = active[keep]
            frames = tuple(f[keep] for f in frames)
        if len(active) == 0:
            break
        qa = q[active]
        fr, ft, axes = frames
        jac = _arm_jacobian(fr, ft, axes, free_idx)
        jjt = jac @ np.swapaxes(jac, 1, 2) + (lam[active] ** 2)[:, None, None] * eye6
        rhs = err[active][:, :, None]
        try:
            y = np.linalg.solve(jjt, rhs)[:, :, 0]
        except np.linalg.LinAlgError:
            y = np.linalg.solve(jjt + 1e-6 * eye6, rhs)[:, :, 0]
        dq = np.einsum("bij,bi->bj", jac, y)
        step = np.linalg.norm(dq, axis=1)
        scale = np.where(step > 0.7, 0.7 / np.where(step > 0, step, 1.0), 1.0)
        q_try = qa.copy()
        q_try[:, free_idx] = qa[:, free_idx] + dq * scale[:, None]
        fr2, ft2, axes2 = arm_frames(model, q_try)
        err_try = _pose_error(fr2[:, -1], ft2[:, -1], r_tgt[active], t_tgt[active])
        try_norm = np.linalg.norm(err_try, axis=1)
        better = try_norm < err_norm[active]
        q[active] = np.where(better[:, None], q_try, qa)
        err[active] = np.where(better[:, None], err_try, err[active])
        meaningful = try_norm < err_norm[active] * (1.0 - 1e-3)
        err_norm[active] = np.where(better, try_norm, err_norm[active])
        stall[active] = np.where(meaningful, 0, stall[active] + 1)
        lam[active] = np.where(
            better, np.maximum(lam[active] * 0.5, 1e-5), np.minimum(lam[active] * 4.0, 1e3)
        )
        frames = (
            np.where(better[:, None, None, None], fr2, fr),
            np.where(better[:, None, None], ft2, ft),
            np.where(better[:, None, None], axes2, axes),
        )

    pos_res = np.linalg.norm(err[:, :3], axis=1)
    ori_res = np.linalg.norm(err[:, 3:], axis=1)
    converged = (pos_res < tol * 10) & (ori_res < tol * 10)
    return q, pos_res, ori_res, converged


def _wrap_into_bounds(q, lo, hi):
    """Shift each joint by whole turns into its bounds where possible."""
    out = q.copy()
    for shift in (-2.0 * np.pi, 2.0 * np.pi):
        shifted = out + shift
        take = ((out < lo) | (out > hi)) & (shifted >= lo) & (shifted <= hi)
        out = np.where(take, shifted, out)
    return out


def augmented_ik_arrays(model, pose: Transform, fixed_joints, nus, cfg: IKConfig):
    """Arm IK branch sets for one task pose over a batch of base configs.

    Returns (arm (M, n_arm), owner (M,), branch (M,), pos_res (M,),
    ori_res (M,)) sorted by (owner, branch); `owner` indexes rows of `nus`.
    """
    if model.reach() < 1e-9:
        raise KinematicsError("degenerate arm chain: zero reach, branches indistinct")
    fixed = _normalize_fixed(fixed_joints)
    fixed_idx = [i for i, _ in fixed]
    free_idx = [i for i in range(model.n_arm) if i not in fixed_idx]
    if len(free_idx) != 6:
        raise KinematicsError(
            f"augmented IK needs exactly 6 free arm joints, got {len(free_idx)}"
        )
    nus = np.atleast_2d(np.asarray(nus, dtype=float))
    n_nu = len(nus)
    seeds = seed_lattice(model, free_idx, cfg)
    n_seed = len(seeds)

    # task pose in each arm-root frame
    rb = base_rotations(nus[:, 2])
    tb = np.concatenate([nus[:, :2], np.zeros((n_nu, 1))], axis=1)
    root_r = rb @ model.arm_mount.rotation_matrix
    root_t = tb + np.einsum("bij,j->bi", rb, model.arm_mount.translation)
    r_tgt = np.einsum("bji,jk->bik", root_r, quat_to_matrix(pose.rotation))
    t_tgt = np.einsum("bji,bj->bi", root_r, pose.translation - root_t)

    # quick reach cull per base config
    reach = model.reach()
    close = np.linalg.norm(t_tgt, axis=1) <= reach + 1e-9
    rows_nu = np.repeat(np.nonzero(close)[0], n_seed)
    if len(rows_nu) == 0:
        empty = np.zeros(0)
        return np.zeros((0, model.n_arm)), empty.astype(int), empty.astype(int), empty, empty

    seed_block = np.tile(seeds, (int(close.sum()), 1))
    q, pos_res, ori_res, conv = solve_arm_ik(
        model, r_tgt[rows_nu], t_tgt[rows_nu], fixed, seed_block, cfg
    )

    lo, hi = model.arm_pos_min, model.arm_pos_max
    q = _wrap_into_bounds(q, lo, hi)
    in_bounds = np.all((q >= lo - 1e-9) & (q <= hi + 1e-9), axis=1)
    ok = conv & in_bounds & (pos_res < cfg.accept_tol) & (ori_res < cfg.accept_tol)

    out_arm, out_owner, out_branch, out_pos, out_ori = [], [], [], [], []
    for nu_i in np.unique(rows_nu[ok]):
        mask = ok & (rows_nu == nu_i)
        sols = q[mask]
        p_res = pos_res[mask]
        o_res = ori_res[mask]
        order = np.lexsort(sols.T[::-1])
        kept, kept_p, kept_o = [], [], []
        for k in order:
            if any(np.max(np.abs(sols[k] - prev)) < 1e-3 for prev in kept):
                continue
            kept.append(sols[k])
            kept_p.append(p_res[k])
            kept_o.append(o_res[k])
        kept = kept[: cfg.max_branches]
        for branch, (sol, pr, orr) in enumerate(zip(kept, kept_p, kept_o)):
            out_arm.append(sol)
            out_owner.append(int(nu_i))
            out_branch.append(branch)
            out_pos.append(pr)
            out_ori.append(orr)
    if not out_arm:
        empty = np.zeros(0)
        return np.zeros((0, model.n_arm)), empty.astype(int), empty.astype(int), empty, empty
    return (
        np.array(out_arm),
        np.array(out_owner, dtype=int),
        np.array(out_branch, dtype=int),
        np.array(out_pos),
        np.array(out_ori),
    )


def augmented_ik(model, pose: Transform, fixed_joints, nu, config: IKConfig | None = None):
    """All arm IK branches reaching `pose` with the base fixed at `nu`.

    Solutions satisfy the fixed joints exactly, lie within position bounds,
    and reproduce the pose within the accept tolerance; branch ids label the
    lexicographically sorted solution list and are stable across calls.
    """
    cfg = config or IKConfig()
    nu = np.asarray(nu, dtype=float).reshape(3)
    arm, owner, branch, pos_res, ori_res = augmented_ik_arrays(
        model, pose, fixed_joints, nu[None], cfg
    )
    sols = [
        IKSolution(
            JointConfig(nu[0], nu[1], nu[2], arm[k]),
            int(branch[k]),
            float(pos_res[k]),
            float(ori_res[k]),
        )
        for k in range(len(arm))
    ]
    return IKSolutionSet(tuple(sols))
