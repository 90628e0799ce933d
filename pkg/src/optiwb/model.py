"""Domain data types shared across the planner.

Types are plain (frozen) dataclasses that normalize their fields on
construction; cross-field rules live in :func:`validate_model` and
:func:`validate_scene`, which the file loader and the planner entry points
enforce before any planning happens.  Angles are radians, lengths meters,
time seconds throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry
from .transforms import Transform, wrap_angle


@dataclass(frozen=True)
class BaseLimits:
    v_max: float
    omega_max: float


@dataclass(frozen=True)
class ArmJoint:
    """Revolute joint: fixed origin transform, then rotation about `axis`."""

    axis: np.ndarray
    origin: Transform
    pos_min: float
    pos_max: float
    vel_max: float
    acc_max: float

    def __post_init__(self):
        ax = np.asarray(self.axis, dtype=float).reshape(3)
        n = np.linalg.norm(ax)
        if n > 0:
            ax = ax / n
        object.__setattr__(self, "axis", ax)


@dataclass(frozen=True)
class CameraCCD:
    width: float
    height: float
    focal: float


@dataclass(frozen=True)
class LinkVolume:
    """Collision volume attached to a link frame.

    `link` 0 is the base body; link p in 1..n_arm is the frame after arm
    joint p.  The volume is expressed in that link's frame.
    """

    link: int
    volume: geometry.ConvexVolume


@dataclass(frozen=True)
class RobotModel:
    base_limits: BaseLimits
    arm_joints: tuple[ArmJoint, ...]
    arm_mount: Transform
    link_volumes: tuple[LinkVolume, ...]
    camera_transform: Transform
    camera_ccd: CameraCCD

    def __post_init__(self):
        object.__setattr__(self, "arm_joints", tuple(self.arm_joints))
        object.__setattr__(self, "link_volumes", tuple(self.link_volumes))

    @property
    def n_arm(self) -> int:
        return len(self.arm_joints)

    @property
    def n(self) -> int:
        """Total DOF: x, y, heading pseudo-joints plus the arm."""
        return self.n_arm + 3

    @property
    def arm_pos_min(self):
        return np.array([j.pos_min for j in self.arm_joints])

    @property
    def arm_pos_max(self):
        return np.array([j.pos_max for j in self.arm_joints])

    @property
    def arm_vel_max(self):
        return np.array([j.vel_max for j in self.arm_joints])

    @property
    def arm_acc_max(self):
        return np.array([j.acc_max for j in self.arm_joints])

    def reach(self) -> float:
        """Upper bound on the arm root to end-effector distance."""
        total = 0.0
        for j in self.arm_joints:
            total += float(np.linalg.norm(j.origin.translation))
        return total


@dataclass(frozen=True)
class Sun:
    azimuth: float
    elevation: float


@dataclass(frozen=True)
class Scene:
    obstacles: tuple[geometry.ConvexVolume, ...]
    forbidden_areas: tuple
    sun: Sun
    target_position: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "forbidden_areas", tuple(self.forbidden_areas))
        object.__setattr__(
            self, "target_position", np.asarray(self.target_position, dtype=float).reshape(3)
        )


@dataclass(frozen=True)
class FixedJoint:
    """Task-level constraint pinning one arm joint to a value."""

    index: int
    value: float


@dataclass(frozen=True)
class Waypoint:
    t: float
    position: np.ndarray
    orientation: np.ndarray  # unit quaternion, wxyz
    fixed_joints: tuple[FixedJoint, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        q = np.asarray(self.orientation, dtype=float).reshape(4)
        n = np.linalg.norm(q)
        if n > 0:
            q = q / n
        object.__setattr__(self, "orientation", q)
        object.__setattr__(self, "fixed_joints", tuple(self.fixed_joints))

    @property
    def pose(self) -> Transform:
        return Transform(self.orientation, self.position)


@dataclass(frozen=True)
class TaskTrajectory:
    waypoints: tuple[Waypoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple(self.waypoints))

    @property
    def duration(self) -> float:
        return self.waypoints[-1].t if self.waypoints else 0.0

    @property
    def n_segments(self) -> int:
        return len(self.waypoints) - 1

    def fixed_joint_indices(self):
        if not self.waypoints:
            return ()
        return tuple(f.index for f in self.waypoints[0].fixed_joints)


@dataclass(frozen=True)
class GridSpec:
    """Redundancy-parameter discretization: steps plus closed ranges.

    Ranges left as None default at planning time to the task's x/y bounding
    box inflated by the arm reach, and to the full circle for heading.
    """

    dx: float = 0.1
    dy: float = 0.1
    dh: float = 0.2
    x_range: tuple[float, float] | None = None
    y_range: tuple[float, float] | None = None
    h_range: tuple[float, float] | None = None


@dataclass(frozen=True)
class IKConfig:
    residual_tol: float = 1e-10
    accept_tol: float = 1e-6
    max_branches: int = 8
    seeds_per_joint: int = 2
    max_seeds: int = 16
    max_iterations: int = 60
    damping: float = 1e-3


@dataclass(frozen=True)
class SmoothingConfig:
    samples_per_interval: int = 8  # quadrature/constraint samples M per interval
    max_iterations: int = 60
    constraint_tol: float = 1e-6
    penalty_initial: float = 10.0
    penalty_rounds: int = 4


@dataclass(frozen=True)
class PlannerConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    sigma: float = 0.95
    ik: IKConfig = field(default_factory=IKConfig)
    smoothing: SmoothingConfig = field(default_factory=SmoothingConfig)
    rolling_heading_tol: float | None = None  # defaults to dh / 2

    @property
    def heading_tol(self) -> float:
        if self.rolling_heading_tol is not None:
            return self.rolling_heading_tol
        return 0.5 * self.grid.dh

    def violations(self):
        out = []
        for name in ("dx", "dy", "dh"):
            if not getattr(self.grid, name) > 0:
                out.append(f"config.grid.{name}: must be positive")
        if not 0.0 <= self.sigma <= 1.0:
            out.append("config.sigma: must lie in [0, 1]")
        if self.smoothing.samples_per_interval < 2:
            out.append("config.smoothing.samples_per_interval: must be >= 2")
        return out


@dataclass(frozen=True)
class JointConfig:
    """Whole-body configuration q = [x, y, h, arm...]; h wrapped to (-pi, pi]."""

    x: float
    y: float
    h: float
    arm: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "h", float(wrap_angle(self.h)))
        object.__setattr__(self, "arm", np.asarray(self.arm, dtype=float).reshape(-1))

    @property
    def base(self):
        return np.array([self.x, self.y, self.h])

    @property
    def q(self):
        return np.concatenate([self.base, self.arm])

    def with_arm(self, arm) -> "JointConfig":
        return replace(self, arm=np.asarray(arm, dtype=float))


@dataclass(frozen=True)
class CostBreakdown:
    total: float
    tv_integral: float
    snv_integral: float


@dataclass(frozen=True)
class JointTrajectory:
    """Discrete samples or a spline-backed curve, plus an optional cost report.

    Exactly one of `samples` / (`arm_spline`, `base_profile`) is set.
    """

    samples: tuple | None = None
    arm_spline: object | None = None
    base_profile: object | None = None
    cost_report: CostBreakdown | None = None

    @classmethod
    def from_samples(cls, samples, cost_report=None):
        return cls(samples=tuple((float(t), q) for t, q in samples), cost_report=cost_report)

    @classmethod
    def from_spline(cls, arm_spline, base_profile, cost_report=None):
        return cls(arm_spline=arm_spline, base_profile=base_profile, cost_report=cost_report)

    @property
    def is_spline(self) -> bool:
        return self.arm_spline is not None

    @property
    def duration(self) -> float:
        if self.is_spline:
            return self.base_profile.duration
        return self.samples[-1][0]

    def with_cost(self, cost_report) -> "JointTrajectory":
        return replace(self, cost_report=cost_report)


# --------------------------------------------------------------------------
# validators
# --------------------------------------------------------------------------

def validate_model(model: RobotModel):
    """All RobotModel invariant violations, each naming field and rule."""
    out = []
    if not model.base_limits.v_max > 0:
        out.append("base_limits.v_max: must be positive")
    if not model.base_limits.omega_max > 0:
        out.append("base_limits.omega_max: must be positive")
    if model.n_arm < 6:
        out.append(f"arm_joints: need at least 6 joints, got {model.n_arm}")
    for i, j in enumerate(model.arm_joints):
        if not j.pos_min < j.pos_max:
            out.append(f"arm_joints[{i}]: pos_min must be < pos_max")
        if not j.vel_max > 0:
            out.append(f"arm_joints[{i}].vel_max: must be positive")
        if not j.acc_max > 0:
            out.append(f"arm_joints[{i}].acc_max: must be positive")
        if not np.isclose(np.linalg.norm(j.axis), 1.0):
            out.append(f"arm_joints[{i}].axis: must be a unit vector")
    for k, lv in enumerate(model.link_volumes):
        if not 0 <= lv.link <= model.n_arm:
            out.append(f"link_volumes[{k}].link: index {lv.link} outside 0..{model.n_arm}")
        out.extend(geometry.volume_violations(lv.volume, f"link_volumes[{k}]"))
    for name in ("width", "height", "focal"):
        if not getattr(model.camera_ccd, name) > 0:
            out.append(f"camera_ccd.{name}: must be positive")
    return out


def validate_scene(scene: Scene, task: TaskTrajectory):
    """Joint Scene + TaskTrajectory invariant violations."""
    out = []
    if not 0.0 < scene.sun.elevation <= np.pi / 2:
        out.append("scene.sun.elevation: must be in (0, pi/2]")
    if scene.target_position[2] < 0:
        out.append("scene.target_position: z must be >= 0")
    for k, obs in enumerate(scene.obstacles):
        out.extend(geometry.volume_violations(obs, f"scene.obstacles[{k}]"))
    for k, area in enumerate(scene.forbidden_areas):
        if isinstance(area, (geometry.Polygon, geometry.OccupancyGrid)):
            out.extend(area.violations(f"scene.forbidden_areas[{k}]"))
        else:
            out.append(f"scene.forbidden_areas[{k}]: unknown area kind")

    wps = task.waypoints
    if not wps:
        out.append("task.waypoints: must be non-empty")
        return out
    if wps[0].t != 0.0:
        out.append("task.waypoints[0].t: first timestamp must be 0")
    for i in range(1, len(wps)):
        if not wps[i].t > wps[i - 1].t:
            out.append(f"task.waypoints[{i}].t: timestamps must be strictly increasing")
    fixed0 = task.fixed_joint_indices()
    if len(set(fixed0)) != len(fixed0):
        out.append("task.waypoints[0].fixed_joints: duplicate joint indices")
    for i, wp in enumerate(wps):
        if tuple(f.index for f in wp.fixed_joints) != fixed0:
            out.append(
                f"task.waypoints[{i}].fixed_joints: index set differs from waypoint 0"
            )
    return out


def validate_problem(model: RobotModel, scene: Scene, task: TaskTrajectory):
    """Model + scene/task violations, plus redundancy consistency r = 3."""
    out = validate_model(model)
    out.extend(validate_scene(scene, task))
    if task.waypoints:
        m = 6 + len(task.fixed_joint_indices())
        r = model.n - m
        if r <= 0:
            out.append(f"task: no redundancy (m = {m} >= n = {model.n})")
        elif r != 3:
            out.append(
                f"task: redundancy r = {r} but the base supplies 3 parameters; "
                f"fix {model.n_arm - 6} arm joints"
            )
        for f in task.fixed_joint_indices():
            if not 0 <= f < model.n_arm:
                out.append(f"task.fixed_joints: arm index {f} outside 0..{model.n_arm - 1}")
    return out
