"""Offline whole-body planner for a planar-wheeled base carrying a
redundant arm: grid dynamic programming over the base pose resolves the
redundancy globally, then constrained B-spline smoothing turns the discrete
plan into a feasible trajectory."""

from .constraints import ConstraintReport, Violation, check_differential, check_positional, check_rolling, check_trajectory, in_B
from .ddp import DPNode, DPSolution, RedundancyGrid, build_stage, dp_solve, make_grid
from .errors import (
    InfeasiblePlanError,
    KinematicsError,
    OptiwbError,
    ProblemFormatError,
    SmoothingError,
)
from .fileio import export_traces, load_plan, load_problem, save_plan, save_problem
from .geometry import (
    Box,
    Capsule,
    ConvexHullVolume,
    OccupancyGrid,
    Polygon,
    Ray,
    point_in_forbidden,
    ray_intersects_volume,
    sun_ray,
    volumes_intersect,
)
from .kinematics import (
    IKSolution,
    IKSolutionSet,
    Projection,
    augmented_ik,
    camera_pose,
    forward_kinematics,
    project_target,
)
from .model import (
    ArmJoint,
    BaseLimits,
    CameraCCD,
    CostBreakdown,
    FixedJoint,
    GridSpec,
    IKConfig,
    JointConfig,
    JointTrajectory,
    LinkVolume,
    PlannerConfig,
    RobotModel,
    Scene,
    SmoothingConfig,
    Sun,
    TaskTrajectory,
    Waypoint,
    validate_model,
    validate_problem,
    validate_scene,
)
from .objective import initial_cost, phi, snv_cost, trajectory_cost, tv_cost
from .smoothing import (
    BaseProfile,
    SmoothingResult,
    SplineCurve,
    eval_trajectory,
    interpolate_seed,
    smooth_optimize,
)
from .transforms import Transform, wrap_angle

__version__ = "0.1.0"
