"""Bundled demonstration problem: a rover with a 7-joint arm inspecting a
ground target.

The rover drives east, turns in place, and closes on the target along a
diagonal while the arm sweeps the end-effector through a 40-waypoint task
lasting 39 seconds (about 3 m by 1.5 m by 0.9 m of workspace).  The task is
generated from a nominal whole-body motion that is feasible on the planning
grid, so the grid search always has at least one admissible path; the
planner is then free to do better.
"""

from __future__ import annotations

import numpy as np

from . import geometry
from .kinematics import forward_kinematics_arrays
from .model import (
    ArmJoint,
    BaseLimits,
    CameraCCD,
    FixedJoint,
    GridSpec,
    IKConfig,
    JointConfig,
    LinkVolume,
    PlannerConfig,
    RobotModel,
    Scene,
    SmoothingConfig,
    Sun,
    TaskTrajectory,
    Waypoint,
)
from .transforms import Transform, quat_from_matrix

_Z = np.array([0.0, 0.0, 1.0])
_Y = np.array([0.0, 1.0, 0.0])

THIRD_JOINT_VALUE = 0.45  # task-fixed arm joint (index 2), rad


def demo_robot() -> RobotModel:
    """Four-wheel rover with a 7-joint arm on the front panel, shifted to
    the right, and a forward-looking navigation camera."""

    def joint(axis, dz, lim, vmax, amax):
        return ArmJoint(axis, Transform(translation=[0.0, 0.0, dz]), -lim, lim, vmax, amax)

    joints = (
        joint(_Z, 0.1575, 2.96, 1.48, 6.0),
        joint(_Y, 0.2025, 2.09, 1.48, 6.0),
        joint(_Z, 0.2045, 2.96, 1.74, 8.0),
        joint(_Y, 0.2155, 2.09, 1.30, 8.0),
        joint(_Z, 0.1845, 2.96, 2.26, 10.0),
        joint(_Y, 0.2155, 2.09, 2.35, 10.0),
        joint(_Z, 0.1260, 3.05, 2.35, 10.0),
    )
    volumes = (
        # rover body: a rounded slab below the arm mount
        LinkVolume(0, geometry.Capsule(0.30, [-0.35, 0.0, 0.16], [0.35, 0.0, 0.16])),
        # upper arm, forearm, wrist
        LinkVolume(2, geometry.Capsule(0.07, [0.0, 0.0, -0.20], [0.0, 0.0, 0.0])),
        LinkVolume(4, geometry.Capsule(0.06, [0.0, 0.0, -0.20], [0.0, 0.0, 0.0])),
        LinkVolume(6, geometry.Capsule(0.05, [0.0, 0.0, -0.16], [0.0, 0.0, 0.02])),
    )
    return RobotModel(
        base_limits=BaseLimits(v_max=0.5, omega_max=0.9),
        arm_joints=joints,
        arm_mount=Transform(translation=[0.45, -0.12, 0.40]),
        link_volumes=volumes,
        camera_transform=Transform(translation=[0.42, 0.10, 0.55]),
        camera_ccd=CameraCCD(width=0.036, height=0.024, focal=0.020),
    )


def _nominal_motion():
    """Base and arm knot values of the feasibility-guaranteeing nominal.

    The base sticks to 0.1 m grid steps: 21 straight intervals heading 0,
    one turn in place, 11 diagonal intervals at heading 0.8 (within half a
    heading step of the exact diagonal direction), then a hover while the
    arm keeps sweeping.
    """
    n = 40
    leg_a, leg_b = 21, 11
    bases = np.zeros((n, 3))
    x, y, h = -0.4, -0.55, 0.0
    for i in range(n):
        bases[i] = (x, y, h)
        if i < leg_a:
            x += 0.1
        elif i == leg_a:
            h = 0.8
        elif i <= leg_a + leg_b:
            x += 0.1
            y += 0.1
    t = np.arange(n, dtype=float)
    arms = np.zeros((n, 7))
    ph = 0.16 * t + 1.1
    arms[:, 0] = 0.08 * np.sin(0.20 * t)
    arms[:, 1] = 0.95 + 0.62 * np.sin(ph)
    arms[:, 2] = THIRD_JOINT_VALUE
    arms[:, 3] = 1.55 - 0.15 * np.sin(ph)
    arms[:, 4] = 0.08 * np.sin(0.17 * t)
    arms[:, 5] = 0.60 + 0.45 * np.sin(ph)
    arms[:, 6] = 0.15 * np.sin(0.08 * t)
    return bases, arms


def demo_task(model: RobotModel) -> TaskTrajectory:
    bases, arms = _nominal_motion()
    rr, tt = forward_kinematics_arrays(model, bases, arms)
    waypoints = []
    for i in range(len(bases)):
        waypoints.append(
            Waypoint(
                t=float(i),
                position=tt[i],
                orientation=quat_from_matrix(rr[i]),
                fixed_joints=(FixedJoint(2, THIRD_JOINT_VALUE),),
            )
        )
    return TaskTrajectory(tuple(waypoints))


def demo_scene(model: RobotModel, task: TaskTrajectory) -> Scene:
    final = task.waypoints[-1].position
    target = np.array([final[0] + 0.35, final[1] + 0.35, 0.05])
    obstacles = (
        # boulder north of the first leg
        geometry.Box([0.25, 0.25, 0.25], Transform(translation=[0.9, 0.75, 0.25])),
    )
    forbidden = (
        # soft-soil pocket south of the route near the start
        geometry.Polygon([[0.2, -2.2], [1.6, -2.2], [1.6, -0.75], [0.2, -0.75]]),
    )
    return Scene(
        obstacles=obstacles,
        forbidden_areas=forbidden,
        sun=Sun(azimuth=0.35, elevation=1.05),
        target_position=target,
    )


def demo_config() -> PlannerConfig:
    return PlannerConfig(
        grid=GridSpec(
            dx=0.1, dy=0.1, dh=0.2,
            x_range=(-0.7, 3.3), y_range=(-1.0, 1.3), h_range=(-0.4, 1.2),
        ),
        sigma=0.95,
        ik=IKConfig(
            seeds_per_joint=2, max_seeds=4, max_branches=4,
            max_iterations=45, residual_tol=1e-10,
        ),
        smoothing=SmoothingConfig(
            samples_per_interval=8, max_iterations=60,
            constraint_tol=1e-6, penalty_rounds=5,
        ),
    )


def demo_problem():
    """(model, scene, task, config) of the bundled demonstration."""
    model = demo_robot()
    task = demo_task(model)
    scene = demo_scene(model, task)
    return model, scene, task, demo_config()


def demo_problem_path():
    """Filesystem path of the bundled demonstration problem file."""
    from importlib.resources import files

    return str(files("optiwb").joinpath("data/demo_problem.json"))


def nominal_joint_path():
    """The generating whole-body motion as JointConfig knots (diagnostics)."""
    bases, arms = _nominal_motion()
    return [JointConfig(*bases[i], arms[i]) for i in range(len(bases))]
