"""Shared fixtures: the bundled rover model and small synthetic problems.

Small planning instances are generated from a feasible whole-body motion
(waypoints are forward kinematics of that motion), so every instance admits
at least one grid path and randomized tests never chase phantom
infeasibility.
"""

import numpy as np
import pytest

from optiwb.demo import THIRD_JOINT_VALUE, demo_robot
from optiwb.kinematics import forward_kinematics_arrays
from optiwb.model import (
    FixedJoint,
    GridSpec,
    IKConfig,
    PlannerConfig,
    Scene,
    SmoothingConfig,
    Sun,
    TaskTrajectory,
    Waypoint,
)
from optiwb.transforms import quat_from_matrix

NOMINAL_ARM = np.array([0.05, 1.30, THIRD_JOINT_VALUE, 1.45, 0.05, 0.80, 0.10])


@pytest.fixture(scope="session")
def model():
    return demo_robot()


def task_from_motion(model, bases, arms, dt=1.0):
    """TaskTrajectory whose waypoints are FK of the given base/arm knots."""
    bases = np.asarray(bases, dtype=float)
    arms = np.asarray(arms, dtype=float)
    rr, tt = forward_kinematics_arrays(model, bases, arms)
    wps = tuple(
        Waypoint(
            i * dt, tt[i], quat_from_matrix(rr[i]),
            (FixedJoint(2, float(arms[i, 2])),),
        )
        for i in range(len(bases))
    )
    return TaskTrajectory(wps)


def empty_scene(target=(2.0, 0.5, 0.05), sun=(0.3, 1.0)):
    return Scene((), (), Sun(*sun), np.asarray(target, dtype=float))


def small_config(x_range, y_range, h_range, **kw):
    defaults = dict(
        grid=GridSpec(0.1, 0.1, 0.2, x_range=x_range, y_range=y_range, h_range=h_range),
        sigma=0.95,
        ik=IKConfig(max_seeds=4, max_branches=2, max_iterations=45),
        smoothing=SmoothingConfig(samples_per_interval=6, max_iterations=15, penalty_rounds=2),
    )
    defaults.update(kw)
    return PlannerConfig(**defaults)


def wiggle_motion(rng, n, start=(-0.4, -0.55, 0.0), arm=NOMINAL_ARM):
    """Feasible base knots on the 0.1 m grid plus a smooth arm wiggle.

    Moves are straight steps along the heading (which stays on the heading
    grid); occasional turn-in-place knots change heading by one step.
    """
    bases = np.zeros((n, 3))
    x, y, h = start
    for i in range(n):
        bases[i] = (x, y, h)
        if rng.random() < 0.25:
            h = np.round(h + rng.choice([-0.2, 0.2]), 10)
        elif abs(h) < 1e-9:
            x = np.round(x + 0.1, 10)
        else:
            # only cardinal headings move to stay aligned with the grid
            pass
    arms = np.tile(arm, (n, 1))
    t = np.arange(n)
    for j in [0, 1, 3, 5]:
        arms[:, j] = arms[:, j] + 0.06 * np.sin(0.4 * t + rng.uniform(0, 6.28) + j)
    return bases, arms
