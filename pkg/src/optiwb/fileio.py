"""Problem and plan documents (JSON) plus delimiter-separated trace export.

Two versioned formats cross the tool boundary: "optiwb-scene/1" carries the
robot, scene, task, and planner config; "optiwb-plan/1" carries the discrete
trajectory, the smoothed spline and base profile, costs, stats, and a dense
sampling.  Parsing is strict: unknown fields are rejected with
path-qualified messages, and all floats round-trip exactly (shortest-repr
encoding).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import ProblemFormatError
from .kinematics import project_target
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
    validate_problem,
)
from .smoothing import BaseProfile, SmoothingResult, SplineCurve, eval_trajectory_arrays
from .transforms import Transform

SCENE_FORMAT = "optiwb-scene/1"
PLAN_FORMAT = "optiwb-plan/1"


def _floats(x):
    return [float(v) for v in np.asarray(x).ravel()]


def _nested(x):
    return [[float(v) for v in row] for row in np.asarray(x)]


# --------------------------------------------------------------------------
# strict reader
# --------------------------------------------------------------------------

class _Reader:
    """Walks a parsed JSON tree, collecting path-qualified errors."""

    def __init__(self, data):
        self.data = data
        self.errors = []

    def fail(self, path, message):
        self.errors.append(f"{path}: {message}")

    def obj(self, node, path, required, optional=()):
        if not isinstance(node, dict):
            self.fail(path, "expected an object")
            return None
        for key in node:
            if key not in required and key not in optional:
                self.fail(path, f"unknown field '{key}'")
        for key in required:
            if key not in node:
                self.fail(path, f"missing field '{key}'")
        return node

    def number(self, node, path):
        if not isinstance(node, (int, float)) or isinstance(node, bool):
            self.fail(path, "expected a number")
            return 0.0
        return float(node)

    def integer(self, node, path):
        if not isinstance(node, int) or isinstance(node, bool):
            self.fail(path, "expected an integer")
            return 0
        return int(node)

    def array(self, node, path, length=None):
        if not isinstance(node, list):
            self.fail(path, "expected an array")
            return []
        if length is not None and len(node) != length:
            self.fail(path, f"expected {length} entries, got {len(node)}")
        return node

    def vector(self, node, path, length):
        node = self.array(node, path, length)
        return np.array([self.number(v, f"{path}[{i}]") for i, v in enumerate(node)])


def _read_transform(r, node, path):
    node = r.obj(node, path, ("rotation", "translation"))
    if node is None:
        return Transform.identity()
    rot = r.vector(node["rotation"], f"{path}.rotation", 4) if "rotation" in node else None
    tr = r.vector(node["translation"], f"{path}.translation", 3) if "translation" in node else None
    if rot is None or tr is None or np.linalg.norm(rot) == 0:
        return Transform.identity()
    return Transform(rot, tr)


def _read_volume(r, node, path):
    node = r.obj(
        node, path, ("kind",),
        optional=("half_extents", "pose", "radius", "p0", "p1", "vertices"),
    )
    if node is None:
        return None
    kind = node.get("kind")
    if kind == "box":
        he = r.vector(node.get("half_extents", [0, 0, 0]), f"{path}.half_extents", 3)
        pose = _read_transform(r, node.get("pose", {"rotation": [1, 0, 0, 0], "translation": [0, 0, 0]}), f"{path}.pose")
        return geometry.Box(he, pose)
    if kind == "capsule":
        radius = r.number(node.get("radius", 0.0), f"{path}.radius")
        p0 = r.vector(node.get("p0", [0, 0, 0]), f"{path}.p0", 3)
        p1 = r.vector(node.get("p1", [0, 0, 0]), f"{path}.p1", 3)
        return geometry.Capsule(radius, p0, p1)
    if kind == "hull":
        verts = r.array(node.get("vertices", []), f"{path}.vertices")
        pts = np.array([r.vector(v, f"{path}.vertices[{i}]", 3) for i, v in enumerate(verts)]).reshape(-1, 3)
        pose = _read_transform(r, node.get("pose", {"rotation": [1, 0, 0, 0], "translation": [0, 0, 0]}), f"{path}.pose")
        return geometry.ConvexHullVolume(pts, pose)
    r.fail(path, f"unknown volume kind '{kind}'")
    return None


def _volume_doc(v):
    if isinstance(v, geometry.Box):
        return {"kind": "box", "half_extents": _floats(v.half_extents), "pose": _transform_doc(v.pose)}
    if isinstance(v, geometry.Capsule):
        return {"kind": "capsule", "radius": float(v.radius), "p0": _floats(v.p0), "p1": _floats(v.p1)}
    if isinstance(v, geometry.ConvexHullVolume):
        return {"kind": "hull", "vertices": _nested(v.vertices), "pose": _transform_doc(v.pose)}
    raise TypeError(f"unknown volume kind {type(v).__name__}")


def _transform_doc(t: Transform):
    return {"rotation": _floats(t.rotation), "translation": _floats(t.translation)}


def _read_area(r, node, path):
    node = r.obj(node, path, ("kind",), optional=("vertices", "origin", "cell_size", "cells"))
    if node is None:
        return None
    kind = node.get("kind")
    if kind == "polygon":
        verts = r.array(node.get("vertices", []), f"{path}.vertices")
        pts = np.array([r.vector(v, f"{path}.vertices[{i}]", 2) for i, v in enumerate(verts)]).reshape(-1, 2)
        return geometry.Polygon(pts)
    if kind == "grid":
        origin = r.vector(node.get("origin", [0, 0]), f"{path}.origin", 2)
        cell = r.number(node.get("cell_size", 0.0), f"{path}.cell_size")
        cells = np.array(r.array(node.get("cells", []), f"{path}.cells"), dtype=bool)
        return geometry.OccupancyGrid(origin, cell, cells)
    r.fail(path, f"unknown area kind '{kind}'")
    return None


def _area_doc(a):
    if isinstance(a, geometry.Polygon):
        return {"kind": "polygon", "vertices": _nested(a.vertices)}
    if isinstance(a, geometry.OccupancyGrid):
        return {
            "kind": "grid",
            "origin": _floats(a.origin),
            "cell_size": float(a.cell_size),
            "cells": [[int(c) for c in row] for row in a.cells],
        }
    raise TypeError(f"unknown area kind {type(a).__name__}")


def _read_robot(r, node):
    node = r.obj(
        node, "robot",
        ("base_limits", "arm_joints", "arm_mount", "link_volumes", "camera_transform", "camera_ccd"),
    )
    if node is None:
        return None
    bl = r.obj(node.get("base_limits", {}), "robot.base_limits", ("v_max", "omega_max"))
    base = BaseLimits(
        r.number((bl or {}).get("v_max", 0), "robot.base_limits.v_max"),
        r.number((bl or {}).get("omega_max", 0), "robot.base_limits.omega_max"),
    )
    joints = []
    for i, jn in enumerate(r.array(node.get("arm_joints", []), "robot.arm_joints")):
        path = f"robot.arm_joints[{i}]"
        jo = r.obj(jn, path, ("axis", "origin", "pos_min", "pos_max", "vel_max", "acc_max"))
        if jo is None:
            continue
        joints.append(
            ArmJoint(
                r.vector(jo.get("axis", [0, 0, 1]), f"{path}.axis", 3),
                _read_transform(r, jo.get("origin", {}), f"{path}.origin"),
                r.number(jo.get("pos_min", 0), f"{path}.pos_min"),
                r.number(jo.get("pos_max", 0), f"{path}.pos_max"),
                r.number(jo.get("vel_max", 0), f"{path}.vel_max"),
                r.number(jo.get("acc_max", 0), f"{path}.acc_max"),
            )
        )
    volumes = []
    for i, vn in enumerate(r.array(node.get("link_volumes", []), "robot.link_volumes")):
        path = f"robot.link_volumes[{i}]"
        vo = r.obj(vn, path, ("link", "volume"))
        if vo is None:
            continue
        vol = _read_volume(r, vo.get("volume", {}), f"{path}.volume")
        if vol is not None:
            volumes.append(LinkVolume(r.integer(vo.get("link", 0), f"{path}.link"), vol))
    ccd = r.obj(node.get("camera_ccd", {}), "robot.camera_ccd", ("width", "height", "focal"))
    return RobotModel(
        base_limits=base,
        arm_joints=tuple(joints),
        arm_mount=_read_transform(r, node.get("arm_mount", {}), "robot.arm_mount"),
        link_volumes=tuple(volumes),
        camera_transform=_read_transform(r, node.get("camera_transform", {}), "robot.camera_transform"),
        camera_ccd=CameraCCD(
            r.number((ccd or {}).get("width", 0), "robot.camera_ccd.width"),
            r.number((ccd or {}).get("height", 0), "robot.camera_ccd.height"),
            r.number((ccd or {}).get("focal", 0), "robot.camera_ccd.focal"),
        ),
    )


def _robot_doc(m: RobotModel):
    return {
        "base_limits": {"v_max": float(m.base_limits.v_max), "omega_max": float(m.base_limits.omega_max)},
        "arm_joints": [
            {
                "axis": _floats(j.axis),
                "origin": _transform_doc(j.origin),
                "pos_min": float(j.pos_min),
                "pos_max": float(j.pos_max),
                "vel_max": float(j.vel_max),
                "acc_max": float(j.acc_max),
            }
            for j in m.arm_joints
        ],
        "arm_mount": _transform_doc(m.arm_mount),
        "link_volumes": [
            {"link": int(lv.link), "volume": _volume_doc(lv.volume)} for lv in m.link_volumes
        ],
        "camera_transform": _transform_doc(m.camera_transform),
        "camera_ccd": {
            "width": float(m.camera_ccd.width),
            "height": float(m.camera_ccd.height),
            "focal": float(m.camera_ccd.focal),
        },
    }


def _read_scene(r, node):
    node = r.obj(node, "scene", ("obstacles", "forbidden_areas", "sun", "target"))
    if node is None:
        return None
    obstacles = []
    for i, vn in enumerate(r.array(node.get("obstacles", []), "scene.obstacles")):
        vol = _read_volume(r, vn, f"scene.obstacles[{i}]")
        if vol is not None:
            obstacles.append(vol)
    areas = []
    for i, an in enumerate(r.array(node.get("forbidden_areas", []), "scene.forbidden_areas")):
        area = _read_area(r, an, f"scene.forbidden_areas[{i}]")
        if area is not None:
            areas.append(area)
    sn = r.obj(node.get("sun", {}), "scene.sun", ("azimuth", "elevation"))
    return Scene(
        obstacles=tuple(obstacles),
        forbidden_areas=tuple(areas),
        sun=Sun(
            r.number((sn or {}).get("azimuth", 0), "scene.sun.azimuth"),
            r.number((sn or {}).get("elevation", 0), "scene.sun.elevation"),
        ),
        target_position=r.vector(node.get("target", [0, 0, 0]), "scene.target", 3),
    )


def _scene_doc(s: Scene):
    return {
        "obstacles": [_volume_doc(v) for v in s.obstacles],
        "forbidden_areas": [_area_doc(a) for a in s.forbidden_areas],
        "sun": {"azimuth": float(s.sun.azimuth), "elevation": float(s.sun.elevation)},
        "target": _floats(s.target_position),
    }


def _read_task(r, node):
    node = r.obj(node, "task", ("waypoints",))
    if node is None:
        return None
    waypoints = []
    for i, wn in enumerate(r.array(node.get("waypoints", []), "task.waypoints")):
        path = f"task.waypoints[{i}]"
        wo = r.obj(wn, path, ("t", "position", "orientation"), optional=("fixed_joints",))
        if wo is None:
            continue
        fixed = []
        for k, fn in enumerate(r.array(wo.get("fixed_joints", []), f"{path}.fixed_joints")):
            fo = r.obj(fn, f"{path}.fixed_joints[{k}]", ("index", "value"))
            if fo is None:
                continue
            fixed.append(
                FixedJoint(
                    r.integer(fo.get("index", 0), f"{path}.fixed_joints[{k}].index"),
                    r.number(fo.get("value", 0), f"{path}.fixed_joints[{k}].value"),
                )
            )
        waypoints.append(
            Waypoint(
                r.number(wo.get("t", 0), f"{path}.t"),
                r.vector(wo.get("position", [0, 0, 0]), f"{path}.position", 3),
                r.vector(wo.get("orientation", [1, 0, 0, 0]), f"{path}.orientation", 4),
                tuple(fixed),
            )
        )
    return TaskTrajectory(tuple(waypoints))


def _task_doc(t: TaskTrajectory):
    return {
        "waypoints": [
            {
                "t": float(wp.t),
                "position": _floats(wp.position),
                "orientation": _floats(wp.orientation),
                "fixed_joints": [
                    {"index": int(f.index), "value": float(f.value)} for f in wp.fixed_joints
                ],
            }
            for wp in t.waypoints
        ]
    }


def _opt_range(r, node, path):
    if node is None:
        return None
    pair = r.vector(node, path, 2)
    return (float(pair[0]), float(pair[1]))


def _read_config(r, node):
    node = r.obj(node, "config", (), optional=("grid", "sigma", "ik", "smoothing", "rolling_heading_tol"))
    if node is None:
        return PlannerConfig()
    g = r.obj(node.get("grid", {}), "config.grid", (), optional=("dx", "dy", "dh", "x_range", "y_range", "h_range")) or {}
    grid = GridSpec(
        dx=r.number(g.get("dx", 0.1), "config.grid.dx"),
        dy=r.number(g.get("dy", 0.1), "config.grid.dy"),
        dh=r.number(g.get("dh", 0.2), "config.grid.dh"),
        x_range=_opt_range(r, g.get("x_range"), "config.grid.x_range"),
        y_range=_opt_range(r, g.get("y_range"), "config.grid.y_range"),
        h_range=_opt_range(r, g.get("h_range"), "config.grid.h_range"),
    )
    ik_defaults = IKConfig()
    i = r.obj(node.get("ik", {}), "config.ik", (), optional=(
        "residual_tol", "accept_tol", "max_branches", "seeds_per_joint",
        "max_seeds", "max_iterations", "damping")) or {}
    ik = IKConfig(
        residual_tol=r.number(i.get("residual_tol", ik_defaults.residual_tol), "config.ik.residual_tol"),
        accept_tol=r.number(i.get("accept_tol", ik_defaults.accept_tol), "config.ik.accept_tol"),
        max_branches=r.integer(i.get("max_branches", ik_defaults.max_branches), "config.ik.max_branches"),
        seeds_per_joint=r.integer(i.get("seeds_per_joint", ik_defaults.seeds_per_joint), "config.ik.seeds_per_joint"),
        max_seeds=r.integer(i.get("max_seeds", ik_defaults.max_seeds), "config.ik.max_seeds"),
        max_iterations=r.integer(i.get("max_iterations", ik_defaults.max_iterations), "config.ik.max_iterations"),
        damping=r.number(i.get("damping", ik_defaults.damping), "config.ik.damping"),
    )
    sm_defaults = SmoothingConfig()
    s = r.obj(node.get("smoothing", {}), "config.smoothing", (), optional=(
        "samples_per_interval", "max_iterations", "constraint_tol",
        "penalty_initial", "penalty_rounds")) or {}
    smoothing = SmoothingConfig(
        samples_per_interval=r.integer(s.get("samples_per_interval", sm_defaults.samples_per_interval), "config.smoothing.samples_per_interval"),
        max_iterations=r.integer(s.get("max_iterations", sm_defaults.max_iterations), "config.smoothing.max_iterations"),
        constraint_tol=r.number(s.get("constraint_tol", sm_defaults.constraint_tol), "config.smoothing.constraint_tol"),
        penalty_initial=r.number(s.get("penalty_initial", sm_defaults.penalty_initial), "config.smoothing.penalty_initial"),
        penalty_rounds=r.integer(s.get("penalty_rounds", sm_defaults.penalty_rounds), "config.smoothing.penalty_rounds"),
    )
    tol = node.get("rolling_heading_tol")
    return PlannerConfig(
        grid=grid,
        sigma=r.number(node.get("sigma", 0.95), "config.sigma"),
        ik=ik,
        smoothing=smoothing,
        rolling_heading_tol=None if tol is None else r.number(tol, "config.rolling_heading_tol"),
    )


def _config_doc(c: PlannerConfig):
    def rng(v):
        return None if v is None else [float(v[0]), float(v[1])]

    return {
        "grid": {
            "dx": float(c.grid.dx), "dy": float(c.grid.dy), "dh": float(c.grid.dh),
            "x_range": rng(c.grid.x_range), "y_range": rng(c.grid.y_range),
            "h_range": rng(c.grid.h_range),
        },
        "sigma": float(c.sigma),
        "ik": {
            "residual_tol": float(c.ik.residual_tol),
            "accept_tol": float(c.ik.accept_tol),
            "max_branches": int(c.ik.max_branches),
            "seeds_per_joint": int(c.ik.seeds_per_joint),
            "max_seeds": int(c.ik.max_seeds),
            "max_iterations": int(c.ik.max_iterations),
            "damping": float(c.ik.damping),
        },
        "smoothing": {
            "samples_per_interval": int(c.smoothing.samples_per_interval),
            "max_iterations": int(c.smoothing.max_iterations),
            "constraint_tol": float(c.smoothing.constraint_tol),
            "penalty_initial": float(c.smoothing.penalty_initial),
            "penalty_rounds": int(c.smoothing.penalty_rounds),
        },
        "rolling_heading_tol": None if c.rolling_heading_tol is None else float(c.rolling_heading_tol),
    }


# --------------------------------------------------------------------------
# problem documents
# --------------------------------------------------------------------------

def problem_document(model, scene, task, config):
    return {
        "format": SCENE_FORMAT,
        "robot": _robot_doc(model),
        "scene": _scene_doc(scene),
        "task": _task_doc(task),
        "config": _config_doc(config),
    }


def serialize_problem(model, scene, task, config) -> str:
    return json.dumps(problem_document(model, scene, task, config), indent=1) + "\n"


def save_problem(path, model, scene, task, config):
    with open(path, "w") as fh:
        fh.write(serialize_problem(model, scene, task, config))


def parse_problem(text):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError([f"document: invalid JSON ({exc.msg} at line {exc.lineno})"])
    r = _Reader(data)
    top = r.obj(data, "document", ("format", "robot", "scene", "task", "config"))
    if top is not None and top.get("format") != SCENE_FORMAT:
        r.fail("format", f"expected '{SCENE_FORMAT}', got {top.get('format')!r}")
    model = _read_robot(r, (top or {}).get("robot", {}))
    scene = _read_scene(r, (top or {}).get("scene", {}))
    task = _read_task(r, (top or {}).get("task", {}))
    config = _read_config(r, (top or {}).get("config", {}))
    if r.errors:
        raise ProblemFormatError(r.errors)
    problems = validate_problem(model, scene, task) + config.violations()
    if problems:
        raise ProblemFormatError(problems)
    return model, scene, task, config


def load_problem(path):
    """Parse and fully validate a problem file; raises ProblemFormatError
    carrying every path-qualified defect found."""
    with open(path) as fh:
        return parse_problem(fh.read())


# --------------------------------------------------------------------------
# plan documents
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PlanData:
    """Re-loaded plan: the discrete knots and, when present, the smoothed
    spline-backed trajectory."""

    discrete: tuple
    trajectory: JointTrajectory | None
    costs: CostBreakdown
    seed_costs: CostBreakdown | None
    stats: dict
    sample_rate: float


def _cost_doc(c: CostBreakdown):
    return {"total": float(c.total), "tv": float(c.tv_integral), "snv": float(c.snv_integral)}


def plan_document(result, sample_rate=10.0):
    """Plan document from a SmoothingResult or a grid (DP) solution."""
    if isinstance(result, SmoothingResult):
        traj = result.trajectory
        knot_times = traj.base_profile.knot_times
        arm_at = traj.arm_spline.eval(knot_times)
        discrete = [
            {
                "t": float(t),
                "base": [float(traj.base_profile.knot_xy[i, 0]),
                         float(traj.base_profile.knot_xy[i, 1]),
                         float(traj.base_profile.knot_h[i])],
                "arm": _floats(arm_at[i]),
            }
            for i, t in enumerate(knot_times)
        ]
        n_samples = int(np.floor(traj.duration * sample_rate + 1e-9)) + 1
        ts = np.arange(n_samples) / sample_rate
        q, _, _ = eval_trajectory_arrays(traj, ts)
        sampled = [
            {"t": float(t), "q": _floats(row)} for t, row in zip(ts, q)
        ]
        prof = traj.base_profile
        doc = {
            "format": PLAN_FORMAT,
            "discrete_trajectory": discrete,
            "spline": {
                "knots": _floats(traj.arm_spline.knots),
                "control_points": _nested(traj.arm_spline.coefficients),
            },
            "base_profile": {
                "knot_times": _floats(prof.knot_times),
                "knot_xy": _nested(prof.knot_xy),
                "knot_h": _floats(prof.knot_h),
                "seg_bounds": _nested(prof.seg_bounds),
                "seg_xy0": _nested(prof.seg_xy0),
                "seg_vel": _nested(prof.seg_vel),
                "seg_h0": _floats(prof.seg_h0),
                "seg_hdot": _floats(prof.seg_hdot),
                "timing_excess": _floats(prof.timing_excess),
                "timing_total": _floats(prof.timing_total),
            },
            "costs": _cost_doc(result.cost),
            "seed_costs": _cost_doc(result.seed_cost),
            "stats": {
                "iterations": int(result.iterations),
                "converged": bool(result.converged),
                "max_violation": float(result.max_violation),
            },
            "sample_rate": float(sample_rate),
            "sampled_trajectory": sampled,
        }
        return doc
    # discrete grid solution
    discrete = [
        {"t": float(t), "base": _floats(q.base), "arm": _floats(q.arm)}
        for t, q in result.trajectory
    ]
    return {
        "format": PLAN_FORMAT,
        "discrete_trajectory": discrete,
        "spline": None,
        "base_profile": None,
        "costs": _cost_doc(result.cost),
        "seed_costs": None,
        "stats": _jsonable(result.stats),
        "sample_rate": None,
        "sampled_trajectory": None,
    }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    return x


def serialize_plan(result, sample_rate=10.0) -> str:
    return json.dumps(plan_document(result, sample_rate), indent=1) + "\n"


def save_plan(path, result, sample_rate=10.0):
    """Write a plan document (smoothed results carry the spline, the base
    profile, and a dense sampling at `sample_rate`)."""
    with open(path, "w") as fh:
        fh.write(serialize_plan(result, sample_rate))


def parse_plan(text) -> PlanData:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError([f"document: invalid JSON ({exc.msg} at line {exc.lineno})"])
    r = _Reader(data)
    top = r.obj(
        data, "document",
        ("format", "discrete_trajectory", "spline", "base_profile", "costs",
         "seed_costs", "stats", "sample_rate", "sampled_trajectory"),
    )
    if top is not None and top.get("format") != PLAN_FORMAT:
        r.fail("format", f"expected '{PLAN_FORMAT}', got {top.get('format')!r}")
    discrete = []
    for i, dn in enumerate(r.array((top or {}).get("discrete_trajectory", []), "discrete_trajectory")):
        path = f"discrete_trajectory[{i}]"
        do = r.obj(dn, path, ("t", "base", "arm"))
        if do is None:
            continue
        base = r.vector(do.get("base", [0, 0, 0]), f"{path}.base", 3)
        arm = np.array([r.number(v, f"{path}.arm[{k}]") for k, v in enumerate(r.array(do.get("arm", []), f"{path}.arm"))])
        discrete.append((r.number(do.get("t", 0), f"{path}.t"), JointConfig(base[0], base[1], base[2], arm)))

    trajectory = None
    sp = (top or {}).get("spline")
    bp = (top or {}).get("base_profile")
    if sp is not None and bp is not None:
        so = r.obj(sp, "spline", ("knots", "control_points"))
        po = r.obj(
            bp, "base_profile",
            ("knot_times", "knot_xy", "knot_h", "seg_bounds", "seg_xy0",
             "seg_vel", "seg_h0", "seg_hdot", "timing_excess", "timing_total"),
        )
        if so is not None and po is not None:
            spline = SplineCurve(
                np.array(so.get("knots", []), dtype=float),
                np.array(so.get("control_points", []), dtype=float),
            )
            profile = BaseProfile(
                np.array(po.get("knot_times", []), dtype=float),
                np.array(po.get("knot_xy", []), dtype=float).reshape(-1, 2),
                np.array(po.get("knot_h", []), dtype=float),
                np.array(po.get("seg_bounds", []), dtype=float).reshape(-1, 2),
                np.array(po.get("seg_xy0", []), dtype=float).reshape(-1, 2),
                np.array(po.get("seg_vel", []), dtype=float).reshape(-1, 2),
                np.array(po.get("seg_h0", []), dtype=float),
                np.array(po.get("seg_hdot", []), dtype=float),
                np.array(po.get("timing_excess", []), dtype=float),
                np.array(po.get("timing_total", []), dtype=float),
            )
            trajectory = JointTrajectory.from_spline(spline, profile)

    co = r.obj((top or {}).get("costs", {}), "costs", ("total", "tv", "snv"))
    costs = CostBreakdown(
        r.number((co or {}).get("total", 0), "costs.total"),
        r.number((co or {}).get("tv", 0), "costs.tv"),
        r.number((co or {}).get("snv", 0), "costs.snv"),
    )
    seed = (top or {}).get("seed_costs")
    seed_costs = None
    if seed is not None:
        so = r.obj(seed, "seed_costs", ("total", "tv", "snv"))
        seed_costs = CostBreakdown(
            r.number((so or {}).get("total", 0), "seed_costs.total"),
            r.number((so or {}).get("tv", 0), "seed_costs.tv"),
            r.number((so or {}).get("snv", 0), "seed_costs.snv"),
        )
    if r.errors:
        raise ProblemFormatError(r.errors)
    rate = (top or {}).get("sample_rate")
    return PlanData(
        discrete=tuple(discrete),
        trajectory=trajectory,
        costs=costs,
        seed_costs=seed_costs,
        stats=(top or {}).get("stats", {}) or {},
        sample_rate=float(rate) if rate is not None else 0.0,
    )


def load_plan(path) -> PlanData:
    with open(path) as fh:
        return parse_plan(fh.read())


# --------------------------------------------------------------------------
# trace export
# --------------------------------------------------------------------------

def export_traces(path, result, scene, model, sample_rate=10.0):
    """CSV traces: per-sample joint values, image-plane target coordinates,
    and both performance indices."""
    from .objective import snv_cost, tv_cost

    if isinstance(result, SmoothingResult) or (
        isinstance(result, PlanData) and result.trajectory is not None
    ):
        traj = result.trajectory
        n_samples = int(np.floor(traj.duration * sample_rate + 1e-9)) + 1
        ts = np.arange(n_samples) / sample_rate
        q, q_dot, _ = eval_trajectory_arrays(traj, ts)
        rows = [(t, q[i], q_dot[i]) for i, t in enumerate(ts)]
    else:
        samples = result.trajectory if not isinstance(result, PlanData) else result.discrete
        rows = []
        prev = None
        for t, cfg in samples:
            if prev is None:
                q_dot = np.zeros(model.n)
            else:
                from .objective import config_rates

                q_dot = config_rates(prev[1], cfg, t - prev[0])
            rows.append((t, cfg.q, q_dot))
            prev = (t, cfg)

    n_arm = model.n_arm
    header = ["t", "x", "y", "h"] + [f"arm_{i + 1}" for i in range(n_arm)] + [
        "u", "v", "tv", "snv",
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t, q, q_dot in rows:
            proj = project_target(model, q[:3], scene.target_position)
            u = repr(proj.u) if proj is not None else ""
            v = repr(proj.v) if proj is not None else ""
            writer.writerow(
                [repr(float(t))]
                + [repr(float(x)) for x in q]
                + [u, v, repr(tv_cost(model, q[:3], scene.target_position)), repr(snv_cost(q_dot))]
            )
