"""Convex collision primitives, ray casts, and planar containment tests.

Three convex volume kinds are supported: boxes, capsules, and convex point
hulls.  Generic pairs run a support-function GJK distance query; box and
capsule pairs take closed-form fast paths.  Batched variants (one volume
posed by many rigid transforms) back the planner's hot loops and must agree
with the scalar operations bit-for-bit on shared inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .transforms import Transform

GJK_TOL = 1e-9
_EPS = 1e-12


# --------------------------------------------------------------------------
# volume types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    """Oriented box given by half extents and a pose."""

    half_extents: np.ndarray
    pose: Transform = field(default_factory=Transform.identity)

    def __post_init__(self):
        object.__setattr__(
            self, "half_extents", np.asarray(self.half_extents, dtype=float).reshape(3)
        )

    def transformed(self, t: Transform) -> "Box":
        return Box(self.half_extents, t.compose(self.pose))

    def corners(self):
        signs = np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
            dtype=float,
        )
        return self.pose.apply(signs * self.half_extents)

    def support(self, direction):
        local = self.pose.rotation_matrix.T @ direction
        corner = np.where(local >= 0.0, self.half_extents, -self.half_extents)
        return self.pose.apply(corner)

    @property
    def center(self):
        return self.pose.translation

    def bounding_radius(self):
        return float(np.linalg.norm(self.half_extents))


@dataclass(frozen=True)
class Capsule:
    """Sphere-swept segment: all points within `radius` of [p0, p1]."""

    radius: float
    p0: np.ndarray
    p1: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p0", np.asarray(self.p0, dtype=float).reshape(3))
        object.__setattr__(self, "p1", np.asarray(self.p1, dtype=float).reshape(3))

    def transformed(self, t: Transform) -> "Capsule":
        return Capsule(self.radius, t.apply(self.p0), t.apply(self.p1))

    def support(self, direction):
        n = np.linalg.norm(direction)
        unit = direction / n if n > 0 else np.array([1.0, 0.0, 0.0])
        base = self.p1 if direction @ (self.p1 - self.p0) >= 0 else self.p0
        return base + self.radius * unit

    @property
    def center(self):
        return 0.5 * (self.p0 + self.p1)

    def bounding_radius(self):
        return 0.5 * float(np.linalg.norm(self.p1 - self.p0)) + self.radius


@dataclass(frozen=True)
class ConvexHullVolume:
    """Convex hull of a point set, posed by a rigid transform."""

    vertices: np.ndarray
    pose: Transform = field(default_factory=Transform.identity)

    def __post_init__(self):
        object.__setattr__(
            self, "vertices", np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        )

    def transformed(self, t: Transform) -> "ConvexHullVolume":
        return ConvexHullVolume(self.vertices, t.compose(self.pose))

    def world_vertices(self):
        return self.pose.apply(self.vertices)

    def support(self, direction):
        world = self.world_vertices()
        return world[int(np.argmax(world @ direction))]

    @property
    def center(self):
        return self.world_vertices().mean(axis=0)

    def bounding_radius(self):
        c = self.vertices.mean(axis=0)
        return float(np.max(np.linalg.norm(self.vertices - c, axis=1)))


ConvexVolume = Box | Capsule | ConvexHullVolume


def volume_violations(v, name="volume"):
    """Validity defects of a convex volume descriptor (empty list if valid)."""
    out = []
    if isinstance(v, Box):
        if not np.all(v.half_extents > 0):
            out.append(f"{name}: box half extents must be positive")
    elif isinstance(v, Capsule):
        if not v.radius > 0:
            out.append(f"{name}: capsule radius must be positive")
    elif isinstance(v, ConvexHullVolume):
        if len(v.vertices) < 4:
            out.append(f"{name}: hull needs at least 4 vertices")
        else:
            span = v.vertices - v.vertices[0]
            if np.linalg.matrix_rank(span, tol=1e-9) < 3:
                out.append(f"{name}: hull vertices are coplanar")
    else:
        out.append(f"{name}: unknown volume kind {type(v).__name__}")
    return out


@dataclass(frozen=True)
class Ray:
    """Half line from `origin` along unit `direction` (parameter s >= 0)."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(3))
        d = np.asarray(self.direction, dtype=float).reshape(3)
        n = np.linalg.norm(d)
        if n == 0:
            raise ValueError("ray direction must be nonzero")
        object.__setattr__(self, "direction", d / n)


# --------------------------------------------------------------------------
# planar regions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Polygon:
    """Simple planar polygon; containment counts the boundary as inside."""

    vertices: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "vertices", np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        )

    def violations(self, name="polygon"):
        out = []
        v = self.vertices
        if len(v) < 3:
            out.append(f"{name}: needs at least 3 vertices")
            return out
        if _polygon_self_intersects(v):
            out.append(f"{name}: edges self-intersect")
        return out


@dataclass(frozen=True)
class OccupancyGrid:
    """Raster forbidden map: cells[iy, ix] True means the cell is forbidden."""

    origin: np.ndarray
    cell_size: float
    cells: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(2))
        object.__setattr__(self, "cells", np.asarray(self.cells, dtype=bool))

    def violations(self, name="grid"):
        out = []
        if not self.cell_size > 0:
            out.append(f"{name}: cell size must be positive")
        if self.cells.ndim != 2:
            out.append(f"{name}: cells must be a 2-D array")
        return out


def _segments_properly_cross(a0, a1, b0, b1):
    d1 = np.cross(b1 - b0, a0 - b0)
    d2 = np.cross(b1 - b0, a1 - b0)
    d3 = np.cross(a1 - a0, b0 - a0)
    d4 = np.cross(a1 - a0, b1 - a0)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def _polygon_self_intersects(verts):
    n = len(verts)
    for i in range(n):
        a0, a1 = verts[i], verts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # shared endpoints are fine
            b0, b1 = verts[j], verts[(j + 1) % n]
            if _segments_properly_cross(a0, a1, b0, b1):
                return True
    return False


def points_in_polygon(points, polygon: Polygon):
    """Boundary-inclusive containment for a batch of (B, 2) points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    v = polygon.vertices
    x = pts[:, 0:1]
    y = pts[:, 1:2]
    x1, y1 = v[:, 0][None, :], v[:, 1][None, :]
    x2 = np.roll(v[:, 0], -1)[None, :]
    y2 = np.roll(v[:, 1], -1)[None, :]

    # boundary test: point within 1e-12 of any edge segment
    ex, ey = x2 - x1, y2 - y1
    elen2 = ex * ex + ey * ey
    t = np.clip(((x - x1) * ex + (y - y1) * ey) / np.where(elen2 == 0, 1.0, elen2), 0, 1)
    dx = x - (x1 + t * ex)
    dy = y - (y1 + t * ey)
    on_edge = (dx * dx + dy * dy) <= _EPS**2
    scale = max(1.0, float(np.max(np.abs(v))))
    on_edge |= (dx * dx + dy * dy) <= (1e-12 * scale) ** 2

    # even-odd crossing count with half-open vertical rule
    crosses = (y1 > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x1 + (y - y1) * ex / np.where(ey == 0, 1.0, ey)
    hits = crosses & (xint > x)
    inside = (hits.sum(axis=1) % 2).astype(bool)
    return inside | on_edge.any(axis=1)


def points_in_grid(points, grid: OccupancyGrid):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    idx = np.floor((pts - grid.origin) / grid.cell_size).astype(int)
    ny, nx = grid.cells.shape
    ix, iy = idx[:, 0], idx[:, 1]
    ok = (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny)
    out = np.zeros(len(pts), dtype=bool)
    out[ok] = grid.cells[iy[ok], ix[ok]]
    return out


def point_in_forbidden(p, areas) -> bool:
    """True iff p lies in any forbidden polygon (boundary included) or cell."""
    return bool(points_in_forbidden(np.asarray(p, dtype=float)[None, :], areas)[0])


def points_in_forbidden(points, areas):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    hit = np.zeros(len(pts), dtype=bool)
    for area in areas:
        if isinstance(area, Polygon):
            hit |= points_in_polygon(pts, area)
        elif isinstance(area, OccupancyGrid):
            hit |= points_in_grid(pts, area)
        else:
            raise TypeError(f"unknown forbidden-area kind {type(area).__name__}")
    return hit


def sun_ray(scene) -> Ray:
    """Ray from the scene target toward the sun (treated as infinitely far)."""
    theta = scene.sun.elevation
    psi = scene.sun.azimuth
    direction = np.array(
        [np.cos(theta) * np.cos(psi), np.cos(theta) * np.sin(psi), np.sin(theta)]
    )
    return Ray(scene.target_position, direction)


# --------------------------------------------------------------------------
# closed-form distances
# --------------------------------------------------------------------------

def segment_segment_distance(p0, p1, q0, q1):
    return float(
        segment_segment_distance_batch(
            np.asarray(p0, float)[None], np.asarray(p1, float)[None],
            np.asarray(q0, float)[None], np.asarray(q1, float)[None],
        )[0]
    )


def segment_segment_distance_batch(p0, p1, q0, q1):
    """Min distance between segments [p0,p1] and [q0,q1], batched over rows."""
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = np.einsum("...i,...i->...", d1, d1)
    e = np.einsum("...i,...i->...", d2, d2)
    f = np.einsum("...i,...i->...", d2, r)
    c = np.einsum("...i,...i->...", d1, r)
    b = np.einsum("...i,...i->...", d1, d2)
    denom = a * e - b * b

    s = np.where(denom > _EPS, np.clip((b * f - c * e) / np.where(denom > _EPS, denom, 1.0), 0.0, 1.0), 0.0)
    safe_e = np.where(e > _EPS, e, 1.0)
    t = np.where(e > _EPS, (b * s + f) / safe_e, 0.0)

    # re-clamp t, then recompute s under the clamped t
    t_cl = np.clip(t, 0.0, 1.0)
    safe_a = np.where(a > _EPS, a, 1.0)
    s = np.where(
        (t_cl != t) | (e <= _EPS),
        np.clip((b * t_cl - c) / safe_a, 0.0, 1.0),
        s,
    )
    s = np.where(a > _EPS, s, 0.0)
    closest1 = p0 + s[..., None] * d1
    closest2 = q0 + t_cl[..., None] * d2
    return np.linalg.norm(closest1 - closest2, axis=-1)


def _aabb_point_distance(points, half_extents):
    d = np.maximum(np.abs(points) - half_extents, 0.0)
    return np.sqrt(np.einsum("...i,...i->...", d, d))


def segment_aabb_distance_batch(a, b, half_extents, iters=60):
    """Min distance from segments (in box frame) to origin-centered AABBs.

    `half_extents` may be (3,) or per-row (B, 3).  The squared point-to-AABB
    distance is convex along the segment, so a ternary search converges to
    the global minimum; both probes per step run as one vector op.
    """
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    he = np.atleast_2d(np.asarray(half_extents, dtype=float))
    lo = np.zeros(a.shape[0])
    hi = np.ones(a.shape[0])
    ab = b - a
    for _ in range(iters):
        third = (hi - lo) / 3.0
        m = np.stack([lo + third, hi - third])
        p = a[None] + m[:, :, None] * ab[None]
        d = np.maximum(np.abs(p) - he[None], 0.0)
        f = np.einsum("sbi,sbi->sb", d, d)
        take_left = f[0] <= f[1]
        hi = np.where(take_left, m[1], hi)
        lo = np.where(take_left, lo, m[0])
    mid = 0.5 * (lo + hi)
    cand = np.stack(
        [
            _aabb_point_distance(a + mid[:, None] * ab, he),
            _aabb_point_distance(a, he),
            _aabb_point_distance(b, he),
        ]
    )
    return cand.min(axis=0)


def obb_obb_intersect_batch(r1, t1, he1, r2, t2, he2):
    """Separating-axis test for oriented box pairs, batched over rows.

    r1/t1 may be (B,3,3)/(B,3) while r2/t2 broadcast; touching counts as
    intersecting.
    """
    r1 = np.asarray(r1, float)
    t1 = np.asarray(t1, float)
    r2 = np.asarray(r2, float)
    t2 = np.asarray(t2, float)
    rel = np.einsum("...ji,...jk->...ik", r1, r2)  # r1^T r2
    t = np.einsum("...ji,...j->...i", r1, t2 - t1)
    abs_rel = np.abs(rel) + 1e-12

    sep = np.zeros(t.shape[:-1], dtype=bool)
    # axes of box 1
    for i in range(3):
        ra = he1[i]
        rb = abs_rel[..., i, :] @ he2
        sep |= np.abs(t[..., i]) > ra + rb
    # axes of box 2
    for j in range(3):
        ra = abs_rel[..., :, j] @ he1
        rb = he2[j]
        sep |= np.abs(np.einsum("...i,...i->...", t, rel[..., :, j])) > ra + rb
    # cross products of edges
    for i in range(3):
        i1, i2 = (i + 1) % 3, (i + 2) % 3
        for j in range(3):
            j1, j2 = (j + 1) % 3, (j + 2) % 3
            ra = he1[i1] * abs_rel[..., i2, j] + he1[i2] * abs_rel[..., i1, j]
            rb = he2[j1] * abs_rel[..., i, j2] + he2[j2] * abs_rel[..., i, j1]
            lhs = np.abs(
                t[..., i2] * rel[..., i1, j] - t[..., i1] * rel[..., i2, j]
            )
            sep |= lhs > ra + rb
    return ~sep


# --------------------------------------------------------------------------
# GJK distance (generic convex pairs)
# --------------------------------------------------------------------------

def _closest_on_segment(a, b):
    ab = b - a
    denom = ab @ ab
    if denom < _EPS:
        return a, [0]
    t = -(a @ ab) / denom
    if t <= 0.0:
        return a, [0]
    if t >= 1.0:
        return b, [1]
    return a + t * ab, [0, 1]


def _closest_on_triangle(a, b, c):
    ab = b - a
    ac = c - a
    ap = -a
    d1 = ab @ ap
    d2 = ac @ ap
    if d1 <= 0 and d2 <= 0:
        return a, [0]
    bp = -b
    d3 = ab @ bp
    d4 = ac @ bp
    if d3 >= 0 and d4 <= d3:
        return b, [1]
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        v = d1 / (d1 - d3) if d1 != d3 else 0.0
        return a + v * ab, [0, 1]
    cp = -c
    d5 = ab @ cp
    d6 = ac @ cp
    if d6 >= 0 and d5 <= d6:
        return c, [2]
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        w = d2 / (d2 - d6) if d2 != d6 else 0.0
        return a + w * ac, [0, 2]
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return b + w * (c - b), [1, 2]
    denom = va + vb + vc
    v = vb / denom
    w = vc / denom
    return a + ab * v + ac * w, [0, 1, 2]


def _closest_on_simplex(simplex):
    """Closest point to the origin on a 1-4 point simplex, plus the
    retained vertex indices."""
    pts = simplex
    if len(pts) == 1:
        return pts[0], [0]
    if len(pts) == 2:
        return _closest_on_segment(pts[0], pts[1])
    if len(pts) == 3:
        return _closest_on_triangle(pts[0], pts[1], pts[2])
    a, b, c, d = pts
    faces = [
        ((a, b, c), [0, 1, 2], d),
        ((a, c, d), [0, 2, 3], b),
        ((a, d, b), [0, 3, 1], c),
        ((b, d, c), [1, 3, 2], a),
    ]
    # a flat tetrahedron is just its faces; never claim containment for one
    vol = np.cross(b - a, c - a) @ (d - a)
    scale = (
        np.linalg.norm(b - a) * np.linalg.norm(c - a) * np.linalg.norm(d - a)
    )
    degenerate = abs(vol) <= 1e-12 * max(scale, _EPS)
    best = None
    best_idx = None
    for (fa, fb, fc), idx, other in faces:
        n = np.cross(fb - fa, fc - fa)
        strictly_outside = ((-fa) @ n) * ((other - fa) @ n) < 0
        if strictly_outside or degenerate:
            p, sub = _closest_on_triangle(fa, fb, fc)
            if best is None or p @ p < best @ best:
                best = p
                best_idx = [idx[k] for k in sub]
    if best is None:
        return np.zeros(3), [0, 1, 2, 3]
    return best, best_idx


def gjk_distance(support_a, support_b, center_a, center_b, tol=GJK_TOL, max_iter=200):
    """Distance between two convex sets given their support functions.

    Returns 0.0 when the sets intersect (within tol).
    """
    d0 = np.asarray(center_a, float) - np.asarray(center_b, float)
    if np.linalg.norm(d0) < _EPS:
        d0 = np.array([1.0, 0.0, 0.0])

    def support(direction):
        return support_a(direction) - support_b(-direction)

    simplex = [support(d0)]
    v = simplex[0]
    for _ in range(max_iter):
        dist = np.linalg.norm(v)
        if dist < tol:
            return 0.0
        w = support(-v)
        # duality gap: the support plane bounds the true distance below by
        # (v . w) / |v|, so dist is final once the gap closes
        gap = dist - (v / dist) @ w
        if gap < tol:
            return dist
        for p in simplex:
            if np.linalg.norm(p - w) < 1e-14:
                return dist
        simplex.append(w)
        v, keep = _closest_on_simplex(simplex)
        simplex = [simplex[k] for k in keep]
        if len(simplex) == 4:
            return 0.0
    return float(np.linalg.norm(v))


# --------------------------------------------------------------------------
# public intersection tests
# --------------------------------------------------------------------------

def volumes_intersect(a: ConvexVolume, b: ConvexVolume) -> bool:
    """True iff two convex volumes share at least one point (touch counts)."""
    if isinstance(a, Box) and isinstance(b, Box):
        return bool(
            obb_obb_intersect_batch(
                a.pose.rotation_matrix[None], a.pose.translation[None], a.half_extents,
                b.pose.rotation_matrix, b.pose.translation, b.half_extents,
            )[0]
        )
    if isinstance(a, Capsule) and isinstance(b, Capsule):
        d = segment_segment_distance(a.p0, a.p1, b.p0, b.p1)
        return d <= a.radius + b.radius + GJK_TOL
    if isinstance(a, Box) and isinstance(b, Capsule):
        return _box_capsule_intersect(a, b)
    if isinstance(a, Capsule) and isinstance(b, Box):
        return _box_capsule_intersect(b, a)
    dist = gjk_distance(a.support, b.support, a.center, b.center)
    return dist <= GJK_TOL


def _box_capsule_intersect(box: Box, cap: Capsule) -> bool:
    inv = box.pose.inverse()
    a = inv.apply(cap.p0)
    b = inv.apply(cap.p1)
    d = segment_aabb_distance_batch(a[None], b[None], box.half_extents)[0]
    return d <= cap.radius + GJK_TOL


def ray_intersects_volume(ray: Ray, v: ConvexVolume) -> bool:
    """True iff the half line meets the closed volume."""
    if isinstance(v, Box):
        inv = v.pose.inverse()
        o = inv.apply(ray.origin)
        d = inv.rotation_matrix @ ray.direction
        return bool(_ray_aabb_hit(o[None], d[None], v.half_extents)[0])
    if isinstance(v, Capsule):
        return ray_segment_distance(ray, v.p0, v.p1) <= v.radius + GJK_TOL
    if isinstance(v, ConvexHullVolume):
        eqs = _hull_equations(_hashable_vertices(v.vertices))
        rot = v.pose.rotation_matrix
        normals = eqs[:, :3] @ rot.T  # world-frame facet normals
        offsets = -eqs[:, 3] + normals @ v.pose.translation
        return _ray_halfspaces_hit(ray.origin, ray.direction, normals, offsets)
    raise TypeError(f"unknown volume kind {type(v).__name__}")


def _hashable_vertices(verts):
    return tuple(map(tuple, np.asarray(verts, float)))


@lru_cache(maxsize=256)
def _hull_equations(verts_key):
    from scipy.spatial import ConvexHull

    verts = np.asarray(verts_key, dtype=float)
    return ConvexHull(verts).equations.copy()


def _ray_halfspaces_hit(origin, direction, normals, offsets):
    """Clip s >= 0 against n.x <= offset half-spaces."""
    smin, smax = 0.0, np.inf
    num = offsets - normals @ origin
    den = normals @ direction
    for k in range(len(num)):
        if abs(den[k]) < _EPS:
            if num[k] < -GJK_TOL:
                return False
            continue
        s = num[k] / den[k]
        if den[k] > 0:
            smax = min(smax, s)
        else:
            smin = max(smin, s)
        if smin > smax + GJK_TOL:
            return False
    return smin <= smax + GJK_TOL


def _ray_aabb_hit(o, d, half_extents):
    """Slab test for rays in box frame, batched over rows."""
    o = np.atleast_2d(o)
    d = np.atleast_2d(d)
    tmin = np.zeros(o.shape[0])
    tmax = np.full(o.shape[0], np.inf)
    miss = np.zeros(o.shape[0], dtype=bool)
    for i in range(3):
        parallel = np.abs(d[:, i]) < _EPS
        miss |= parallel & (np.abs(o[:, i]) > half_extents[i] + GJK_TOL)
        safe = np.where(parallel, 1.0, d[:, i])
        t1 = (-half_extents[i] - o[:, i]) / safe
        t2 = (half_extents[i] - o[:, i]) / safe
        lo = np.minimum(t1, t2)
        hi = np.maximum(t1, t2)
        tmin = np.where(parallel, tmin, np.maximum(tmin, lo))
        tmax = np.where(parallel, tmax, np.minimum(tmax, hi))
    return ~miss & (tmin <= tmax + GJK_TOL)


def ray_segment_distance(ray: Ray, a, b):
    return float(
        ray_segment_distance_batch(
            ray.origin, ray.direction, np.asarray(a, float)[None], np.asarray(b, float)[None]
        )[0]
    )


def ray_segment_distance_batch(origin, direction, a, b):
    """Min distance between a ray (s >= 0, unit direction) and segments.

    The squared distance is convex over {s >= 0} x {0 <= t <= 1}, so the
    minimizer is the unconstrained critical point when feasible, otherwise
    it lies on one of the three boundary faces, each solved exactly.
    """
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    d1 = np.asarray(direction, float)
    d2 = b - a
    r = origin - a
    e = np.einsum("ij,ij->i", d2, d2)
    c = r @ d1  # d1 . r
    g = np.einsum("ij,ij->i", d2, r)  # d2 . r
    bb = d2 @ d1  # d1 . d2
    denom = e - bb * bb
    safe_e = np.where(e > _EPS, e, 1.0)

    cands = []
    # unconstrained critical point, clamped then re-optimized coordinatewise
    s_int = np.where(denom > _EPS, (bb * g - c * e) / np.where(denom > _EPS, denom, 1.0), 0.0)
    s0 = np.maximum(s_int, 0.0)
    t0 = np.clip((g + bb * s0) / safe_e, 0.0, 1.0)
    cands.append((np.maximum(bb * t0 - c, 0.0), t0))
    # segment endpoint faces t = 0, 1 with optimal s
    for t_fix in (0.0, 1.0):
        t_arr = np.full(a.shape[0], t_fix)
        cands.append((np.maximum(bb * t_arr - c, 0.0), t_arr))
    # ray origin face s = 0 with optimal t
    cands.append((np.zeros(a.shape[0]), np.clip(g / safe_e, 0.0, 1.0)))

    best = np.full(a.shape[0], np.inf)
    for s_c, t_c in cands:
        diff = r + s_c[:, None] * d1 - t_c[:, None] * d2
        best = np.minimum(best, np.linalg.norm(diff, axis=1))
    return best


# --------------------------------------------------------------------------
# batched volume tests for the planner
# --------------------------------------------------------------------------

def _pose_arrays(volume, rotations, translations):
    """World-frame pose data for `volume` under a batch of link transforms."""
    if isinstance(volume, Box):
        r_loc = volume.pose.rotation_matrix
        t_loc = volume.pose.translation
        r = rotations @ r_loc
        t = np.einsum("bij,j->bi", rotations, t_loc) + translations
        return r, t
    if isinstance(volume, Capsule):
        p0 = np.einsum("bij,j->bi", rotations, volume.p0) + translations
        p1 = np.einsum("bij,j->bi", rotations, volume.p1) + translations
        return p0, p1
    raise TypeError("batched pose path supports boxes and capsules only")


def batch_volume_intersects(volume, rotations, translations, other):
    """Intersections of `volume` (posed by a batch of transforms) with a
    fixed world-frame volume.  Falls back to scalar GJK for hulls."""
    n = len(rotations)
    if isinstance(volume, (Box, Capsule)) and isinstance(other, (Box, Capsule)):
        if isinstance(volume, Box) and isinstance(other, Box):
            r, t = _pose_arrays(volume, rotations, translations)
            return obb_obb_intersect_batch(
                r, t, volume.half_extents,
                other.pose.rotation_matrix, other.pose.translation, other.half_extents,
            )
        if isinstance(volume, Capsule) and isinstance(other, Capsule):
            p0, p1 = _pose_arrays(volume, rotations, translations)
            d = segment_segment_distance_batch(
                p0, p1,
                np.broadcast_to(other.p0, p0.shape),
                np.broadcast_to(other.p1, p0.shape),
            )
            return d <= volume.radius + other.radius + GJK_TOL
        if isinstance(volume, Capsule):
            # moving capsule vs fixed box: capsule endpoints into the box frame
            p0, p1 = _pose_arrays(volume, rotations, translations)
            inv_r = other.pose.rotation_matrix.T
            a = (p0 - other.pose.translation) @ inv_r.T
            b = (p1 - other.pose.translation) @ inv_r.T
            d = segment_aabb_distance_batch(a, b, other.half_extents)
            return d <= volume.radius + GJK_TOL
        # moving box vs fixed capsule: capsule endpoints into each box frame
        r, t = _pose_arrays(volume, rotations, translations)
        a = np.einsum("bji,bj->bi", r, other.p0 - t)
        b = np.einsum("bji,bj->bi", r, other.p1 - t)
        d = segment_aabb_distance_batch(a, b, volume.half_extents)
        return d <= other.radius + GJK_TOL
    out = np.zeros(n, dtype=bool)
    for k in range(n):
        t = Transform.from_matrix(_mat4(rotations[k], translations[k]))
        out[k] = volumes_intersect(volume.transformed(t), other)
    return out


def batch_pair_intersects(vol_a, rot_a, trans_a, vol_b, rot_b, trans_b):
    """Intersections between two volumes each posed by per-row transforms."""
    n = len(rot_a)
    if isinstance(vol_a, Capsule) and isinstance(vol_b, Capsule):
        p0, p1 = _pose_arrays(vol_a, rot_a, trans_a)
        q0, q1 = _pose_arrays(vol_b, rot_b, trans_b)
        d = segment_segment_distance_batch(p0, p1, q0, q1)
        return d <= vol_a.radius + vol_b.radius + GJK_TOL
    if isinstance(vol_a, Box) and isinstance(vol_b, Box):
        r1, t1 = _pose_arrays(vol_a, rot_a, trans_a)
        r2, t2 = _pose_arrays(vol_b, rot_b, trans_b)
        return obb_obb_intersect_batch(r1, t1, vol_a.half_extents, r2, t2, vol_b.half_extents)
    if isinstance(vol_a, Box) and isinstance(vol_b, Capsule):
        r, t = _pose_arrays(vol_a, rot_a, trans_a)
        q0, q1 = _pose_arrays(vol_b, rot_b, trans_b)
        a = np.einsum("bji,bj->bi", r, q0 - t)
        b = np.einsum("bji,bj->bi", r, q1 - t)
        d = segment_aabb_distance_batch(a, b, vol_a.half_extents)
        return d <= vol_b.radius + GJK_TOL
    if isinstance(vol_a, Capsule) and isinstance(vol_b, Box):
        return batch_pair_intersects(vol_b, rot_b, trans_b, vol_a, rot_a, trans_a)
    out = np.zeros(n, dtype=bool)
    for k in range(n):
        ta = Transform.from_matrix(_mat4(rot_a[k], trans_a[k]))
        tb = Transform.from_matrix(_mat4(rot_b[k], trans_b[k]))
        out[k] = volumes_intersect(vol_a.transformed(ta), vol_b.transformed(tb))
    return out


def batch_ray_intersects(ray: Ray, volume, rotations, translations):
    """Ray hits against `volume` posed by a batch of transforms."""
    n = len(rotations)
    if isinstance(volume, Capsule):
        p0, p1 = _pose_arrays(volume, rotations, translations)
        d = ray_segment_distance_batch(ray.origin, ray.direction, p0, p1)
        return d <= volume.radius + GJK_TOL
    if isinstance(volume, Box):
        r, t = _pose_arrays(volume, rotations, translations)
        o = np.einsum("bji,bj->bi", r, ray.origin - t)
        d = np.einsum("bji,j->bi", r, ray.direction)
        return _ray_aabb_hit(o, d, volume.half_extents)
    out = np.zeros(n, dtype=bool)
    for k in range(n):
        tr = Transform.from_matrix(_mat4(rotations[k], translations[k]))
        out[k] = ray_intersects_volume(ray, volume.transformed(tr))
    return out


def _mat4(r, t):
    m = np.eye(4)
    m[:3, :3] = r
    m[:3, 3] = t
    return m


# --------------------------------------------------------------------------
# clearance (distance) variants used by penalty terms
# --------------------------------------------------------------------------

def _gjk_pair_distance(a, b):
    return gjk_distance(a.support, b.support, a.center, b.center)


def batch_volume_clearance(volume, rotations, translations, other):
    """Surface-to-surface distance (0 when intersecting) between `volume`
    posed by a batch of transforms and a fixed volume."""
    n = len(rotations)
    if isinstance(volume, Capsule) and isinstance(other, Capsule):
        p0, p1 = _pose_arrays(volume, rotations, translations)
        d = segment_segment_distance_batch(
            p0, p1, np.broadcast_to(other.p0, p0.shape), np.broadcast_to(other.p1, p0.shape)
        )
        return np.maximum(d - volume.radius - other.radius, 0.0)
    if isinstance(volume, Capsule) and isinstance(other, Box):
        p0, p1 = _pose_arrays(volume, rotations, translations)
        inv_r = other.pose.rotation_matrix.T
        a = (p0 - other.pose.translation) @ inv_r.T
        b = (p1 - other.pose.translation) @ inv_r.T
        d = segment_aabb_distance_batch(a, b, other.half_extents)
        return np.maximum(d - volume.radius, 0.0)
    if isinstance(volume, Box) and isinstance(other, Capsule):
        r, t = _pose_arrays(volume, rotations, translations)
        a = np.einsum("bji,bj->bi", r, other.p0 - t)
        b = np.einsum("bji,bj->bi", r, other.p1 - t)
        d = segment_aabb_distance_batch(a, b, volume.half_extents)
        return np.maximum(d - other.radius, 0.0)
    out = np.zeros(n)
    for k in range(n):
        t = Transform.from_matrix(_mat4(rotations[k], translations[k]))
        out[k] = _gjk_pair_distance(volume.transformed(t), other)
    return out


def batch_pair_clearance(vol_a, rot_a, trans_a, vol_b, rot_b, trans_b):
    """Surface distance between two volumes each posed per row."""
    n = len(rot_a)
    if isinstance(vol_a, Capsule) and isinstance(vol_b, Capsule):
        p0, p1 = _pose_arrays(vol_a, rot_a, trans_a)
        q0, q1 = _pose_arrays(vol_b, rot_b, trans_b)
        d = segment_segment_distance_batch(p0, p1, q0, q1)
        return np.maximum(d - vol_a.radius - vol_b.radius, 0.0)
    if isinstance(vol_a, Box) and isinstance(vol_b, Capsule):
        r, t = _pose_arrays(vol_a, rot_a, trans_a)
        q0, q1 = _pose_arrays(vol_b, rot_b, trans_b)
        a = np.einsum("bji,bj->bi", r, q0 - t)
        b = np.einsum("bji,bj->bi", r, q1 - t)
        d = segment_aabb_distance_batch(a, b, vol_a.half_extents)
        return np.maximum(d - vol_b.radius, 0.0)
    if isinstance(vol_a, Capsule) and isinstance(vol_b, Box):
        return batch_pair_clearance(vol_b, rot_b, trans_b, vol_a, rot_a, trans_a)
    out = np.zeros(n)
    for k in range(n):
        ta = Transform.from_matrix(_mat4(rot_a[k], trans_a[k]))
        tb = Transform.from_matrix(_mat4(rot_b[k], trans_b[k]))
        out[k] = _gjk_pair_distance(vol_a.transformed(ta), vol_b.transformed(tb))
    return out


def _ray_aabb_distance(o, d, half_extents, iters=90):
    """Distance from rays (in box frame) to the AABB, batched; convex in the
    ray parameter so a ternary search finds the minimum."""
    o = np.atleast_2d(o)
    d = np.atleast_2d(d)
    s_close = np.maximum(-np.einsum("bi,bi->b", o, d), 0.0)
    s_hi = s_close + float(np.linalg.norm(half_extents)) + 1.0
    lo = np.zeros(len(o))
    hi = s_hi
    for _ in range(iters):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        f1 = _aabb_point_distance(o + m1[:, None] * d, half_extents)
        f2 = _aabb_point_distance(o + m2[:, None] * d, half_extents)
        left = f1 <= f2
        hi = np.where(left, m2, hi)
        lo = np.where(left, lo, m1)
    mid = 0.5 * (lo + hi)
    return np.minimum(
        _aabb_point_distance(o + mid[:, None] * d, half_extents),
        _aabb_point_distance(o, half_extents),
    )


def batch_ray_clearance(ray: Ray, volume, rotations, translations):
    """Distance from a fixed ray to `volume` posed by a batch of transforms
    (0 when the ray meets the volume)."""
    if isinstance(volume, Capsule):
        p0, p1 = _pose_arrays(volume, rotations, translations)
        d = ray_segment_distance_batch(ray.origin, ray.direction, p0, p1)
        return np.maximum(d - volume.radius, 0.0)
    if isinstance(volume, Box):
        r, t = _pose_arrays(volume, rotations, translations)
        o = np.einsum("bji,bj->bi", r, ray.origin - t)
        d = np.einsum("bji,j->bi", r, ray.direction)
        return _ray_aabb_distance(o, d, volume.half_extents)
    # generic fallback: convex distance from sampled ray points
    n = len(rotations)
    out = np.zeros(n)
    for k in range(n):
        tr = Transform.from_matrix(_mat4(rotations[k], translations[k]))
        posed = volume.transformed(tr)
        span = np.linalg.norm(posed.center - ray.origin) + posed.bounding_radius() + 1.0
        ss = np.linspace(0.0, span, 64)
        dists = [
            gjk_distance(
                lambda d, p=ray.origin + s * ray.direction: p,
                posed.support, ray.origin + s * ray.direction, posed.center,
            )
            for s in ss
        ]
        out[k] = min(dists)
    return out


def polygon_signed_distance(points, polygon: Polygon):
    """Distance to the polygon boundary, negative inside."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    v = polygon.vertices
    x1 = v[None, :, :]
    x2 = np.roll(v, -1, axis=0)[None, :, :]
    e = x2 - x1
    elen2 = np.einsum("bki,bki->bk", e, e)
    rel = pts[:, None, :] - x1
    t = np.clip(
        np.einsum("bki,bki->bk", rel, np.broadcast_to(e, rel.shape))
        / np.where(elen2 == 0, 1.0, elen2),
        0.0,
        1.0,
    )
    closest = x1 + t[:, :, None] * e
    d = np.linalg.norm(pts[:, None, :] - closest, axis=2).min(axis=1)
    inside = points_in_polygon(pts, polygon)
    return np.where(inside, -d, d)
