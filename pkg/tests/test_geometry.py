"""Collision primitive tests against independent oracles: dense surface
sampling for convex pairs, winding numbers for polygons, and a standalone
slab implementation for ray/box."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from optiwb import geometry as geo
from optiwb.model import Scene, Sun
from optiwb.transforms import Transform

# ---------------------------------------------------------------------------
# oracle helpers (independent implementations)
# ---------------------------------------------------------------------------

def surface_points(volume, n, rng):
    """Points on (approximately) the volume surface."""
    if isinstance(volume, geo.Box):
        u = rng.uniform(-1, 1, size=(n, 3))
        axis = rng.integers(0, 3, size=n)
        sign = rng.choice([-1.0, 1.0], size=n)
        u[np.arange(n), axis] = sign
        return volume.pose.apply(u * volume.half_extents)
    if isinstance(volume, geo.Capsule):
        t = rng.uniform(0, 1, size=n)
        seg = volume.p0 + t[:, None] * (volume.p1 - volume.p0)
        d = rng.normal(size=(n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        return seg + volume.radius * d
    if isinstance(volume, geo.ConvexHullVolume):
        w = rng.dirichlet(np.full(len(volume.vertices), 0.25), size=n)
        pts = w @ volume.vertices
        return volume.pose.apply(pts)
    raise TypeError


def point_inside(volume, pts):
    """Closed-form containment for boxes/capsules; half-space test for hulls."""
    if isinstance(volume, geo.Box):
        local = (pts - volume.pose.translation) @ volume.pose.rotation_matrix
        return np.all(np.abs(local) <= volume.half_extents + 1e-12, axis=1)
    if isinstance(volume, geo.Capsule):
        d = geo.segment_segment_distance_batch(
            pts, pts,
            np.broadcast_to(volume.p0, pts.shape), np.broadcast_to(volume.p1, pts.shape),
        )
        return d <= volume.radius + 1e-12
    if isinstance(volume, geo.ConvexHullVolume):
        from scipy.spatial import ConvexHull

        local = (pts - volume.pose.translation) @ volume.pose.rotation_matrix
        eqs = ConvexHull(volume.vertices).equations
        return np.all(local @ eqs[:, :3].T + eqs[:, 3] <= 1e-12, axis=1)
    raise TypeError


def sampling_oracle(a, b, rng, n=100_000):
    """Intersection verdict by dense surface sampling, or None when the
    sampled margin is too thin to call."""
    from scipy.spatial import cKDTree

    pa = surface_points(a, n, rng)
    pb = surface_points(b, n, rng)
    if point_inside(b, pa).any() or point_inside(a, pb).any():
        return True
    # approximate separation: distance between the sampled surfaces
    gap = cKDTree(pb[::5]).query(pa[::5], k=1)[0].min()
    scale = max(a.bounding_radius(), b.bounding_radius())
    if gap > 0.05 * scale:
        return False
    return None  # too close to call by sampling


def rand_volume(rng, kind=None):
    kind = kind or rng.choice(["box", "capsule", "hull"])
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    pose = Transform.from_axis_angle(axis, rng.uniform(-np.pi, np.pi), rng.uniform(-1.2, 1.2, 3))
    if kind == "box":
        return geo.Box(rng.uniform(0.15, 0.6, 3), pose)
    if kind == "capsule":
        return geo.Capsule(rng.uniform(0.08, 0.3), rng.uniform(-1.2, 1.2, 3), rng.uniform(-1.2, 1.2, 3))
    return geo.ConvexHullVolume(rng.uniform(-0.45, 0.45, (9, 3)), pose)


def winding_number_inside(p, verts):
    """Classic winding number with explicit boundary handling."""
    verts = np.asarray(verts, dtype=float)
    n = len(verts)
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        ab = b - a
        t = np.clip(np.dot(p - a, ab) / max(ab @ ab, 1e-300), 0, 1)
        if np.linalg.norm(p - (a + t * ab)) <= 1e-12:
            return True
    total = 0.0
    for i in range(n):
        a = verts[i] - p
        b = verts[(i + 1) % n] - p
        total += np.arctan2(a[0] * b[1] - a[1] * b[0], a @ b)
    return abs(total) > np.pi


def slab_ray_box(origin, direction, box: geo.Box):
    """Independent slab-method ray/box test."""
    inv = box.pose.inverse()
    o = inv.apply(origin)
    d = inv.rotation_matrix @ np.asarray(direction, float)
    tmin, tmax = 0.0, np.inf
    for i in range(3):
        if abs(d[i]) < 1e-12:
            if abs(o[i]) > box.half_extents[i]:
                return False
            continue
        t1 = (-box.half_extents[i] - o[i]) / d[i]
        t2 = (box.half_extents[i] - o[i]) / d[i]
        tmin = max(tmin, min(t1, t2))
        tmax = min(tmax, max(t1, t2))
    return tmin <= tmax


# ---------------------------------------------------------------------------
# volumes_intersect
# ---------------------------------------------------------------------------

def test_separated_boxes():
    a = geo.Box([0.5, 0.5, 0.5])
    b = geo.Box([0.5, 0.5, 0.5], Transform(translation=[10, 0, 0]))
    assert not geo.volumes_intersect(a, b)


def test_identical_volumes_overlap():
    for v in (geo.Box([0.3, 0.2, 0.1]), geo.Capsule(0.2, [0, 0, 0], [1, 0, 0])):
        assert geo.volumes_intersect(v, v)


def test_intersections_match_sampling_oracle():
    rng = np.random.default_rng(42)
    checked = 0
    while checked < 200:
        a = rand_volume(rng)
        b = rand_volume(rng)
        verdict = sampling_oracle(a, b, rng)
        if verdict is None:
            continue
        assert geo.volumes_intersect(a, b) == verdict, (a, b)
        checked += 1


def test_intersection_symmetry_and_rigid_invariance():
    rng = np.random.default_rng(7)
    for _ in range(120):
        a = rand_volume(rng)
        b = rand_volume(rng)
        r = geo.volumes_intersect(a, b)
        assert geo.volumes_intersect(b, a) == r
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        t = Transform.from_axis_angle(axis, rng.uniform(-3, 3), rng.uniform(-2, 2, 3))
        assert geo.volumes_intersect(a.transformed(t), b.transformed(t)) == r


def test_batch_paths_match_scalar():
    rng = np.random.default_rng(11)
    for vol_kind in ("box", "capsule"):
        vol = rand_volume(rng, vol_kind)
        for other_kind in ("box", "capsule"):
            other = rand_volume(rng, other_kind)
            axes = rng.normal(size=(40, 3))
            axes /= np.linalg.norm(axes, axis=1, keepdims=True)
            angles = rng.uniform(-3, 3, 40)
            trans = rng.uniform(-1.5, 1.5, (40, 3))
            ts = [Transform.from_axis_angle(axes[i], angles[i], trans[i]) for i in range(40)]
            rot = np.array([t.rotation_matrix for t in ts])
            got = geo.batch_volume_intersects(vol, rot, trans, other)
            want = [geo.volumes_intersect(vol.transformed(t), other) for t in ts]
            assert list(got) == want


# ---------------------------------------------------------------------------
# rays
# ---------------------------------------------------------------------------

def test_ray_box_basic():
    box = geo.Box([0.5, 0.5, 0.5], Transform(translation=[0, 0, 5]))
    assert geo.ray_intersects_volume(geo.Ray([0, 0, 0], [0, 0, 1]), box)
    assert not geo.ray_intersects_volume(geo.Ray([0, 0, 0], [1, 0, 0]), box)


def test_ray_box_matches_slab_oracle():
    rng = np.random.default_rng(3)
    agree = 0
    for _ in range(1000):
        box = rand_volume(rng, "box")
        origin = rng.uniform(-2, 2, 3)
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        got = geo.ray_intersects_volume(geo.Ray(origin, direction), box)
        want = slab_ray_box(origin, direction, box)
        assert got == want
        agree += 1
    assert agree == 1000


def test_ray_capsule_and_hull():
    cap = geo.Capsule(0.3, [2, 0, 0], [2, 0, 9])
    assert not geo.ray_intersects_volume(geo.Ray([0, 0, 0], [0, 0, 1]), cap)
    assert geo.ray_intersects_volume(geo.Ray([0, 0, 0], [1, 0, 0.1]), cap)
    hull = geo.ConvexHullVolume([[0, 0, 4], [1, 0, 5], [0, 1, 5], [0, 0, 6], [-1, -1, 5]])
    assert geo.ray_intersects_volume(geo.Ray([0, 0, 0], [0, 0, 1]), hull)
    assert not geo.ray_intersects_volume(geo.Ray([5, 5, 0], [0, 0, 1]), hull)


# ---------------------------------------------------------------------------
# planar containment
# ---------------------------------------------------------------------------

def test_point_in_polygon_basic():
    square = geo.Polygon([[0, 0], [1, 0], [1, 1], [0, 1]])
    assert geo.point_in_forbidden([0.5, 0.5], [square])
    assert geo.point_in_forbidden([0.0, 0.5], [square])  # boundary counts
    assert not geo.point_in_forbidden([2, 2], [square])


def test_point_in_polygon_matches_winding_oracle():
    rng = np.random.default_rng(5)
    # random simple polygon: radial vertices around a center
    angles = np.sort(rng.uniform(0, 2 * np.pi, 9))
    radii = rng.uniform(0.4, 1.4, 9)
    verts = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    poly = geo.Polygon(verts)
    pts = rng.uniform(-1.6, 1.6, (1000, 2))
    got = geo.points_in_polygon(pts, poly)
    want = np.array([winding_number_inside(p, verts) for p in pts])
    assert np.array_equal(got, want)


def test_occupancy_grid():
    grid = geo.OccupancyGrid([0, 0], 0.5, np.array([[True, False], [False, True]]))
    assert geo.point_in_forbidden([0.2, 0.2], [grid])
    assert not geo.point_in_forbidden([0.7, 0.2], [grid])
    assert geo.point_in_forbidden([0.7, 0.7], [grid])
    assert not geo.point_in_forbidden([5, 5], [grid])


def test_polygon_signed_distance():
    square = geo.Polygon([[0, 0], [1, 0], [1, 1], [0, 1]])
    sd = geo.polygon_signed_distance(np.array([[0.5, 0.5], [2.0, 0.5], [0.5, -0.3]]), square)
    assert sd[0] == pytest.approx(-0.5)
    assert sd[1] == pytest.approx(1.0)
    assert sd[2] == pytest.approx(0.3)


# ---------------------------------------------------------------------------
# sun ray
# ---------------------------------------------------------------------------

def _scene(azimuth, elevation):
    return Scene((), (), Sun(azimuth, elevation), np.array([1.0, 2.0, 0.0]))


def test_sun_ray_axis_cases():
    assert np.allclose(geo.sun_ray(_scene(1.234, np.pi / 2)).direction, [0, 0, 1], atol=1e-12)
    assert np.allclose(geo.sun_ray(_scene(0.0, 1e-12)).direction, [1, 0, 0], atol=1e-9)
    d = geo.sun_ray(_scene(np.pi / 2, np.pi / 4)).direction
    assert np.allclose(d, [0, np.sqrt(2) / 2, np.sqrt(2) / 2], atol=1e-12)


@given(st.floats(-7.0, 7.0), st.floats(1e-6, np.pi / 2))
def test_sun_ray_unit_and_upward(azimuth, elevation):
    ray = geo.sun_ray(_scene(azimuth, elevation))
    assert abs(np.linalg.norm(ray.direction) - 1.0) < 1e-12
    assert ray.direction[2] >= 0
    assert np.allclose(ray.origin, [1.0, 2.0, 0.0])
