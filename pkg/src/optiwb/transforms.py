"""Quaternion and rigid-transform utilities.

Orientations are unit quaternions in (w, x, y, z) order; rigid transforms are
rotation + translation pairs.  All functions broadcast over leading axes so
the planner can pose thousands of frames per call.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def wrap_angle(h):
    """Wrap an angle (or array of angles) to (-pi, pi]."""
    wrapped = -((-np.asarray(h, dtype=float) + np.pi) % (2.0 * np.pi) - np.pi)
    return wrapped


def angle_diff(a, b):
    """Shortest signed angular difference a - b, in (-pi, pi]."""
    return wrap_angle(np.asarray(a, dtype=float) - b)


def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_multiply(q1, q2):
    """Hamilton product, broadcasting over leading axes."""
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    w1, x1, y1, z1 = np.moveaxis(q1, -1, 0)
    w2, x2, y2, z2 = np.moveaxis(q2, -1, 0)
    return np.stack(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ],
        axis=-1,
    )


def quat_conjugate(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    angle = np.asarray(angle, dtype=float)
    half = 0.5 * angle
    return np.concatenate(
        [np.cos(half)[..., None], np.sin(half)[..., None] * axis], axis=-1
    )


def quat_to_matrix(q):
    """Rotation matrix (or stack of matrices) from unit quaternions."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = np.moveaxis(q, -1, 0)
    row0 = np.stack(
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], axis=-1
    )
    row1 = np.stack(
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], axis=-1
    )
    row2 = np.stack(
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], axis=-1
    )
    return np.stack([row0, row1, row2], axis=-2)


def quat_from_matrix(r):
    """Unit quaternion from a single 3x3 rotation matrix (Shepperd's method)."""
    r = np.asarray(r, dtype=float)
    t = np.trace(r)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s,
             (r[1, 0] - r[0, 1]) / s]
        )
    else:
        i = int(np.argmax(np.diag(r)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(r[i, i] - r[j, j] - r[k, k] + 1.0) * 2.0
        q = np.empty(4)
        q[0] = (r[k, j] - r[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (r[j, i] + r[i, j]) / s
        q[1 + k] = (r[k, i] + r[i, k]) / s
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def quat_rotate(q, v):
    """Rotate vectors by quaternions, broadcasting over leading axes."""
    return np.einsum("...ij,...j->...i", quat_to_matrix(q), np.asarray(v, dtype=float))


def quat_angle(q1, q2):
    """Geodesic angle between two orientations, in [0, pi]."""
    dot = np.abs(np.sum(np.asarray(q1) * np.asarray(q2), axis=-1))
    return 2.0 * np.arccos(np.clip(dot, -1.0, 1.0))


def rotvec_from_matrix(r):
    """Rotation vector (axis * angle) from rotation matrices, batched.

    Safe for small angles; near pi the axis is recovered from the diagonal.
    """
    r = np.asarray(r, dtype=float)
    cos_a = np.clip((np.trace(r, axis1=-2, axis2=-1) - 1.0) * 0.5, -1.0, 1.0)
    angle = np.arccos(cos_a)
    skew = np.stack(
        [
            r[..., 2, 1] - r[..., 1, 2],
            r[..., 0, 2] - r[..., 2, 0],
            r[..., 1, 0] - r[..., 0, 1],
        ],
        axis=-1,
    )
    sin_a = np.sin(angle)
    small = angle < 1e-7
    near_pi = angle > np.pi - 1e-5
    scale = np.where(small | near_pi, 0.5, angle / np.where(sin_a == 0, 1.0, 2.0 * sin_a))
    out = skew * scale[..., None]
    if np.any(near_pi):
        # axis from the dominant diagonal entry of (R + I) / 2
        idx = np.nonzero(near_pi)
        for flat in zip(*idx) if idx else []:
            rm = r[flat]
            m = (rm + np.eye(3)) * 0.5
            axis = np.sqrt(np.clip(np.diag(m), 0.0, None))
            k = int(np.argmax(axis))
            if axis[k] > 0:
                axis = m[:, k] / axis[k]
                axis = axis / np.linalg.norm(axis)
            else:
                axis = np.array([1.0, 0.0, 0.0])
            sign = np.sign(skew[flat] @ axis)
            if sign == 0:
                sign = 1.0
            out[flat] = axis * angle[flat] * sign
    return out


@dataclass(frozen=True)
class Transform:
    """Rigid transform: rotation (unit quaternion, wxyz) plus translation."""

    rotation: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(
            self, "rotation", quat_normalize(np.asarray(self.rotation, dtype=float))
        )
        object.__setattr__(
            self, "translation", np.asarray(self.translation, dtype=float).reshape(3)
        )

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_axis_angle(cls, axis, angle, translation=(0.0, 0.0, 0.0)):
        return cls(quat_from_axis_angle(axis, angle), np.asarray(translation, float))

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=float)
        return cls(quat_from_matrix(m[:3, :3]), m[:3, 3])

    def compose(self, other: "Transform") -> "Transform":
        """self then other applied in self's frame: T = self * other."""
        return Transform(
            quat_multiply(self.rotation, other.rotation),
            self.translation + quat_rotate(self.rotation, other.translation),
        )

    def apply(self, points):
        points = np.asarray(points, dtype=float)
        return quat_rotate(self.rotation, points) + self.translation

    def inverse(self) -> "Transform":
        inv_rot = quat_conjugate(self.rotation)
        return Transform(inv_rot, -quat_rotate(inv_rot, self.translation))

    def matrix(self):
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.rotation)
        m[:3, 3] = self.translation
        return m

    @property
    def rotation_matrix(self):
        return quat_to_matrix(self.rotation)


def planar_transform(x, y, h) -> Transform:
    """World pose of a planar body at (x, y) with heading h about +z."""
    return Transform(
        quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), h), np.array([x, y, 0.0])
    )
