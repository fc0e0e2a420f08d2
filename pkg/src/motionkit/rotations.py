"""Rotation math: quaternions, 6D rotation codec, heading (yaw-only) frames.

Conventions used throughout the package:

* quaternions are scalar-first ``(w, x, y, z)`` and unit norm,
* rotation matrices are world-from-local (columns are the local axes),
* the 6D representation is the first two matrix columns concatenated,
* the heading frame of a pose is its root frame with roll and pitch
  removed, i.e. a pure yaw rotation about world z plus the root position.

All functions broadcast over leading dimensions: a "quaternion" argument
may be shape ``(4,)`` or ``(..., 4)``.
"""

from __future__ import annotations

import numpy as np

QUAT_IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])

_DEGENERATE_NORM = 1e-6


class InvalidRotationError(ValueError):
    """Raised for degenerate quaternions or 6D inputs."""


def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm < _DEGENERATE_NORM):
        raise InvalidRotationError(f"quaternion norm below {_DEGENERATE_NORM}")
    return q / norm


def quat_mul(a, b):
    """Hamilton product a*b (apply b first, then a)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_conj(q):
    q = np.asarray(q, dtype=float)
    out = q.copy()
    out[..., 1:] = -out[..., 1:]
    return out


def quat_rotate(q, v):
    """Rotate vector(s) v by unit quaternion(s) q."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    qw = q[..., :1]
    qv = q[..., 1:]
    t = 2.0 * np.cross(qv, v)
    return v + qw * t + np.cross(qv, t)


def quat_rotate_inv(q, v):
    return quat_rotate(quat_conj(q), v)


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    angle = np.asarray(angle, dtype=float)
    half = 0.5 * angle
    w = np.cos(half)
    xyz = axis * np.sin(half)[..., None]
    return np.concatenate([w[..., None], xyz], axis=-1)


def quat_from_yaw(yaw):
    yaw = np.asarray(yaw, dtype=float)
    half = 0.5 * yaw
    zeros = np.zeros_like(half)
    return np.stack([np.cos(half), zeros, zeros, np.sin(half)], axis=-1)


def yaw_of_quat(q):
    """Heading angle: yaw of the ZYX Euler decomposition."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.arctan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))


def quat_to_mat(q):
    q = np.asarray(q, dtype=float)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    row0 = np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], axis=-1)
    row1 = np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], axis=-1)
    row2 = np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], axis=-1)
    return np.stack([row0, row1, row2], axis=-2)


def mat_to_quat(m):
    """Shepperd's method, stable for all rotation matrices."""
    m = np.asarray(m, dtype=float)
    batch = m.shape[:-2]
    m = m.reshape((-1, 3, 3))
    out = np.empty((m.shape[0], 4))
    for i, r in enumerate(m):
        tr = np.trace(r)
        if tr > 0:
            s = np.sqrt(tr + 1.0) * 2.0
            out[i] = [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
        elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
            s = np.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
            out[i] = [(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s]
        elif r[1, 1] > r[2, 2]:
            s = np.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
            out[i] = [(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s]
        else:
            s = np.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
            out[i] = [(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s]
    out = np.where(out[:, :1] < 0, -out, out)  # canonical sign: w >= 0
    return quat_normalize(out.reshape(batch + (4,)))


def mat_to_6d(m):
    """First two columns of the rotation matrix, concatenated."""
    m = np.asarray(m, dtype=float)
    return np.concatenate([m[..., :, 0], m[..., :, 1]], axis=-1)


def rot6d_to_mat(d6):
    """Gram-Schmidt orthonormalization of the two columns, third by cross product."""
    d6 = np.asarray(d6, dtype=float)
    a1 = d6[..., 0:3]
    a2 = d6[..., 3:6]
    n1 = np.linalg.norm(a1, axis=-1, keepdims=True)
    if np.any(n1 < _DEGENERATE_NORM):
        raise InvalidRotationError("6D input: first column is near zero")
    b1 = a1 / n1
    a2p = a2 - np.sum(b1 * a2, axis=-1, keepdims=True) * b1
    n2 = np.linalg.norm(a2p, axis=-1, keepdims=True)
    if np.any(n2 < _DEGENERATE_NORM):
        raise InvalidRotationError("6D input: columns are collinear or second column is near zero")
    b2 = a2p / n2
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=-1)


def quat_to_6d(q):
    return mat_to_6d(quat_to_mat(q))


def rot6d_to_quat(d6):
    return mat_to_quat(rot6d_to_mat(d6))


def geodesic_angle(qa, qb):
    """Angle of the relative rotation between two unit quaternions, in [0, pi]."""
    qa = np.asarray(qa, dtype=float)
    qb = np.asarray(qb, dtype=float)
    rel = quat_mul(quat_conj(qa), qb)
    vec = np.linalg.norm(rel[..., 1:], axis=-1)
    return 2.0 * np.arctan2(vec, np.abs(rel[..., 0]))


def wrap_angle(theta):
    """Wrap to (-pi, pi]."""
    theta = np.asarray(theta, dtype=float)
    wrapped = -((-theta + np.pi) % (2.0 * np.pi) - np.pi)
    return wrapped


class HeadingFrame:
    """Yaw-only local frame anchored at a root pose.

    Positions map as ``R_yaw^T (p - origin)``, free vectors (velocities)
    as ``R_yaw^T v``, and rotations as ``R_yaw^T R``.  ``to_world_*``
    invert the corresponding maps exactly.
    """

    def __init__(self, root_pos, root_rot):
        root_rot = np.asarray(root_rot, dtype=float)
        if np.linalg.norm(root_rot) < _DEGENERATE_NORM:
            raise InvalidRotationError("degenerate root quaternion")
        self.origin = np.asarray(root_pos, dtype=float).copy()
        self.yaw = float(yaw_of_quat(quat_normalize(root_rot)))
        self._q = quat_from_yaw(self.yaw)
        self._q_inv = quat_conj(self._q)

    def to_local_pos(self, p):
        return quat_rotate(self._q_inv, np.asarray(p, dtype=float) - self.origin)

    def to_world_pos(self, p):
        return quat_rotate(self._q, np.asarray(p, dtype=float)) + self.origin

    def to_local_vec(self, v):
        return quat_rotate(self._q_inv, v)

    def to_world_vec(self, v):
        return quat_rotate(self._q, v)

    def to_local_quat(self, q):
        return quat_mul(self._q_inv, q)

    def to_world_quat(self, q):
        return quat_mul(self._q, q)
