"""Small SO(3)/SE(3) toolkit used by the tracker.

Rotations are plain 3x3 float64 arrays acting on column vectors. A pose maps
body coordinates to world coordinates as ``x_world = R @ x_body + t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Below this angle sin(theta)/theta loses digits; the Taylor form is exact to
# float64 resolution here.
SMALL_ANGLE = 1e-8
ORTHO_TOL = 1e-9


def skew(w) -> np.ndarray:
    """Cross-product matrix: ``skew(w) @ x == np.cross(w, x)``."""
    x, y, z = (float(c) for c in w)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(m: np.ndarray) -> np.ndarray:
    """Inverse of :func:`skew` for a skew-symmetric matrix."""
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def rotation_exp(axis_angle) -> np.ndarray:
    """Rodrigues exponential of an axis-angle vector (radians)."""
    w = np.asarray(axis_angle, dtype=float)
    theta = math.sqrt(float(w @ w))
    if theta < SMALL_ANGLE:
        k = skew(w)
        return np.eye(3) + k + 0.5 * (k @ k)
    k = skew(w / theta)
    return np.eye(3) + math.sin(theta) * k + (1.0 - math.cos(theta)) * (k @ k)


def left_jacobian(axis_angle) -> np.ndarray:
    """Left Jacobian of the exponential map.

    ``rotation_exp(w + e) ~= rotation_exp(left_jacobian(w) @ e) @ rotation_exp(w)``
    for small ``e``.
    """
    w = np.asarray(axis_angle, dtype=float)
    theta2 = float(w @ w)
    k = skew(w)
    if theta2 < 1e-10:
        return np.eye(3) + 0.5 * k + (k @ k) / 6.0
    theta = math.sqrt(theta2)
    a = (1.0 - math.cos(theta)) / theta2
    b = (theta - math.sin(theta)) / (theta2 * theta)
    return np.eye(3) + a * k + b * (k @ k)


def exp_and_left_jacobian(axis_angle) -> tuple[np.ndarray, np.ndarray]:
    """``(rotation_exp(w), left_jacobian(w))`` sharing one set of trig calls."""
    w = np.asarray(axis_angle, dtype=float)
    theta2 = float(w @ w)
    k = skew(w)
    k2 = np.outer(w, w)
    k2[0, 0] -= theta2
    k2[1, 1] -= theta2
    k2[2, 2] -= theta2
    if theta2 < SMALL_ANGLE * SMALL_ANGLE:
        return np.eye(3) + k + 0.5 * k2, np.eye(3) + 0.5 * k + k2 / 6.0
    theta = math.sqrt(theta2)
    s, c = math.sin(theta), math.cos(theta)
    if theta2 < 1e-10:
        ja, jb = 0.5, 1.0 / 6.0
    else:
        ja, jb = (1.0 - c) / theta2, (theta - s) / (theta2 * theta)
    rot = np.eye(3) + (s / theta) * k + ((1.0 - c) / theta2) * k2
    jac = np.eye(3) + ja * k + jb * k2
    return rot, jac


def project_to_rotation(m: np.ndarray) -> np.ndarray:
    """Nearest rotation in Frobenius norm (polar factor, det forced to +1)."""
    u, _, vt = np.linalg.svd(m)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def is_rotation(r: np.ndarray, tol: float = ORTHO_TOL) -> bool:
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3) or not np.all(np.isfinite(r)):
        return False
    return bool(
        np.max(np.abs(r.T @ r - np.eye(3))) <= tol and abs(np.linalg.det(r) - 1.0) <= tol
    )


def geodesic_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Angle in radians of the relative rotation ``a.T @ b``, in [0, pi].

    Same value as ``acos((trace(a.T @ b) - 1) / 2)``, but the atan2 form keeps
    full precision near 0 and pi where acos flattens out.
    """
    m = np.asarray(a).T @ np.asarray(b)
    c = (m[0, 0] + m[1, 1] + m[2, 2] - 1.0) / 2.0
    s = 0.5 * math.sqrt((m[2, 1] - m[1, 2]) ** 2 + (m[0, 2] - m[2, 0]) ** 2 + (m[1, 0] - m[0, 1]) ** 2)
    return math.atan2(s, min(1.0, max(-1.0, c)))


def chordal_sq(a: np.ndarray, b: np.ndarray) -> float:
    """Squared Frobenius distance; equals ``8 sin^2(theta / 2)``."""
    d = np.asarray(a) - np.asarray(b)
    return float(np.sum(d * d))


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrix of a unit quaternion given as (w, x, y, z)."""
    w, x, y, z = (float(c) for c in q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(r: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) with w >= 0 for a rotation matrix."""
    r = np.asarray(r, dtype=float)
    tr = r[0, 0] + r[1, 1] + r[2, 2]
    if tr > 0.0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q = [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
    elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
        s = 2.0 * math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2])
        q = [(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s]
    elif r[1, 1] > r[2, 2]:
        s = 2.0 * math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2])
        q = [(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1])
        q = [(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    q /= np.linalg.norm(q)
    return -q if q[0] < 0 else q


def _frozen_vec(v, n: int = 3) -> np.ndarray:
    a = np.array(v, dtype=float).reshape(n)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Pose:
    """Object orientation and position (meters) at one frame."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float).reshape(3, 3)
        r.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", _frozen_vec(self.translation))

    @classmethod
    def identity(cls) -> Pose:
        return cls()

    @classmethod
    def from_quat(cls, q, p) -> Pose:
        return cls(quat_to_matrix(q), p)

    def quat(self) -> np.ndarray:
        return matrix_to_quat(self.rotation)

    def apply(self, points) -> np.ndarray:
        """Map body-frame points (N, 3) into the world frame."""
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def is_valid(self) -> bool:
        return is_rotation(self.rotation) and bool(np.all(np.isfinite(self.translation)))

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return bool(
            np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
        )

    __hash__ = None


@dataclass(frozen=True)
class Twist:
    """Linear (m/s) and angular (rad/s) velocity of the object center."""

    linear: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "linear", _frozen_vec(self.linear))
        object.__setattr__(self, "angular", _frozen_vec(self.angular))

    @classmethod
    def from_vector(cls, x) -> Twist:
        x = np.asarray(x, dtype=float)
        return cls(x[:3], x[3:6])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])

    def __eq__(self, other):
        if not isinstance(other, Twist):
            return NotImplemented
        return bool(
            np.array_equal(self.linear, other.linear) and np.array_equal(self.angular, other.angular)
        )

    __hash__ = None
