"""Object twist from contact-point positions and velocities.

Every contact point rigidly attached to the object obeys
``v_p = v + w x (p - t)`` with ``t`` the reference (object center) the linear
velocity refers to. The fit minimizes

    E(v, w, t) = sum_i || v_ci - v - w x (p_ci - t) ||^2

by alternating a linear least-squares solve for ``(v, w)`` at fixed ``t`` and
for ``t`` at fixed ``(v, w)``.

Note that ``t`` is a gauge: ``(v + w x (t' - t), w, t')`` predicts the same
velocities as ``(v, w, t)``, so the data cannot move the center once the twist
has been fitted at it. The returned linear velocity is always the velocity of
the returned center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geom import Twist, skew

RANK_RTOL = 1e-10
MAX_ROUNDS = 10
TWIST_STOP = 1e-9
# Below this |w| the energy does not depend on the center at all.
MIN_OMEGA = 1e-6


class EmptyObservation(ValueError):
    """Raised when a contact observation holds no points."""


@dataclass(frozen=True)
class ContactObservation:
    """World-frame contact positions (m) and velocities (m/s), one row per point."""

    points: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        p = np.array(self.points, dtype=float).reshape(-1, 3)
        v = np.array(self.velocities, dtype=float).reshape(-1, 3)
        if p.shape != v.shape:
            raise ValueError(
                f"points and velocities differ in length: {len(p)} vs {len(v)}"
            )
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(v))):
            raise ValueError("contact observation contains non-finite values")
        p.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "velocities", v)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class KinematicEstimate:
    twist: Twist
    center: np.ndarray
    residual_rms: float
    rank: int
    iterations_used: int
    # Energy after each alternation round, for diagnostics.
    energies: tuple = field(default=(), repr=False)


def _cross_rows(w, r: np.ndarray) -> np.ndarray:
    # w x r_i for every row; np.cross costs more than the arithmetic here
    return r @ skew(w).T


def kinematic_energy(obs: ContactObservation, twist: Twist, center) -> float:
    r = obs.points - np.asarray(center, dtype=float)
    res = obs.velocities - twist.linear - _cross_rows(twist.angular, r)
    return float(np.sum(res * res))


def _design(points: np.ndarray, center) -> np.ndarray:
    # Row block i is [I | -skew(p_i - c)] since w x r = -skew(r) @ w.
    n = len(points)
    r = points - np.asarray(center, dtype=float)
    a = np.zeros((n, 3, 6))
    a[:, 0, 0] = a[:, 1, 1] = a[:, 2, 2] = 1.0
    a[:, 0, 4] = r[:, 2]
    a[:, 0, 5] = -r[:, 1]
    a[:, 1, 3] = -r[:, 2]
    a[:, 1, 5] = r[:, 0]
    a[:, 2, 3] = r[:, 1]
    a[:, 2, 4] = -r[:, 0]
    return a.reshape(3 * n, 6)


def solve_twist_fixed_center(obs: ContactObservation, center) -> tuple[Twist, int]:
    """Minimum-norm least-squares twist about ``center`` and the system rank."""
    if len(obs) == 0:
        raise EmptyObservation("no contact points")
    a = _design(obs.points, center)
    b = obs.velocities.reshape(-1)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s[0] == 0.0:
        return Twist(), 0
    keep = s > RANK_RTOL * s[0]
    x = vt[keep].T @ ((u[:, keep].T @ b) / s[keep])
    return Twist.from_vector(x), int(np.count_nonzero(keep))


def solve_center_fixed_twist(obs: ContactObservation, twist: Twist, center) -> np.ndarray:
    """Least-squares center for a fixed twist.

    Only the component of the center orthogonal to ``w`` is observable; the
    component along ``w`` is carried over from ``center``.
    """
    center = np.asarray(center, dtype=float)
    w = twist.angular
    w2 = float(w @ w)
    if math.sqrt(w2) < MIN_OMEGA:
        return center.copy()
    # Residual is d_i + skew(w) t; the optimum solves skew(w) t = -mean(d).
    d = obs.velocities - twist.linear - _cross_rows(w, obs.points)
    d_mean = d.mean(axis=0)
    along = w * (float(w @ center) / w2)
    return along + skew(w) @ d_mean / w2


def estimate_kinematics(obs: ContactObservation, initial_center) -> KinematicEstimate:
    """Alternating minimization of the contact energy, at most ten rounds."""
    if len(obs) == 0:
        raise EmptyObservation("no contact points")
    center = np.array(initial_center, dtype=float).reshape(3)
    prev = None
    energies = []
    rank = 0
    twist = Twist()
    for rounds in range(1, MAX_ROUNDS + 1):
        twist, rank = solve_twist_fixed_center(obs, center)
        x = twist.as_vector()
        if prev is not None and np.linalg.norm(x - prev) < TWIST_STOP:
            energies.append(kinematic_energy(obs, twist, center))
            break
        prev = x
        center = solve_center_fixed_twist(obs, twist, center)
        energies.append(kinematic_energy(obs, twist, center))
    e = kinematic_energy(obs, twist, center)
    return KinematicEstimate(
        twist=twist,
        center=center,
        residual_rms=math.sqrt(e / len(obs)),
        rank=rank,
        iterations_used=rounds,
        energies=tuple(energies),
    )
