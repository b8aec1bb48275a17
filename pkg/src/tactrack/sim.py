"""Synthetic in-hand trajectories with contact kinematics and noisy hypotheses.

The object's twist (world-frame velocity of its center and angular velocity)
follows a per-axis sinusoid. Default amplitudes give a mean per-frame motion
of roughly 0.45 deg and 0.65 mm at 30 FPS, the magnitude measured for real
in-hand manipulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .geom import Pose, Twist, rotation_exp
from .kinematics import ContactObservation
from .tracker import Hypothesis, ListHypothesisSource, integrate_pose

# Per-axis peak speeds; calibrated by Monte-Carlo against the motion targets.
DEFAULT_LINEAR_AMPLITUDE = (0.0164, 0.0164, 0.0164)  # m/s
DEFAULT_ANGULAR_AMPLITUDE = (0.197, 0.197, 0.197)  # rad/s
FREQUENCY_RANGE = (0.05, 0.5)  # Hz; slow enough that motions persist over a clip

# Two fingertip pads on the planes x = +-1 cm, each a 4 x 2 grid with 4 mm
# pitch, centred GRASP_OFFSET away from the object center (body frame).
PAD_SEPARATION = 0.02
PAD_PITCH = 0.004
GRASP_OFFSET = (0.0, 0.0, 0.05)


def _vec3(v) -> tuple:
    return tuple(float(c) for c in np.asarray(v, dtype=float).reshape(3))


@dataclass(frozen=True)
class TrajectorySpec:
    """Sinusoidal twist profile ``a * sin(2 pi f t + phase)`` per axis.

    Frequencies and phases left as ``None`` are drawn from ``seed``. Use a
    zero frequency with phase pi/2 for a constant component.
    """

    frame_count: int = 100
    fps: float = 30.0
    linear_amplitude: tuple = DEFAULT_LINEAR_AMPLITUDE
    angular_amplitude: tuple = DEFAULT_ANGULAR_AMPLITUDE
    linear_frequency: Optional[tuple] = None
    angular_frequency: Optional[tuple] = None
    linear_phase: Optional[tuple] = None
    angular_phase: Optional[tuple] = None
    seed: int = 0

    def __post_init__(self):
        if self.frame_count < 2:
            raise ValueError("frame_count must be >= 2")
        if not self.fps > 0:
            raise ValueError("fps must be positive")
        for name in ("linear_amplitude", "angular_amplitude"):
            amp = _vec3(getattr(self, name))
            if min(amp) < 0:
                raise ValueError(f"{name} must be non-negative")
            object.__setattr__(self, name, amp)
        for name in ("linear_frequency", "angular_frequency", "linear_phase", "angular_phase"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _vec3(val))

    def resolved(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Frequencies and phases as (lin_f, ang_f, lin_phase, ang_phase)."""
        rng = np.random.default_rng([self.seed, 0])
        drawn_f = rng.uniform(*FREQUENCY_RANGE, size=6)
        drawn_p = rng.uniform(0.0, 2.0 * math.pi, size=6)
        pick = lambda given, drawn: np.asarray(given if given is not None else drawn, dtype=float)
        return (
            pick(self.linear_frequency, drawn_f[:3]),
            pick(self.angular_frequency, drawn_f[3:]),
            pick(self.linear_phase, drawn_p[:3]),
            pick(self.angular_phase, drawn_p[3:]),
        )

    def twist_at(self, t: float) -> Twist:
        lf, af, lp, ap = self.resolved()
        return _profile(self, lf, af, lp, ap, t)


def _profile(spec, lf, af, lp, ap, t) -> Twist:
    v = np.asarray(spec.linear_amplitude) * np.sin(2.0 * math.pi * lf * t + lp)
    w = np.asarray(spec.angular_amplitude) * np.sin(2.0 * math.pi * af * t + ap)
    return Twist(v, w)


@dataclass(frozen=True)
class ContactNoiseSpec:
    position_sigma: float = 0.0  # m, per axis
    velocity_sigma: float = 0.0  # m/s, per axis
    seed: int = 0

    def __post_init__(self):
        if self.position_sigma < 0 or self.velocity_sigma < 0:
            raise ValueError("noise sigmas must be non-negative")


@dataclass(frozen=True)
class HypothesisNoiseSpec:
    rotation_sigma: float = 0.0  # rad; angle is |N(0, sigma)| about a random axis
    translation_sigma: float = 0.0  # m, per axis
    outlier_probability: float = 0.0
    outlier_scale: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.rotation_sigma < 0 or self.translation_sigma < 0 or self.outlier_scale < 0:
            raise ValueError("noise sigmas must be non-negative")
        if not 0.0 <= self.outlier_probability <= 1.0:
            raise ValueError("outlier_probability must lie in [0, 1]")


class Sample(NamedTuple):
    timestamp: float
    pose: Pose
    twist: Twist


def generate_trajectory(spec: TrajectorySpec, initial_pose: Optional[Pose] = None) -> list[Sample]:
    """Ground-truth poses at ``frame_count`` frames.

    Frame ``i`` stores the twist held over ``((i - 1) dt, i dt]``, sampled at
    the interval midpoint; frame 0 stores the twist of the interval before it.
    """
    pose = initial_pose or Pose()
    dt = 1.0 / spec.fps
    lf, af, lp, ap = spec.resolved()
    out = []
    for i in range(spec.frame_count):
        twist = _profile(spec, lf, af, lp, ap, (i - 0.5) * dt)
        if i > 0:
            pose = integrate_pose(pose, twist, dt)
        out.append(Sample(i * dt, pose, twist))
    return out


def default_contact_patch(
    separation: float = PAD_SEPARATION,
    pitch: float = PAD_PITCH,
    offset=GRASP_OFFSET,
) -> np.ndarray:
    """16 body-frame contact points: two opposing 4 x 2 pads."""
    ys = (np.arange(4) - 1.5) * pitch
    zs = (np.arange(2) - 0.5) * pitch
    pts = [
        (side * separation / 2.0, y, z)
        for side in (-1.0, 1.0)
        for y in ys
        for z in zs
    ]
    return np.asarray(pts) + np.asarray(offset, dtype=float)


def simulate_contacts(
    pose: Pose,
    twist: Twist,
    body_points,
    noise: Optional[ContactNoiseSpec] = None,
    rng: Optional[np.random.Generator] = None,
) -> ContactObservation:
    """World-frame contact positions and velocities, ``v_p = v + w x (p - t)``.

    Pass one ``rng`` across frames of a trajectory; without it a fresh
    generator is seeded from ``noise.seed``.
    """
    body_points = np.asarray(body_points, dtype=float).reshape(-1, 3)
    if not len(body_points):
        raise ValueError("need at least one contact point")
    p = pose.apply(body_points)
    v = twist.linear + np.cross(twist.angular, p - pose.translation)
    if noise is not None and (noise.position_sigma > 0 or noise.velocity_sigma > 0):
        rng = rng if rng is not None else np.random.default_rng(noise.seed)
        p = p + rng.normal(0.0, noise.position_sigma, size=p.shape)
        v = v + rng.normal(0.0, noise.velocity_sigma, size=v.shape)
    return ContactObservation(p, v)


def simulate_observations(
    samples: Sequence[Sample], body_points, noise: Optional[ContactNoiseSpec] = None
) -> list[tuple[float, ContactObservation]]:
    rng = np.random.default_rng(noise.seed if noise is not None else 0)
    return [(s.timestamp, simulate_contacts(s.pose, s.twist, body_points, noise, rng)) for s in samples]


def random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    while True:
        a = rng.normal(size=3)
        n = np.linalg.norm(a)
        if n > 1e-12:
            return a / n


def perturb_pose(pose: Pose, rotation_sigma: float, translation_sigma: float, rng) -> Pose:
    angle = abs(rng.normal(0.0, rotation_sigma)) if rotation_sigma > 0 else 0.0
    axis = random_unit_vector(rng)
    offset = rng.normal(0.0, translation_sigma, size=3) if translation_sigma > 0 else np.zeros(3)
    return Pose(rotation_exp(axis * angle) @ pose.rotation, pose.translation + offset)


def noisy_hypotheses(gt: Sequence[Pose], noise: HypothesisNoiseSpec) -> ListHypothesisSource:
    """Ground truth left-perturbed by random rotations and offset by Gaussian noise."""
    return ListHypothesisSource(noisy_hypothesis_list(gt, noise))


def noisy_hypothesis_list(gt: Sequence[Pose], noise: HypothesisNoiseSpec) -> list[Hypothesis]:
    rng = np.random.default_rng(noise.seed)
    out = []
    for pose in gt:
        scale = noise.outlier_scale if rng.random() < noise.outlier_probability else 1.0
        out.append(Hypothesis(perturb_pose(pose, noise.rotation_sigma * scale, noise.translation_sigma * scale, rng)))
    return out


@dataclass
class SimulatedTrajectory:
    samples: list
    observations: list
    hypotheses: list
    body_points: np.ndarray = field(repr=False)

    @property
    def ground_truth(self) -> list[Pose]:
        return [s.pose for s in self.samples]

    @property
    def initial_pose(self) -> Pose:
        return self.samples[0].pose


def simulate(
    spec: TrajectorySpec,
    contact_noise: Optional[ContactNoiseSpec] = None,
    hypothesis_noise: Optional[HypothesisNoiseSpec] = None,
    initial_pose: Optional[Pose] = None,
    body_points=None,
) -> SimulatedTrajectory:
    """Trajectory, contact observations and hypotheses in one call."""
    body = default_contact_patch() if body_points is None else np.asarray(body_points, dtype=float)
    samples = generate_trajectory(spec, initial_pose)
    obs = simulate_observations(samples, body, contact_noise)
    hyps = noisy_hypothesis_list([s.pose for s in samples], hypothesis_noise or HypothesisNoiseSpec())
    return SimulatedTrajectory(samples, obs, hyps, body)
