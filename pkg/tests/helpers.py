import math

import numpy as np

from tactrack.geom import Pose, geodesic_angle, rotation_exp
from tactrack.sim import TrajectorySpec, generate_trajectory
from tactrack.tracker import Hypothesis, WindowFrame, WindowState


def errors(est, gt):
    r = np.array([math.degrees(geodesic_angle(a.rotation, b.rotation)) for a, b in zip(est, gt)])
    t = np.array([1000 * np.linalg.norm(a.translation - b.translation) for a, b in zip(est, gt)])
    return r, t


def exact_window(seed, n=5, start=10):
    """Window built from a ground-truth clip with exact twists and hypotheses."""
    samples = generate_trajectory(TrajectorySpec(frame_count=start + n, seed=seed))[start:]
    state = WindowState(n)
    for s in samples:
        state.push(WindowFrame(s.timestamp, 1 / 30, s.twist, Hypothesis(s.pose), s.pose))
    return state, [s.pose for s in samples]


def perturbed(pose, rng, trans=0.005, angle_deg=2.0):
    d = rng.normal(size=3)
    d /= np.linalg.norm(d)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return Pose(rotation_exp(axis * math.radians(angle_deg)) @ pose.rotation, pose.translation + trans * d)
