"""Online pose tracking from contact kinematics and per-frame pose hypotheses.

Three modes share one entry point, :func:`track`:

* ``kinematics_only`` integrates the per-frame twist from the initial pose.
* ``visual_only`` emits the hypotheses as they come.
* ``fused`` keeps a sliding window of the last ``window_n`` frames. The poses in
  the window are tied together by the estimated twists, so the only free
  quantity is the pose of the oldest frame. That 6-DoF state is fitted to the
  hypotheses with Adam, and every pose in the window is rewritten from it.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Protocol, Sequence, Union

import numpy as np

from .geom import (
    Pose,
    Twist,
    chordal_sq,
    exp_and_left_jacobian,
    project_to_rotation,
    rotation_exp,
    skew,
)
from .kinematics import ContactObservation, estimate_kinematics
from .optim import OptimizerConfig, minimize

MODES = ("kinematics_only", "visual_only", "fused")


class MissingInitialHypothesisWindow(RuntimeError):
    """No hypothesis at all in the first window of a fused run."""


@dataclass(frozen=True)
class Hypothesis:
    pose: Pose
    confidence: float = 1.0


class HypothesisSource(Protocol):
    def hypothesis(self, index: int) -> Optional[Hypothesis]:
        ...


class ListHypothesisSource:
    """Hypotheses held in memory; ``None`` entries mean "no hypothesis"."""

    def __init__(self, items: Iterable[Union[Pose, Hypothesis, None]]):
        self._items = [Hypothesis(h) if isinstance(h, Pose) else h for h in items]

    def hypothesis(self, index: int) -> Optional[Hypothesis]:
        if 0 <= index < len(self._items):
            return self._items[index]
        return None

    def __len__(self) -> int:
        return len(self._items)


@dataclass(frozen=True)
class TrackerConfig:
    window_n: int = 5
    lambda_t: float = 0.01
    lambda_r: float = 0.1
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    mode: str = "fused"

    def __post_init__(self):
        if self.window_n < 1:
            raise ValueError("window_n must be >= 1")
        if not (self.lambda_t > 0 and self.lambda_r > 0):
            raise ValueError("lambda_t and lambda_r must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass
class WindowFrame:
    timestamp: float
    # Interval to the previous frame; ignored for the oldest frame in a window.
    dt: float
    twist: Twist
    hypothesis: Optional[Hypothesis]
    pose: Pose


class WindowState:
    """Ring buffer of the most recent frames."""

    def __init__(self, window_n: int):
        self.window_n = window_n
        self.frames: deque[WindowFrame] = deque(maxlen=window_n)

    def push(self, frame: WindowFrame) -> None:
        if self.frames and not frame.timestamp > self.frames[-1].timestamp:
            raise ValueError("timestamps must be strictly increasing")
        self.frames.append(frame)

    @property
    def poses(self) -> list[Pose]:
        return [f.pose for f in self.frames]

    def __len__(self) -> int:
        return len(self.frames)


def integrate_pose(prev: Pose, twist: Twist, dt: float) -> Pose:
    """Advance a pose by a constant twist held over ``dt`` seconds."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not np.any(twist.angular):
        return Pose(prev.rotation, prev.translation + twist.linear * dt)
    rot = project_to_rotation(rotation_exp(twist.angular * dt) @ prev.rotation)
    return Pose(rot, prev.translation + twist.linear * dt)


def anchor_twist(twist: Twist, reference, dt: float) -> Twist:
    """Re-express a fitted twist at the object center it integrates to.

    ``twist.linear`` is the velocity of ``reference`` (the previous center).
    The object center after the step is ``reference + v dt`` with ``v`` its own
    velocity, which gives ``twist.linear = (I - dt [w]x) v``.
    """
    v = np.linalg.solve(np.eye(3) - dt * skew(twist.angular), twist.linear)
    return Twist(v, twist.angular)


def _estimate_step(obs: ContactObservation, prev: Pose, dt: Optional[float]) -> Twist:
    est = estimate_kinematics(obs, prev.translation)
    # Refer the linear velocity back to the previous translation in case the
    # center estimate moved along w.
    twist = Twist(est.twist.linear + skew(est.twist.angular) @ (prev.translation - est.center),
                  est.twist.angular)
    if dt is None:
        return twist
    return anchor_twist(twist, prev.translation, dt)


def track_kinematics_only(
    frames: Sequence[tuple[float, ContactObservation]], initial_pose: Pose
) -> list[Pose]:
    """Dead-reckon from ``initial_pose``, which is the pose at the first frame."""
    poses: list[Pose] = []
    pose = initial_pose
    prev_t = None
    for t, obs in frames:
        if prev_t is not None and not t > prev_t:
            raise ValueError("timestamps must be strictly increasing")
        dt = None if prev_t is None else t - prev_t
        twist = _estimate_step(obs, pose, dt)
        if dt is not None:
            pose = integrate_pose(pose, twist, dt)
        poses.append(pose)
        prev_t = t
    return poses


def chain_poses(state: WindowState, first_pose: Pose) -> list[Pose]:
    poses = [first_pose]
    for f in list(state.frames)[1:]:
        poses.append(integrate_pose(poses[-1], f.twist, f.dt))
    return poses


def geo_energy(pose: Pose, hyp: Hypothesis, config: TrackerConfig) -> float:
    dt = pose.translation - hyp.pose.translation
    e = float(dt @ dt) / config.lambda_t**2 + chordal_sq(pose.rotation, hyp.pose.rotation) / config.lambda_r**2
    return hyp.confidence * e


def window_energy(state: WindowState, first_pose: Pose, config: TrackerConfig) -> float:
    """Hypothesis misfit of the window chained forward from ``first_pose``."""
    if not len(state):
        raise ValueError("empty window")
    total = 0.0
    for pose, f in zip(chain_poses(state, first_pose), state.frames):
        if f.hypothesis is not None:
            total += geo_energy(pose, f.hypothesis, config)
    return total


class WindowObjective:
    """:func:`window_energy` over a 6-vector perturbation of the first pose.

    ``x[:3]`` is a translation offset in meters and ``x[3:]`` an axis-angle
    perturbation applied on the left: ``R = rotation_exp(x[3:]) @ R0``.

    Each chained pose is ``(A_i R, t + c_i)`` with ``A_i`` and ``c_i`` fixed by
    the twists, so the energy reduces to

        sum_i w_i |t + c_i - h_i|^2 / lt^2 + sum_i w_i |R - A_i^T H_i|^2 / lr^2

    and costs the same for any window length.
    """

    def __init__(self, state: WindowState, config: TrackerConfig, base: Optional[Pose] = None):
        self.base = base if base is not None else state.frames[0].pose
        self.inv_lt2 = 1.0 / config.lambda_t**2
        self.inv_lr2 = 1.0 / config.lambda_r**2
        rel_rot = np.eye(3)
        rel_trans = np.zeros(3)
        weights, offsets = [], []
        m = np.zeros((3, 3))
        b_sq = 0.0
        for i, f in enumerate(state.frames):
            if i > 0:
                rel_rot = project_to_rotation(rotation_exp(f.twist.angular * f.dt) @ rel_rot)
                rel_trans = rel_trans + f.twist.linear * f.dt
            h = f.hypothesis
            if h is None or h.confidence == 0.0:
                continue
            b = rel_rot.T @ h.pose.rotation
            m += h.confidence * b
            b_sq += h.confidence * float(np.sum(b * b))
            weights.append(h.confidence)
            offsets.append(rel_trans - h.pose.translation)
        self.weights = np.array(weights)
        self.offsets = np.array(offsets).reshape(-1, 3)
        self.w_sum = float(self.weights.sum()) if weights else 0.0
        self.b_sq = b_sq
        # Work relative to the base pose: tr(R^T M) = <E, M R0^T> with E = exp(d).
        self._m0 = m @ self.base.rotation.T
        self._toff = self.base.translation + self.offsets

    @property
    def empty(self) -> bool:
        return self.w_sum == 0.0

    def pose(self, x) -> Pose:
        x = np.asarray(x, dtype=float)
        rot = project_to_rotation(rotation_exp(x[3:]) @ self.base.rotation)
        return Pose(rot, self.base.translation + x[:3])

    def value_and_grad(self, x) -> tuple[float, np.ndarray]:
        x = np.asarray(x, dtype=float)
        if self.empty:
            return 0.0, np.zeros(6)
        e, jac = exp_and_left_jacobian(x[3:])
        res = x[:3] + self._toff
        wres = self.weights[:, None] * res
        e_t = float(np.vdot(wres, res)) * self.inv_lt2
        e_r = (self.w_sum * float(np.vdot(e, e)) - 2.0 * float(np.vdot(e, self._m0)) + self.b_sq) * self.inv_lr2
        g = np.empty(6)
        g[:3] = (2.0 * self.inv_lt2) * wres.sum(axis=0)
        # Perturbing R -> (I + [u]x) R changes tr(R^T M) by u . vee(B - B^T), B = M R^T.
        b = self._m0 @ e.T
        skew_part = np.array([b[2, 1] - b[1, 2], b[0, 2] - b[2, 0], b[1, 0] - b[0, 1]])
        g[3:] = (-2.0 * self.inv_lr2) * (jac.T @ skew_part)
        return e_t + e_r, g

    def __call__(self, x) -> float:
        return self.value_and_grad(x)[0]

    def gradient(self, x) -> np.ndarray:
        return self.value_and_grad(x)[1]


def window_optimize(state: WindowState, config: TrackerConfig) -> list[Pose]:
    """Fit the oldest pose to the hypotheses and re-chain the whole window."""
    if not len(state):
        raise ValueError("empty window")
    obj = WindowObjective(state, config)
    if obj.empty:
        return state.poses
    res = minimize(obj.value_and_grad, np.zeros(6), gradient=True, config=config.optimizer)
    first = state.frames[0].pose if not np.any(res.x) else obj.pose(res.x)
    for f, p in zip(state.frames, chain_poses(state, first)):
        f.pose = p
    return state.poses


def _validate_times(frames) -> None:
    ts = [t for t, _ in frames]
    if any(not b > a for a, b in zip(ts, ts[1:])):
        raise ValueError("timestamps must be strictly increasing")


def track_visual_only(n_frames: int, hypotheses: HypothesisSource, initial_pose: Pose) -> list[Pose]:
    """Emit hypotheses; frames without one repeat the last emitted pose."""
    out = []
    last = initial_pose
    for k in range(n_frames):
        h = hypotheses.hypothesis(k)
        if h is not None:
            last = h.pose
        out.append(last)
    return out


def track_fused(
    frames: Sequence[tuple[float, ContactObservation]],
    hypotheses: HypothesisSource,
    initial_pose: Pose,
    config: Optional[TrackerConfig] = None,
    timings: Optional[dict] = None,
) -> list[Pose]:
    """Track in ``config.mode``.

    When ``timings`` is a dict, per-frame wall times (seconds) of the twist
    estimate and of the window optimization are appended under ``"kinematics"``
    and ``"window"`` (fused mode only).
    """
    config = config or TrackerConfig()
    if config.mode == "kinematics_only":
        return track_kinematics_only(frames, initial_pose)
    _validate_times(frames)
    if config.mode == "visual_only":
        return track_visual_only(len(frames), hypotheses, initial_pose)

    head = min(config.window_n, len(frames))
    if head and all(hypotheses.hypothesis(k) is None for k in range(head)):
        raise MissingInitialHypothesisWindow(
            f"no hypothesis in the first {head} frames; fused tracking needs at least one"
        )
    state = WindowState(config.window_n)
    out: list[Pose] = []
    pose = initial_pose
    prev_t = None
    for k, (t, obs) in enumerate(frames):
        dt = None if prev_t is None else t - prev_t
        t0 = time.perf_counter()
        twist = _estimate_step(obs, pose, dt)
        t1 = time.perf_counter()
        predicted = pose if dt is None else integrate_pose(pose, twist, dt)
        state.push(WindowFrame(t, dt or 0.0, twist, hypotheses.hypothesis(k), predicted))
        window_optimize(state, config)
        if timings is not None:
            timings.setdefault("kinematics", []).append(t1 - t0)
            timings.setdefault("window", []).append(time.perf_counter() - t1)
        pose = state.frames[-1].pose
        out.append(pose)
        prev_t = t
    return out


def track(
    frames: Sequence[tuple[float, ContactObservation]],
    hypotheses: Optional[HypothesisSource],
    initial_pose: Pose,
    config: Optional[TrackerConfig] = None,
) -> list[Pose]:
    """Run the tracker in ``config.mode``."""
    config = config or TrackerConfig()
    if hypotheses is None:
        if config.mode != "kinematics_only":
            raise MissingInitialHypothesisWindow(f"mode {config.mode} needs a hypothesis source")
        hypotheses = ListHypothesisSource([])
    return track_fused(frames, hypotheses, initial_pose, config)


def with_mode(config: TrackerConfig, mode: str) -> TrackerConfig:
    return replace(config, mode=mode)
