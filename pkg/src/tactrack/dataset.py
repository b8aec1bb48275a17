"""JSON trajectory files: ground truth, contact observations and optional hypotheses.

Layout (format_version 1)::

    {"header": {"format_version": 1, "object_id": str, "fps": num, "frame_count": int},
     "frames": [{"t": s,
                 "gt_pose": {"q": [w, x, y, z], "p": [x, y, z]},
                 "contacts": {"points": [[x, y, z], ...], "velocities": [[vx, vy, vz], ...]},
                 "hypothesis": {"q": [...], "p": [...], "confidence": c}},  # optional
                ...]}

Quaternions are (w, x, y, z), positions in meters, velocities in m/s. Floats are
written with Python's shortest round-trip repr, so write -> read -> write is
byte-identical. Concurrent writes to one path are not supported.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .geom import Pose
from .kinematics import ContactObservation
from .tracker import Hypothesis, ListHypothesisSource

FORMAT_VERSION = 1
QUAT_TOL = 1e-6
# Quaternions closer to unit than this are kept bit-exact on read.
RENORM_FLOOR = 1e-12


class DatasetError(Exception):
    pass


class IoError(DatasetError):
    """The file could not be read or written."""


class ParseError(DatasetError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class ValidationError(DatasetError):
    """Every invariant violation found in a document, one string each."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        shown = "; ".join(self.violations[:20])
        more = f" (+{len(self.violations) - 20} more)" if len(self.violations) > 20 else ""
        super().__init__(f"{len(self.violations)} invalid field(s): {shown}{more}")


Vec3 = tuple[float, float, float]
Quat = tuple[float, float, float, float]


@dataclass(frozen=True)
class Header:
    object_id: str
    fps: float
    frame_count: int
    format_version: int = FORMAT_VERSION


@dataclass(frozen=True)
class PoseRecord:
    q: Quat
    p: Vec3

    @classmethod
    def from_pose(cls, pose: Pose) -> PoseRecord:
        return cls(_floats(pose.quat()), _floats(pose.translation))

    def to_pose(self) -> Pose:
        return Pose.from_quat(self.q, self.p)


@dataclass(frozen=True)
class HypothesisRecord:
    q: Quat
    p: Vec3
    confidence: float = 1.0

    def to_hypothesis(self) -> Hypothesis:
        return Hypothesis(Pose.from_quat(self.q, self.p), self.confidence)


@dataclass(frozen=True)
class FrameRecord:
    t: float
    gt_pose: PoseRecord
    points: tuple[Vec3, ...]
    velocities: tuple[Vec3, ...]
    hypothesis: Optional[HypothesisRecord] = None

    def observation(self) -> ContactObservation:
        return ContactObservation(np.array(self.points).reshape(-1, 3), np.array(self.velocities).reshape(-1, 3))


@dataclass(frozen=True)
class TrajectoryFile:
    header: Header
    frames: tuple[FrameRecord, ...]

    def observations(self) -> list[tuple[float, ContactObservation]]:
        return [(f.t, f.observation()) for f in self.frames]

    def ground_truth(self) -> list[Pose]:
        return [f.gt_pose.to_pose() for f in self.frames]

    def initial_pose(self) -> Pose:
        return self.frames[0].gt_pose.to_pose()

    def has_hypotheses(self) -> bool:
        return any(f.hypothesis is not None for f in self.frames)


def _floats(v) -> tuple:
    return tuple(float(c) for c in np.asarray(v, dtype=float).reshape(-1))


def as_hypothesis_source(data: TrajectoryFile) -> ListHypothesisSource:
    """Per-frame hypotheses; frames without one report ``None``."""
    return ListHypothesisSource(
        [None if f.hypothesis is None else f.hypothesis.to_hypothesis() for f in data.frames]
    )


def from_samples(
    object_id: str,
    fps: float,
    timestamps: Sequence[float],
    gt: Sequence[Pose],
    observations: Sequence[ContactObservation],
    hypotheses: Optional[Sequence[Optional[Hypothesis]]] = None,
) -> TrajectoryFile:
    frames = []
    for k, (t, pose, obs) in enumerate(zip(timestamps, gt, observations)):
        h = None if hypotheses is None else hypotheses[k]
        rec = None
        if h is not None:
            base = PoseRecord.from_pose(h.pose)
            rec = HypothesisRecord(base.q, base.p, float(h.confidence))
        frames.append(
            FrameRecord(
                float(t),
                PoseRecord.from_pose(pose),
                tuple(_floats(p) for p in obs.points),
                tuple(_floats(v) for v in obs.velocities),
                rec,
            )
        )
    return TrajectoryFile(Header(object_id, float(fps), len(frames)), tuple(frames))


def from_simulation(sim, fps: float, object_id: str = "sim") -> TrajectoryFile:
    """Convert a :class:`tactrack.sim.SimulatedTrajectory`."""
    return from_samples(
        object_id,
        fps,
        [s.timestamp for s in sim.samples],
        sim.ground_truth,
        [obs for _, obs in sim.observations],
        sim.hypotheses,
    )


# -- serialization ---------------------------------------------------------


def to_document(data: TrajectoryFile) -> dict:
    frames = []
    for f in data.frames:
        doc = {
            "t": f.t,
            "gt_pose": {"q": list(f.gt_pose.q), "p": list(f.gt_pose.p)},
            "contacts": {
                "points": [list(p) for p in f.points],
                "velocities": [list(v) for v in f.velocities],
            },
        }
        if f.hypothesis is not None:
            h = f.hypothesis
            doc["hypothesis"] = {"q": list(h.q), "p": list(h.p), "confidence": h.confidence}
        frames.append(doc)
    h = data.header
    return {
        "header": {
            "format_version": h.format_version,
            "object_id": h.object_id,
            "fps": h.fps,
            "frame_count": h.frame_count,
        },
        "frames": frames,
    }


def dumps(data: TrajectoryFile) -> str:
    doc = to_document(data)
    errors = validate_document(doc)
    if errors:
        raise ValidationError(errors)
    return json.dumps(doc, separators=(",", ":"), allow_nan=False) + "\n"


def write_trajectory(path, data: TrajectoryFile) -> None:
    text = dumps(data)
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _reject_constant(name):
    raise ValueError(f"non-standard JSON constant {name}")


def loads(text: str) -> TrajectoryFile:
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from exc
    except ValueError as exc:
        raise ParseError(str(exc), 0, 0) from exc
    errors = validate_document(doc)
    if errors:
        raise ValidationError(errors)
    return _build(doc)


def read_trajectory(path) -> TrajectoryFile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return loads(text)


# -- validation ------------------------------------------------------------


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _check_vec(x, n: int, where: str, errors: list) -> bool:
    if not isinstance(x, list) or len(x) != n or not all(_is_num(c) for c in x):
        errors.append(f"{where}: expected {n} finite numbers")
        return False
    return True


def _check_pose(doc, where: str, errors: list) -> None:
    if not isinstance(doc, dict):
        errors.append(f"{where}: expected an object")
        return
    if _check_vec(doc.get("q"), 4, f"{where}.q", errors):
        norm = math.sqrt(sum(c * c for c in doc["q"]))
        if abs(norm - 1.0) > QUAT_TOL:
            errors.append(f"{where}.q: quaternion norm {norm:.9g} is not within {QUAT_TOL:g} of 1")
    _check_vec(doc.get("p"), 3, f"{where}.p", errors)


def _check_vec_list(x, where: str, errors: list) -> Optional[int]:
    if not isinstance(x, list):
        errors.append(f"{where}: expected an array of 3-vectors")
        return None
    ok = True
    for j, v in enumerate(x):
        ok = _check_vec(v, 3, f"{where}[{j}]", errors) and ok
    return len(x)


def validate_document(doc: Any) -> list[str]:
    """All invariant violations of a decoded document (empty when valid)."""
    errors: list[str] = []
    if not isinstance(doc, dict):
        return ["document: expected an object"]
    header = doc.get("header")
    frames = doc.get("frames")
    if not isinstance(header, dict):
        errors.append("header: expected an object")
        header = {}
    else:
        if header.get("format_version") != FORMAT_VERSION or isinstance(header.get("format_version"), bool):
            errors.append(f"header.format_version: expected {FORMAT_VERSION}")
        if not isinstance(header.get("object_id"), str):
            errors.append("header.object_id: expected a string")
        fps = header.get("fps")
        if not (_is_num(fps) and fps > 0):
            errors.append("header.fps: expected a positive number")
        fc = header.get("frame_count")
        if not (isinstance(fc, int) and not isinstance(fc, bool) and fc >= 0):
            errors.append("header.frame_count: expected a non-negative integer")
    if not isinstance(frames, list):
        errors.append("frames: expected an array")
        return errors
    fc = header.get("frame_count")
    if isinstance(fc, int) and not isinstance(fc, bool) and fc != len(frames):
        errors.append(f"header.frame_count: {fc} does not match {len(frames)} frames")

    prev_t = None
    for k, f in enumerate(frames):
        where = f"frames[{k}]"
        if not isinstance(f, dict):
            errors.append(f"{where}: expected an object")
            continue
        t = f.get("t")
        if not _is_num(t):
            errors.append(f"{where}.t: expected a finite number")
        else:
            if prev_t is not None and not t > prev_t:
                errors.append(f"{where}.t: timestamp {t!r} is not after {prev_t!r}")
            prev_t = t
        _check_pose(f.get("gt_pose"), f"{where}.gt_pose", errors)
        contacts = f.get("contacts")
        if not isinstance(contacts, dict):
            errors.append(f"{where}.contacts: expected an object")
        else:
            n_p = _check_vec_list(contacts.get("points"), f"{where}.contacts.points", errors)
            n_v = _check_vec_list(contacts.get("velocities"), f"{where}.contacts.velocities", errors)
            if n_p is not None and n_v is not None and n_p != n_v:
                errors.append(f"{where}.contacts: {n_p} points but {n_v} velocities")
        if "hypothesis" in f and f["hypothesis"] is not None:
            h = f["hypothesis"]
            _check_pose(h, f"{where}.hypothesis", errors)
            if isinstance(h, dict):
                c = h.get("confidence", 1.0)
                if not (_is_num(c) and c >= 0):
                    errors.append(f"{where}.hypothesis.confidence: expected a non-negative number")
    return errors


def _unit(q) -> Quat:
    q = tuple(float(c) for c in q)
    norm = math.sqrt(sum(c * c for c in q))
    if abs(norm - 1.0) > RENORM_FLOOR:
        q = tuple(c / norm for c in q)
    return q


def _build(doc: dict) -> TrajectoryFile:
    h = doc["header"]
    header = Header(h["object_id"], h["fps"], h["frame_count"], h["format_version"])
    frames = []
    for f in doc["frames"]:
        gt = f["gt_pose"]
        hyp = f.get("hypothesis")
        rec = None
        if hyp is not None:
            rec = HypothesisRecord(_unit(hyp["q"]), _floats(hyp["p"]), hyp.get("confidence", 1.0))
        frames.append(
            FrameRecord(
                f["t"],
                PoseRecord(_unit(gt["q"]), _floats(gt["p"])),
                tuple(_floats(p) for p in f["contacts"]["points"]),
                tuple(_floats(v) for v in f["contacts"]["velocities"]),
                rec,
            )
        )
    return TrajectoryFile(header, tuple(frames))


# -- pose tracks -----------------------------------------------------------


def write_pose_track(path, poses: Sequence[Pose], timestamps: Sequence[float], object_id: str = "", mode: str = "") -> None:
    """Write tracker output as ``{"format_version", "object_id", "mode", "poses": [{t, q, p}]}``."""
    if len(poses) != len(timestamps):
        raise ValueError("poses and timestamps differ in length")
    doc = {
        "format_version": FORMAT_VERSION,
        "object_id": object_id,
        "mode": mode,
        "poses": [
            {"t": float(t), "q": list(_floats(p.quat())), "p": list(_floats(p.translation))}
            for t, p in zip(timestamps, poses)
        ],
    }
    try:
        Path(path).write_text(json.dumps(doc, separators=(",", ":"), allow_nan=False) + "\n", encoding="utf-8")
    except (OSError, ValueError) as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_poses(path) -> tuple[list[float], list[Pose]]:
    """Timestamps and poses from a pose-track file, or ground truth from a trajectory file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from exc
    except ValueError as exc:
        raise ParseError(str(exc), 0, 0) from exc
    if isinstance(doc, dict) and "frames" in doc:
        data = loads(text)
        return [f.t for f in data.frames], data.ground_truth()
    errors: list[str] = []
    items = doc.get("poses") if isinstance(doc, dict) else None
    if not isinstance(items, list):
        raise ValidationError(["poses: expected an array"])
    for k, item in enumerate(items):
        if not isinstance(item, dict) or not _is_num(item.get("t")):
            errors.append(f"poses[{k}].t: expected a finite number")
        _check_pose(item, f"poses[{k}]", errors)
    if errors:
        raise ValidationError(errors)
    return [float(i["t"]) for i in items], [Pose.from_quat(_unit(i["q"]), i["p"]) for i in items]
