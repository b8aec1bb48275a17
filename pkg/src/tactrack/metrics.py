"""Pose-error metrics and the per-run report."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from .geom import Pose, geodesic_angle

ROT_THRESHOLD_DEG = 5.0
CM5_MM = 50.0
MM5_MM = 5.0


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Aggregates:
    pct_5deg5cm: float
    pct_5deg5mm: float
    mean_rot_deg: float
    mean_trans_mm: float


def frame_errors(estimates: Sequence[Pose], ground_truth: Sequence[Pose]) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame rotation error (degrees) and translation error (mm)."""
    if len(estimates) != len(ground_truth):
        raise LengthMismatch(f"{len(estimates)} estimates vs {len(ground_truth)} ground-truth poses")
    if not len(estimates):
        raise LengthMismatch("need at least one frame")
    rot = np.array([math.degrees(geodesic_angle(e.rotation, g.rotation)) for e, g in zip(estimates, ground_truth)])
    trans = np.array([1000.0 * float(np.linalg.norm(e.translation - g.translation)) for e, g in zip(estimates, ground_truth)])
    return rot, trans


def aggregate(rot_deg, trans_mm) -> Aggregates:
    rot = np.asarray(rot_deg, dtype=float)
    trans = np.asarray(trans_mm, dtype=float)
    if rot.shape != trans.shape:
        raise LengthMismatch("rotation and translation error arrays differ in length")
    if not rot.size:
        raise LengthMismatch("need at least one frame")
    ok_rot = rot <= ROT_THRESHOLD_DEG
    return Aggregates(
        pct_5deg5cm=100.0 * float(np.mean(ok_rot & (trans <= CM5_MM))),
        pct_5deg5mm=100.0 * float(np.mean(ok_rot & (trans <= MM5_MM))),
        mean_rot_deg=float(np.mean(rot)),
        mean_trans_mm=float(np.mean(trans)),
    )


def compute_metrics(estimates: Sequence[Pose], ground_truth: Sequence[Pose]) -> Aggregates:
    return aggregate(*frame_errors(estimates, ground_truth))


@dataclass
class TrackReport:
    rotation_error: list
    translation_error: list
    aggregates: Aggregates
    timings: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    seed: Optional[int] = None

    @classmethod
    def from_poses(cls, estimates, ground_truth, **kw) -> TrackReport:
        rot, trans = frame_errors(estimates, ground_truth)
        return cls(rot.tolist(), trans.tolist(), aggregate(rot, trans), **kw)

    def consistent(self, tol: float = 1e-9) -> bool:
        """Aggregates match a recomputation from the per-frame values."""
        again = aggregate(self.rotation_error, self.translation_error)
        a, b = asdict(self.aggregates), asdict(again)
        in_range = all(0.0 <= a[k] <= 100.0 for k in ("pct_5deg5cm", "pct_5deg5mm"))
        return in_range and all(abs(a[k] - b[k]) <= tol for k in a)

    def to_dict(self) -> dict[str, Any]:
        return {
            "per_frame": {
                "rotation_error": list(self.rotation_error),
                "translation_error": list(self.translation_error),
            },
            "aggregates": asdict(self.aggregates),
            "timings": dict(self.timings),
            "config": dict(self.config),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> TrackReport:
        return cls(
            list(doc["per_frame"]["rotation_error"]),
            list(doc["per_frame"]["translation_error"]),
            Aggregates(**doc["aggregates"]),
            dict(doc.get("timings", {})),
            dict(doc.get("config", {})),
            doc.get("seed"),
        )
