"""Config-driven batch runs: data generation, (trajectory x mode) cells, CSV tables.

A config is a JSON object::

    {
      "output_dir": "runs/cmp",                 # relative to the config file
      "data": {"generate": {...}} | {"paths": ["a.json", ...]},
      "modes": ["fused", "visual_only"],
      "tracker": {"window_n": 5, "lambda_t": 0.01, "lambda_r": 0.1,
                  "optimizer": {"learning_rate": 0.01, ...}},
      "sweep": {"parameter": "window_n", "values": [3, 5, 7]},   # optional
      "workers": 1
    }

The generation block takes ``count``, ``seed``, ``frame_count``, ``fps``,
``object_id``, ``trajectory`` (TrajectorySpec amplitude/frequency/phase
overrides), ``contact_noise`` (``position_sigma`` m, ``velocity_sigma`` m/s),
``hypothesis_noise`` (``rotation_sigma`` rad, ``translation_sigma`` m,
``outlier_probability``, ``outlier_scale``), ``grasp_offset``, ``pad_separation``
and ``pad_pitch``.

Outputs in ``output_dir``: ``reports/<cell>.json`` per cell, ``aggregate.csv``
with one row per cell and ``summary.csv`` with one row per (sweep value, mode).
Column orders are fixed by ``AGGREGATE_COLUMNS`` and ``SUMMARY_COLUMNS``. The
CSVs hold no timings, so identical configs give byte-identical tables.
"""

from __future__ import annotations

import copy
import csv
import json
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Optional, Union

import jsonschema
import numpy as np

from . import sim
from .dataset import TrajectoryFile, as_hypothesis_source, from_simulation, read_trajectory
from .metrics import TrackReport
from .optim import OptimizerConfig
from .tracker import MODES, ListHypothesisSource, TrackerConfig, track, track_fused

AGGREGATE_COLUMNS = (
    "cell",
    "trajectory",
    "mode",
    "sweep_parameter",
    "sweep_value",
    "status",
    "frames",
    "pct_5deg5cm",
    "pct_5deg5mm",
    "mean_rot_deg",
    "mean_trans_mm",
    "error",
)
SUMMARY_COLUMNS = (
    "mode",
    "sweep_parameter",
    "sweep_value",
    "cells",
    "failed",
    "pct_5deg5cm",
    "pct_5deg5mm",
    "mean_rot_deg",
    "mean_trans_mm",
)
METRIC_COLUMNS = ("pct_5deg5cm", "pct_5deg5mm", "mean_rot_deg", "mean_trans_mm")

TRACKER_PARAMETERS = ("window_n", "lambda_t", "lambda_r")
DATA_PARAMETERS = (
    "contact_noise.position_sigma",
    "contact_noise.velocity_sigma",
    "hypothesis_noise.rotation_sigma",
    "hypothesis_noise.translation_sigma",
    "hypothesis_noise.outlier_probability",
)

# Noise levels of the synthetic benchmark used for the window-size and
# contact-noise studies. Hypotheses are about as accurate as a good visual
# tracker (a few degrees / millimeters); contact velocities are noisy enough
# that dead reckoning alone drifts by several degrees over 100 frames.
SYNTHETIC_SUITE = {
    "frame_count": 100,
    "fps": 30.0,
    "contact_noise": {"position_sigma": 0.0, "velocity_sigma": 0.01},
    "hypothesis_noise": {"rotation_sigma": math.radians(5.0), "translation_sigma": 0.0025},
}

_NUM = {"type": "number"}
_NONNEG = {"type": "number", "minimum": 0}
_VEC3 = {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}

GENERATE_SCHEMA = {
    "type": "object",
    "properties": {
        "count": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "frame_count": {"type": "integer", "minimum": 2},
        "fps": {"type": "number", "exclusiveMinimum": 0},
        "object_id": {"type": "string"},
        "trajectory": {
            "type": "object",
            "properties": {
                k: _VEC3
                for k in (
                    "linear_amplitude",
                    "angular_amplitude",
                    "linear_frequency",
                    "angular_frequency",
                    "linear_phase",
                    "angular_phase",
                )
            },
            "additionalProperties": False,
        },
        "contact_noise": {
            "type": "object",
            "properties": {"position_sigma": _NONNEG, "velocity_sigma": _NONNEG},
            "additionalProperties": False,
        },
        "hypothesis_noise": {
            "type": "object",
            "properties": {
                "rotation_sigma": _NONNEG,
                "translation_sigma": _NONNEG,
                "outlier_probability": {"type": "number", "minimum": 0, "maximum": 1},
                "outlier_scale": _NONNEG,
            },
            "additionalProperties": False,
        },
        "grasp_offset": _VEC3,
        "pad_separation": {"type": "number", "exclusiveMinimum": 0},
        "pad_pitch": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["output_dir", "data", "modes"],
    "properties": {
        "output_dir": {"type": "string", "minLength": 1},
        "data": {
            "type": "object",
            "oneOf": [
                {"required": ["generate"], "not": {"required": ["paths"]}},
                {"required": ["paths"], "not": {"required": ["generate"]}},
            ],
            "properties": {
                "generate": GENERATE_SCHEMA,
                "paths": {"type": "array", "items": {"type": "string"}, "minItems": 1},
            },
            "additionalProperties": False,
        },
        "modes": {"type": "array", "items": {"enum": list(MODES)}, "minItems": 1, "uniqueItems": True},
        "tracker": {
            "type": "object",
            "properties": {
                "window_n": {"type": "integer", "minimum": 1},
                "lambda_t": {"type": "number", "exclusiveMinimum": 0},
                "lambda_r": {"type": "number", "exclusiveMinimum": 0},
                "optimizer": {
                    "type": "object",
                    "properties": {
                        "learning_rate": {"type": "number", "exclusiveMinimum": 0},
                        "beta1": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                        "beta2": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                        "epsilon": _NONNEG,
                        "max_iterations": {"type": "integer", "minimum": 1},
                        "relative_tolerance": _NONNEG,
                        "window": {"type": "integer", "minimum": 1},
                    },
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "sweep": {
            "type": "object",
            "required": ["parameter", "values"],
            "properties": {
                "parameter": {"enum": list(TRACKER_PARAMETERS + DATA_PARAMETERS)},
                "values": {"type": "array", "items": _NONNEG, "minItems": 1},
            },
            "additionalProperties": False,
        },
        "workers": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    """Invalid experiment config; ``path`` locates the offending entry."""

    def __init__(self, message: str, path: str = "", schema_path: str = ""):
        where = path or "(root)"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.schema_path = schema_path


def _fmt_path(parts) -> str:
    return "/".join(str(p) for p in parts)


def validate_config(config: Any, schema: dict = CONFIG_SCHEMA) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(config), key=lambda e: (list(e.absolute_path), e.message))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise ConfigError(err.message, _fmt_path(err.absolute_path), _fmt_path(err.absolute_schema_path))
    sweep = config.get("sweep")
    if sweep and sweep["parameter"] in DATA_PARAMETERS and "paths" in config["data"]:
        raise ConfigError("noise sweeps need generated data", "sweep/parameter")
    if sweep and sweep["parameter"] == "window_n":
        for i, v in enumerate(sweep["values"]):
            if v != int(v) or v < 1:
                raise ConfigError("window_n values must be positive integers", f"sweep/values/{i}")


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    validate_config(config)
    return config


# -- data ------------------------------------------------------------------


def trajectory_seeds(seed: int, index: int) -> tuple[int, int, int]:
    """Independent (motion, contact noise, hypothesis noise) seeds for one trajectory."""
    a, b, c = np.random.SeedSequence([seed, index]).generate_state(3)
    return int(a), int(b), int(c)


def generate(gen: dict, index: int) -> sim.SimulatedTrajectory:
    """Trajectory ``index`` of a generation block."""
    s_motion, s_contact, s_hyp = trajectory_seeds(gen.get("seed", 0), index)
    spec = sim.TrajectorySpec(
        frame_count=gen.get("frame_count", 100),
        fps=gen.get("fps", 30.0),
        seed=s_motion,
        **gen.get("trajectory", {}),
    )
    cn = gen.get("contact_noise", {})
    hn = gen.get("hypothesis_noise", {})
    body = sim.default_contact_patch(
        gen.get("pad_separation", sim.PAD_SEPARATION),
        gen.get("pad_pitch", sim.PAD_PITCH),
        gen.get("grasp_offset", sim.GRASP_OFFSET),
    )
    return sim.simulate(
        spec,
        sim.ContactNoiseSpec(seed=s_contact, **cn),
        sim.HypothesisNoiseSpec(seed=s_hyp, **hn),
        body_points=body,
    )


def generate_files(gen: dict) -> list[TrajectoryFile]:
    oid = gen.get("object_id", "sim")
    fps = gen.get("fps", 30.0)
    return [from_simulation(generate(gen, j), fps, f"{oid}-{j:03d}") for j in range(gen.get("count", 1))]


@dataclass
class TrackInput:
    name: str
    timestamps: list
    observations: list
    hypotheses: list
    ground_truth: list

    @property
    def initial_pose(self):
        return self.ground_truth[0]

    @classmethod
    def from_simulation(cls, name: str, tr: sim.SimulatedTrajectory) -> TrackInput:
        return cls(name, [s.timestamp for s in tr.samples], tr.observations, tr.hypotheses, tr.ground_truth)

    @classmethod
    def from_file(cls, name: str, data: TrajectoryFile) -> TrackInput:
        src = as_hypothesis_source(data)
        return cls(
            name,
            [f.t for f in data.frames],
            data.observations(),
            [src.hypothesis(k) for k in range(len(data.frames))],
            data.ground_truth(),
        )


def _set_dotted(doc: dict, dotted: str, value) -> dict:
    out = copy.deepcopy(doc)
    head, _, leaf = dotted.partition(".")
    out.setdefault(head, {})[leaf] = value
    return out


def tracker_config(doc: Optional[dict]) -> TrackerConfig:
    doc = dict(doc or {})
    opt = OptimizerConfig(**doc.pop("optimizer", {}))
    return TrackerConfig(optimizer=opt, **doc)


# -- running ---------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    cell: str
    trajectory: str
    mode: str
    sweep_parameter: str
    sweep_value: Any


CELL_FIELDS = ("cell", "trajectory", "mode", "sweep_parameter", "sweep_value")


def _run_cell(cell: Cell, data: TrackInput, config: TrackerConfig, seed) -> tuple[dict, Optional[dict]]:
    row = {**asdict(cell), "status": "ok", "frames": len(data.timestamps), "error": ""}
    try:
        t0 = time.perf_counter()
        est = track(
            data.observations,
            ListHypothesisSource(data.hypotheses),
            data.initial_pose,
            replace(config, mode=cell.mode),
        )
        elapsed = time.perf_counter() - t0
        report = TrackReport.from_poses(
            est,
            data.ground_truth,
            timings={"track_s": elapsed, "per_frame_ms": 1000.0 * elapsed / max(1, len(est))},
            config={"mode": cell.mode, **_config_echo(config)},
            seed=seed,
        )
    except Exception as exc:  # a failed cell must not stop the run
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        for k in METRIC_COLUMNS:
            row[k] = None
        return row, None
    row.update(asdict(report.aggregates))
    doc = report.to_dict()
    doc["cell"] = asdict(cell)
    return row, doc


def _run_cell_packed(args):
    return _run_cell(*args)


def _config_echo(config: TrackerConfig) -> dict:
    d = asdict(config)
    d.pop("mode", None)
    return d


@dataclass
class ExperimentResult:
    output_dir: Path
    rows: list
    summary: list


def run_experiment(config: Union[dict, str, Path], output_dir=None) -> ExperimentResult:
    """Run every (sweep value x trajectory x mode) cell and write the tables."""
    base = Path(".")
    if isinstance(config, (str, Path)):
        base = Path(config).resolve().parent
        config = load_config(config)
    else:
        validate_config(config)
    out = Path(output_dir) if output_dir is not None else base / config["output_dir"]
    reports = out / "reports"
    reports.mkdir(parents=True, exist_ok=True)

    base_tracker = config.get("tracker", {})
    try:
        tracker_config(base_tracker)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "tracker") from exc
    sweep = config.get("sweep")
    values = sweep["values"] if sweep else [None]
    param = sweep["parameter"] if sweep else ""

    loaded = None
    if "paths" in config["data"]:
        loaded = []
        for i, p in enumerate(config["data"]["paths"]):
            path = Path(p) if Path(p).is_absolute() else base / p
            try:
                loaded.append(TrackInput.from_file(p, read_trajectory(path)))
            except Exception as exc:
                raise ConfigError(f"cannot load {p}: {exc}", f"data/paths/{i}") from exc

    tasks = []
    for si, value in enumerate(values):
        tdoc, gen = base_tracker, config["data"].get("generate")
        if param in TRACKER_PARAMETERS:
            tdoc = {**base_tracker, param: int(value) if param == "window_n" else value}
        elif param in DATA_PARAMETERS:
            gen = _set_dotted(gen, param, value)
        try:
            tcfg = tracker_config(tdoc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), f"sweep/values/{si}") from exc
        if loaded is not None:
            inputs, seeds = loaded, [None] * len(loaded)
        else:
            inputs = [
                TrackInput.from_simulation(f"gen-{j:03d}", generate(gen, j)) for j in range(gen.get("count", 1))
            ]
            seeds = [gen.get("seed", 0)] * len(inputs)
        for ti, (data, seed) in enumerate(zip(inputs, seeds)):
            for mode in config["modes"]:
                cell = Cell(f"s{si:02d}-t{ti:03d}-{mode}", data.name, mode, param, value)
                tasks.append((cell, data, tcfg, seed))

    workers = config.get("workers", 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell_packed, tasks, chunksize=1))
    else:
        results = [_run_cell(*t) for t in tasks]

    rows = []
    for row, doc in results:
        rows.append(row)
        if doc is not None:
            (reports / f"{row['cell']}.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        else:
            failed = {"cell": {k: row[k] for k in CELL_FIELDS}, "status": "failed", "error": row["error"]}
            (reports / f"{row['cell']}.json").write_text(json.dumps(failed, indent=1) + "\n", encoding="utf-8")
    summary = summarize(rows)
    write_csv(out / "aggregate.csv", AGGREGATE_COLUMNS, rows)
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary)
    return ExperimentResult(out, rows, summary)


def summarize(rows: list[dict]) -> list[dict]:
    groups: dict = {}
    for r in rows:
        groups.setdefault((_key(r["sweep_value"]), r["mode"]), []).append(r)
    out = []
    for (_, mode), rs in groups.items():
        ok = [r for r in rs if r["status"] == "ok"]
        row = {
            "mode": mode,
            "sweep_parameter": rs[0]["sweep_parameter"],
            "sweep_value": rs[0]["sweep_value"],
            "cells": len(rs),
            "failed": len(rs) - len(ok),
        }
        for k in METRIC_COLUMNS:
            row[k] = statistics.fmean(r[k] for r in ok) if ok else None
        out.append(row)
    return out


def _key(v):
    return "" if v is None else repr(v)


def _cell_text(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell_text(r.get(c)) for c in columns])


# -- speed -----------------------------------------------------------------


@dataclass(frozen=True)
class SpeedReport:
    frames: int
    contacts: int
    window_n: int
    kinematics_ms: float
    window_ms: float
    kinematics_fps: float
    window_fps: float


def measure_speed(data: TrajectoryFile, config: Optional[TrackerConfig] = None, repeats: int = 1) -> SpeedReport:
    """Median per-frame wall time of twist estimation and window optimization.

    Files without hypotheses are replayed with their ground truth as
    hypotheses so the window optimizer has something to fit.
    """
    config = replace(config or TrackerConfig(), mode="fused")
    frames = data.observations()
    src = as_hypothesis_source(data) if data.has_hypotheses() else ListHypothesisSource(data.ground_truth())
    timings: dict = {}
    for _ in range(max(1, repeats)):
        track_fused(frames, src, data.initial_pose(), config, timings=timings)
    kin = statistics.median(timings["kinematics"])
    win = statistics.median(timings["window"])
    return SpeedReport(
        frames=len(frames),
        contacts=max(len(o) for _, o in frames),
        window_n=config.window_n,
        kinematics_ms=1000.0 * kin,
        window_ms=1000.0 * win,
        kinematics_fps=1.0 / kin if kin > 0 else math.inf,
        window_fps=1.0 / win if win > 0 else math.inf,
    )
