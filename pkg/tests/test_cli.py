import json
import subprocess
import sys

from tactrack.cli import main


def test_simulate_track_eval(tmp_path, capsys):
    gen = {"count": 2, "seed": 1, "frame_count": 15, "hypothesis_noise": {"rotation_sigma": 0.05, "translation_sigma": 0.003}}
    (tmp_path / "gen.json").write_text(json.dumps(gen))
    assert main(["simulate", "--config", str(tmp_path / "gen.json"), "--out", str(tmp_path / "data")]) == 0
    files = sorted((tmp_path / "data").glob("*.json"))
    assert [f.name for f in files] == ["sim-000.json", "sim-001.json"]
    capsys.readouterr()

    est = tmp_path / "est.json"
    rc = main(["track", str(files[0]), "--mode", "fused", "--window-n", "3", "--lambda-t", "0.02",
               "--lambda-r", "0.2", "--out", str(est), "--report", str(tmp_path / "rep.json")])
    assert rc == 0
    printed = json.loads(capsys.readouterr().out)
    poses = json.loads(est.read_text())
    assert poses["mode"] == "fused" and len(poses["poses"]) == 15
    report = json.loads((tmp_path / "rep.json").read_text())
    assert report["config"]["window_n"] == 3 and report["aggregates"] == printed

    assert main(["eval", str(est), str(files[0])]) == 0
    again = json.loads(capsys.readouterr().out)
    for k, v in printed.items():
        assert abs(again[k] - v) < 1e-9


def test_experiment_and_speed(tmp_path, capsys):
    cfg = {"output_dir": "run", "data": {"generate": {"count": 1, "frame_count": 10}}, "modes": ["kinematics_only"]}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    assert main(["experiment", str(tmp_path / "cfg.json")]) == 0
    assert (tmp_path / "run" / "aggregate.csv").exists()
    assert "1 cells (0 failed)" in capsys.readouterr().out
    assert main(["speed", "--repeats", "1"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert set(rep) >= {"kinematics_fps", "window_fps", "kinematics_ms", "window_ms"}


def test_errors_exit_nonzero(tmp_path, capsys):
    (tmp_path / "bad.json").write_text('{"output_dir": "x", "modes": []}')
    assert main(["experiment", str(tmp_path / "bad.json")]) == 2
    assert "error:" in capsys.readouterr().err
    assert main(["track", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o.json")]) == 2
    (tmp_path / "a.json").write_text('{"poses": [{"t": 0, "q": [1, 0, 0, 0], "p": [0, 0, 0]}]}')
    (tmp_path / "b.json").write_text('{"poses": []}')
    assert main(["eval", str(tmp_path / "a.json"), str(tmp_path / "b.json")]) == 2


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "tactrack", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("simulate", "track", "eval", "experiment", "speed"):
        assert cmd in out.stdout
