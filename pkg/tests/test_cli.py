import json
import subprocess
import sys

import pytest

from fastdiff.cli import main
from fastdiff.io import sha256_file


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_verify_reference(tmp_path):
    assert main(["verify", "--p", "1.5", "--alpha", "1", "--R", "0.5", "--rho", "1", "--N", "2",
                 "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["relative_error"] < 0.1
    man = manifest(tmp_path)
    assert {f["path"] for f in man["files"]} == {"report.json", "report.csv"}
    for key in ("versions", "timings", "parameters", "seed"):
        assert key in man


def test_constant_below_threshold(tmp_path, capsys):
    assert main(["constant", "--p", "1.5", "--alpha", "0.4", "--out", str(tmp_path)]) == 2
    assert "threshold" in capsys.readouterr().err
    assert not (tmp_path / "manifest.json").exists()


def test_profile_exponent_out_of_range(tmp_path, capsys):
    assert main(["profile", "--p", "2", "--out", str(tmp_path)]) == 2
    assert "1 < p < 2" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path, capsys):
    # inside the near-threshold band the tail of c dominates
    with pytest.warns(UserWarning):
        assert main(["constant", "--p", "1.5", "--alpha", "0.54", "--out", str(tmp_path)]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_model_choice_required(tmp_path):
    assert main(["constant", "--alpha", "1", "--out", str(tmp_path)]) == 2
    assert main(["constant", "--p", "1.5", "--m", "0.5", "--out", str(tmp_path)]) == 2


def test_config_and_overrides(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "profile", "p": 1.3, "beta": 2.0}))
    out = tmp_path / "o"
    assert main(["profile", "--config", str(cfg), "--p", "1.5", "--out", str(out)]) == 0
    meta = json.loads((out / "profile.json").read_text())
    assert meta["exponent"] == 1.5 and meta["beta"] == 2.0
    assert (out / "profile.csv").read_text().startswith("xi,value\n")


@pytest.mark.parametrize("config", [{"foo": 1}, {"command": "blowup", "m": 0.5}, "not json"])
def test_bad_config(tmp_path, config):
    cfg = tmp_path / "c.json"
    cfg.write_text(config if isinstance(config, str) else json.dumps(config))
    assert main(["profile", "--m", "0.5", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_deterministic_outputs_and_checksums(tmp_path):
    args = ["geometry", "--shape", "annulus", "--rho_in", "1", "--rho_out", "3", "--N", "3", "--R", "0.5",
            "--mc_samples", "20000"]
    for name, seed in (("a", "7"), ("b", "7"), ("c", "8")):
        assert main(args + ["--seed", seed, "--out", str(tmp_path / name)]) == 0
    for f in ("geometry.csv", "geometry_mc.csv", "geometry.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert (tmp_path / "a" / "geometry_mc.csv").read_bytes() != (tmp_path / "c" / "geometry_mc.csv").read_bytes()
    man = manifest(tmp_path / "a")
    listed = {f["path"]: f["sha256"] for f in man["files"]}
    on_disk = {p.name for p in (tmp_path / "a").iterdir()} - {"manifest.json"}
    assert set(listed) == on_disk
    for path, digest in listed.items():
        assert sha256_file(tmp_path / "a" / path) == digest


def test_sweep_with_jobs(tmp_path):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({"m": 0.5, "sweep": [{"beta": 1.0}, {"beta": 2.0}, {"m": 0.3}]}))
    assert main(["profile", "--config", str(cfg), "--jobs", "2", "--out", str(tmp_path / "par")]) == 0
    assert main(["profile", "--config", str(cfg), "--jobs", "1", "--out", str(tmp_path / "seq")]) == 0
    for i in range(3):
        a = (tmp_path / "par" / f"job_{i:03d}" / "profile.csv").read_bytes()
        assert a == (tmp_path / "seq" / f"job_{i:03d}" / "profile.csv").read_bytes()
    assert len(manifest(tmp_path / "par")["files"]) == 6


def test_blowup_and_simulate(tmp_path):
    assert main(["blowup", "--p", "1.5", "--shape", "ball", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "b" / "blowup.csv").read_text().startswith("r,value\n")
    assert json.loads((tmp_path / "b" / "blowup.json").read_text())["residual"] < 1e-9
    assert main(["simulate", "--m", "0.5", "--shape", "exterior_ball", "--problem", "cauchy",
                 "--times", "1e-4", "1e-3", "--n_space", "1500", "--out", str(tmp_path / "s")]) == 0
    run = json.loads((tmp_path / "s" / "run.json").read_text())
    assert [o["file"] for o in run["outputs"]] == ["u_000.csv", "u_001.csv"]
    assert (tmp_path / "s" / "u_000.csv").read_text().startswith("r,u\n")


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "fastdiff", "constant", "--m", "0.5", "--alpha", "1",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads((tmp_path / "constant.json").read_text())["c"] > 0
