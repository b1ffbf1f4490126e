import json

import numpy as np
import pytest

from polyball.cli import main
from polyball.serialize import dumps

CONFIG = {
    "schema": "v1",
    "dimension": 3,
    "lattice": {"seed": 1, "perturbation": 0.3},
    "window": {"base_radius": 0.87, "window_radius": 0.31,
               "ladder_sigma": 0.008},
    "epsilon": 0.25,
    "n_blocks": 1,
    "max_rotations": 2,
    "max_polytopes": 3,
    "seed": 3,
    "samples": 2000,
}


@pytest.fixture(scope="module")
def build_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "config.json"
    cfg.write_text(dumps(CONFIG))
    out = root / "run"
    assert main(["build", "--config", str(cfg), "--out", str(out)]) == 0
    return out


def test_build_artifacts(build_dir):
    names = sorted(p.name for p in build_dir.iterdir())
    assert "manifest.json" in names
    assert "exhaustion.json" in names
    assert "config.json" in names
    assert sum(n.startswith("polytope_") for n in names) == 3


def test_build_deterministic(build_dir, tmp_path):
    cfg = tmp_path / "config.json"
    cfg.write_text(dumps(CONFIG))
    out = tmp_path / "run"
    assert main(["build", "--config", str(cfg), "--out", str(out)]) == 0
    for f in sorted(build_dir.iterdir()):
        assert f.read_text() == (out / f.name).read_text(), f.name


@pytest.mark.parametrize("suite", ["delaunay", "lift", "shell", "blocks"])
def test_verify_suites_pass(build_dir, suite, capsys):
    code = main(["verify", "--out", str(build_dir), "--suite", suite])
    report = json.loads(capsys.readouterr().out)
    assert code == 0, report
    assert report["passed"]
    assert report["suite"] == suite
    assert (build_dir / ("report_%s.json" % suite)).is_file()


def test_verify_unknown_suite(build_dir, capsys):
    code = main(["verify", "--out", str(build_dir), "--suite", "bogus"])
    err = json.loads(capsys.readouterr().out)
    assert code == 3
    assert err["error"] == "ConfigError"


def test_verify_runge_without_series(build_dir, capsys):
    code = main(["verify", "--out", str(build_dir), "--suite", "runge"])
    err = json.loads(capsys.readouterr().out)
    assert code == 3
    assert err["error"] == "ConfigError"


def test_trace_radial(build_dir, capsys):
    code = main(["trace", "--out", str(build_dir), "radial:0,0,1"])
    out = capsys.readouterr().out
    assert code == 0
    assert "crossings: 3" in out
    csv = (build_dir / "crossings.csv").read_text().splitlines()
    assert csv[0] == "n,x1,x2,x3,skeleton_distance,in_neighbourhood"
    assert len(csv) == 4
    ns = [int(line.split(",")[0]) for line in csv[1:]]
    assert ns == [1, 2, 3]


def test_trace_bad_direction(build_dir, capsys):
    assert main(["trace", "--out", str(build_dir), "radial:0,0"]) == 3
    assert json.loads(capsys.readouterr().out)["error"] == "ConfigError"


def test_config_errors(tmp_path, capsys):
    bad = dict(CONFIG)
    bad["dimension"] = 4
    bad["complex"] = False
    bad["dimension"] = 2
    cfg = tmp_path / "bad.json"
    cfg.write_text(dumps(bad))
    code = main(["build", "--config", str(cfg), "--out",
                 str(tmp_path / "x")])
    assert code == 3
    assert json.loads(capsys.readouterr().out)["error"] == "ConfigError"

    odd = dict(CONFIG)
    odd["complex"] = True   # dimension 3 is odd
    cfg.write_text(dumps(odd))
    code = main(["build", "--config", str(cfg), "--out",
                 str(tmp_path / "y")])
    assert code == 3
    capsys.readouterr()


def test_corrupted_artifact_refused(build_dir, tmp_path, capsys):
    import shutil

    run = tmp_path / "run"
    shutil.copytree(build_dir, run)
    victim = run / "exhaustion.json"
    victim.write_text(victim.read_text().replace("theta1", "theta2", 1))
    code = main(["verify", "--out", str(run), "--suite", "blocks"])
    err = json.loads(capsys.readouterr().out)
    assert code == 2
    assert err["error"] == "ManifestMismatch"


def test_seed_override_changes_build(build_dir, tmp_path):
    cfg = tmp_path / "config.json"
    cfg.write_text(dumps(CONFIG))
    out = tmp_path / "run5"
    assert main(["build", "--config", str(cfg), "--out", str(out),
                 "--seed-override", "5"]) == 0
    a = json.loads((build_dir / "exhaustion.json").read_text())
    b = json.loads((out / "exhaustion.json").read_text())
    assert a["constants"]["seed"] == 3 and b["constants"]["seed"] == 5
