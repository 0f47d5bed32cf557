import json
import subprocess
import sys
from pathlib import Path

import pytest

from stabledom import cli
from stabledom.config import CHECKS, ExperimentConfig, Tolerances, load_config
from stabledom.errors import ConfigError

ROOT = Path(__file__).resolve().parents[1]

SMALL = {
    "kernel": {"name": "isotropic", "params": {"alpha": 1.0, "dim": 1}},
    "eps": [0.5, 0.25],
    "lattice": {"R": 8.0, "n": 257},
    "times": [0.5],
    "functions": [{"name": "bump", "center": 0.0, "radius": 1.0}],
    "montecarlo": {"N": 5000, "seed": 1, "t": 1.0, "eps": [0.1, 0.05]},
    "orders": 8,
    "subharmonic_pairs": 6,
}


def _write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


# -------------------------------------------------------------------- config

@pytest.mark.parametrize("name", ["isotropic.json", "stable_like.json", "understated_M.json"])
def test_shipped_configs_load(name):
    cfg = load_config(ROOT / "configs" / name)
    assert cfg.build_lattice().h < min(cfg.eps)


def test_roundtrip_and_hash_ignores_out(tmp_path):
    cfg = ExperimentConfig.from_dict(SMALL)
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    assert cfg.with_overrides(out=str(tmp_path)).hash() == cfg.hash()
    assert cfg.with_overrides(seed=2).hash() != cfg.hash()


@pytest.mark.parametrize("patch,msg", [
    ({"bogus": 1}, "unknown config keys"),
    ({"eps": [0.5, -1.0]}, "eps"),
    ({"eps": [0.01]}, "lattice spacing"),
    ({"checks": ["nope"]}, "unknown checks"),
    ({"tolerances": {"mass": 0.0}}, "tolerance mass"),
    ({"source": [0.01]}, "lattice node"),
    ({"kernel": {"name": "isotropic", "params": {"alpha": 2.5, "dim": 1}}}, "alpha"),
    ({"lattice": {"R": 8.0, "n": 257, "extra": 1}}, "bad config section"),
    ({"montecarlo": {"N": 0}}, "montecarlo"),
    ({"functions": [{"center": 0.0}]}, "name"),
])
def test_invalid_configs(patch, msg):
    with pytest.raises(ConfigError, match=msg):
        ExperimentConfig.from_dict({**SMALL, **patch})


def test_tolerance_scaling():
    t = Tolerances().scaled(10.0)
    assert t.mass == pytest.approx(0.1) and t.invariance == pytest.approx(1e-7)
    assert t.kappa_min == pytest.approx(0.002)
    with pytest.raises(ConfigError):
        Tolerances().scaled(0.0)


# ----------------------------------------------------------------------- cli

def test_bad_config_exit_code(tmp_path, capsys):
    p = _write(tmp_path, {**SMALL, "eps": [0.01]})
    assert cli.main(["verify", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "config error" in capsys.readouterr().err


def test_unreadable_config_exit_code(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert cli.main(["verify", "--config", str(p)]) == 2


def test_bad_workers_exit_code(tmp_path):
    assert cli.main(["verify", "--config", str(_write(tmp_path, SMALL)), "--workers", "0"]) == 2


def test_verify_default_config(tmp_path):
    assert cli.main(["verify", "--out", str(tmp_path)]) == 0
    summary = json.loads(next(tmp_path.glob("summary_verify_*.json")).read_text())
    assert summary["passed"] and summary["failures"] == []


def test_all_small_config_passes(tmp_path, capsys):
    out = tmp_path / "run"
    assert cli.main(["all", "--config", str(_write(tmp_path, SMALL)), "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "[PASS]" in printed and "FAILED" not in printed
    names = {p.name.split("_")[0] for p in out.iterdir()}
    assert {"iterated", "semigroup", "density", "summary"} <= names


def test_understated_M_fails_assumption(tmp_path, capsys):
    code = cli.main(["all", "--config", str(ROOT / "configs" / "understated_M.json"),
                     "--out", str(tmp_path)])
    assert code == 1
    assert "stable envelope" in capsys.readouterr().out


def test_tightened_tolerances_fail(tmp_path):
    p = _write(tmp_path, {**SMALL, "checks": ["mass_identity"]})
    assert cli.main(["iterate", "--config", str(p), "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["iterate", "--config", str(p), "--out", str(tmp_path / "b"),
                     "--tolerance-scale", "1e-14"]) == 1


def test_reruns_byte_identical_across_workers(tmp_path):
    p = _write(tmp_path, SMALL)
    a, b = tmp_path / "w1", tmp_path / "w3"
    assert cli.main(["sample", "--config", str(p), "--out", str(a), "--workers", "1"]) == 0
    assert cli.main(["sample", "--config", str(p), "--out", str(b), "--workers", "3"]) == 0
    files = sorted(f.name for f in a.iterdir())
    assert files == sorted(f.name for f in b.iterdir()) and files
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "stabledom.cli", "verify", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "[PASS]" in proc.stdout


def test_all_checks_known():
    assert set(ExperimentConfig().checks) == set(CHECKS)
