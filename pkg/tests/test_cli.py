import json
import subprocess
import sys

import numpy as np
import pytest

from saturable_spikes.cli import main
from saturable_spikes.config import PRESETS
from saturable_spikes.diagnostics import load_summary_csv
from saturable_spikes.sigma import load_sigma_map

CONSTANT = """
[fields.V]
kind = constant
value = {v}

[fields.s]
kind = constant
value = {s}

[ball]
z = 0, 0
r = 1.0

[solver]
dim = 2
geometry = radial
domain = 4.0
eps_list = 0.25

[groundstate]
y = 0.3, -0.2

[sigma_map]
lower = -0.5, -0.5
upper = 0.5, 0.5
points = 3, 3
"""


def _write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_groundstate_outputs(tmp_path, capsys):
    cfg = _write(tmp_path, CONSTANT.format(v=0.5, s=0.5))
    assert main(["groundstate", "--config", cfg, "--out",
                 str(tmp_path / "o"), "--check"]) == 0
    meta = json.loads((tmp_path / "o" / "groundstate.json").read_text())
    assert meta["energy"] == pytest.approx(5.0473763, rel=1e-6)
    assert abs(meta["check"]["energy_delta"]) < 1e-6 * meta["energy"]
    assert (tmp_path / "o" / "groundstate.csv").read_text().startswith("r,")
    assert "energy" in capsys.readouterr().out


def test_groundstate_outside_omega(tmp_path, capsys):
    cfg = _write(tmp_path, CONSTANT.format(v=2.0, s=0.75))
    assert main(["groundstate", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "V s < 1" in capsys.readouterr().err


@pytest.mark.parametrize("text", [
    "[fields.V]\nkind = constant\n",  # missing sections
    CONSTANT.format(v=0.5, s=0.5).replace("value = 0.5", "value = abc", 1),
    CONSTANT.format(v=0.5, s=0.5).replace("constant", "wobbly", 1),
    "not an ini file",
])
def test_malformed_config(tmp_path, capsys, text):
    cfg = _write(tmp_path, text)
    assert main(["groundstate", "--config", cfg, "--out", str(tmp_path)]) == 1
    assert "config error" in capsys.readouterr().err


def test_missing_source_is_config_error(tmp_path):
    assert main(["groundstate", "--out", str(tmp_path)]) == 1
    assert main(["groundstate", "--config", str(tmp_path / "nope.ini")]) == 1


def test_sigma_map_constant_fields(tmp_path):
    cfg = _write(tmp_path, CONSTANT.format(v=0.5, s=0.5))
    assert main(["sigma-map", "--config", cfg, "--out", str(tmp_path),
                 "--threads", "3"]) == 0
    cols = load_sigma_map(tmp_path / "sigma_map.csv")
    assert cols["sigma"].size == 9 and np.all(cols["sigma"] == cols["sigma"][0])
    assert np.all(cols["grad0"] == 0) and np.all(cols["grad1"] == 0)


def test_sigma_map_all_outside(tmp_path, capsys):
    cfg = _write(tmp_path, CONSTANT.format(v=2.0, s=1.0))
    assert main(["sigma-map", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "outside" in capsys.readouterr().err


def test_sigma_map_symmetric_minimizer(tmp_path):
    text = PRESETS["concentric-wells"].replace("points = 9, 9", "points = 3, 3")
    cfg = _write(tmp_path, text)
    assert main(["sigma-map", "--config", cfg, "--out", str(tmp_path)]) == 0
    summ = json.loads((tmp_path / "sigma_minimum.json").read_text())
    assert summ["grid_minimum"]["y"] == [0.0, 0.0]
    search = summ["search"]
    assert search["converged"] and not search["on_boundary"]
    assert np.linalg.norm(search["point"]) < 1e-3


def test_sweep_concentric(tmp_path):
    assert main(["sweep", "--preset", "concentric-wells", "--out",
                 str(tmp_path)]) == 0
    cols = load_summary_csv(tmp_path / "sweep_summary.csv")
    assert np.all(np.diff(cols["dist"]) <= 1e-12)
    summ = json.loads((tmp_path / "sweep_summary.json").read_text())
    assert summ["failure"] is None and summ["trends"]["single_maximum"]
    assert len((tmp_path / "reports.jsonl").read_text().splitlines()) == 4


def test_solve_eps(tmp_path):
    assert main(["solve-eps", "--preset", "concentric-wells", "--out",
                 str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "solution.json").read_text())
    assert meta["checks"]["residual"] < 1e-9


def test_check_necessary_at_center(tmp_path):
    assert main(["check-necessary", "--preset", "concentric-wells", "--out",
                 str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "necessary.json").read_text())
    assert rep["residual_norm"] == 0.0


def test_show_preset_parses_back(tmp_path, capsys):
    assert main(["show-preset", "--preset", "generic"]) == 0
    text = capsys.readouterr().out
    assert text == PRESETS["generic"]
    assert main(["show-preset"]) == 1


def test_outputs_are_deterministic(tmp_path):
    names = ["reports.jsonl", "sweep_summary.csv", "sweep_summary.json"]
    for d in ("a", "b"):
        assert main(["sweep", "--preset", "concentric-wells", "--out",
                     str(tmp_path / d)]) == 0
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == \
            (tmp_path / "b" / n).read_bytes()


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "saturable_spikes", "groundstate", "--preset",
         "concentric-wells", "--out", str(tmp_path)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "groundstate.json").exists()
