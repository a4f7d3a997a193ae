import numpy as np
import pytest

from saturable_spikes.config import PRESETS, load_config, parse_config, preset
from saturable_spikes.errors import ConfigError

BASE = """
[fields.V]
kind = product-composite
factors = well, bump

[well]
kind = quadratic-well
base = 1.0
center = 0, 0
coeffs = 0.1, 0.2

[bump]
kind = gaussian-bump-sum
base = 0.8
amplitudes = 0.3, -0.2
centers = 0.2, -0.1; -0.5, 0.4
widths = 0.7, 0.5

[fields.s]
kind = constant
value = 0.5

[ball]
z = 0, 0
r = 1.0
"""


def test_presets_parse_and_round_trip():
    for name, text in PRESETS.items():
        cfg = preset(name)
        again = parse_config(text)
        x = np.array([[0.3, -0.2], [0.0, 0.0]])
        np.testing.assert_array_equal(cfg.V.eval(x), again.V.eval(x))
        assert cfg.eps_list == again.eps_list


def test_product_and_defaults(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text(BASE)
    cfg = load_config(path)
    x = np.array([[0.2, -0.1]])
    well = 1.0 + 0.1 * 0.04 + 0.2 * 0.01
    bump = 0.8 + 0.3 - 0.2 * np.exp(-0.74 / (2 * 0.25))
    assert cfg.V.eval(x)[0] == pytest.approx(well * bump, rel=1e-14)
    assert cfg.pen.r_inner == pytest.approx(0.8) and cfg.pen.nu == 0.25
    assert cfg.geometry == "radial" and cfg.dim == 2
    assert cfg.eps_list == (0.5, 0.25, 0.125) and cfg.eps == 0.125


@pytest.mark.parametrize("patch,match", [
    (("r = 1.0", "r = 1.0\nr_inner = 1.5"), "r'"),
    (("r = 1.0", "r = 1.0\n[penalization]\nnu = 0.6"), "nu"),
    (("r = 1.0", "r = 1.0\n[solver]\neps_list = 0.1, 0.2"), "decreasing"),
    (("r = 1.0", "r = 1.0\n[solver]\nh_ratio = 2"), "h_ratio"),
    (("r = 1.0", "r = 1.0\n[solver]\ngeometry = sphere"), "geometry"),
    (("value = 0.5", "value = 0.5\nfloor = 0.9"), "floor"),
    (("factors = well, bump", "factors = well, fields.V"), "cyclic"),
    (("z = 0, 0", "z = 0, 0, 0"), "coordinates"),
    (("widths = 0.7, 0.5", "widths = 0.7"), "length"),
])
def test_validation_errors(patch, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(BASE.replace(*patch))


def test_problem_errors_are_config_errors():
    cfg = parse_config(BASE + "\n[solver]\ngeometry = box\ndomain = 1.5\n")
    with pytest.raises(ConfigError, match="margin"):
        cfg.problem(0.25)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.ini")
