"""INI-style run configurations with dotted section names.

A configuration declares the two coefficient fields and the penalization
ball, plus solver knobs and per-command options::

    [fields.V]
    kind = quadratic-well
    base = 1.0
    center = 0, 0
    coeffs = 0.01, 0.01

    [fields.s]
    kind = constant
    value = 0.5

    [ball]
    z = 0, 0
    r = 1.5

    [solver]
    dim = 2
    eps_list = 0.5, 0.25, 0.125

Vectors are comma separated; lists of points (bump centers) separate the
points with ``;``.  A ``product-composite`` field names its factor sections
in ``factors``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autonomous import SolverOptions
from .epssolver import EpsProblem
from .errors import ConfigError, DomainError
from .fields import (Constant, GaussianBumps, PenalizedNonlinearity, Product,
                     QuadraticWell, ScalarField)


def _floats(text, where):
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{where}: expected numbers, got {text!r}") from None


def _points(text, where):
    return tuple(_floats(chunk, where) for chunk in text.split(";")
                 if chunk.strip())


class _Section:
    """Typed accessors that name the offending key in every error."""

    def __init__(self, cp, name):
        if not cp.has_section(name):
            raise ConfigError(f"missing section [{name}]")
        self.name = name
        self.sec = cp[name]

    def where(self, key):
        return f"[{self.name}] {key}"

    def has(self, key):
        return key in self.sec

    def raw(self, key, default=None):
        if key not in self.sec:
            if default is None:
                raise ConfigError(f"{self.where(key)}: missing required key")
            return default
        return self.sec[key]

    def float(self, key, default=None):
        v = self.raw(key, None if default is None else str(default))
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"{self.where(key)}: not a number: {v!r}") from None

    def int(self, key, default=None):
        v = self.raw(key, None if default is None else str(default))
        try:
            return int(v)
        except ValueError:
            raise ConfigError(f"{self.where(key)}: not an integer: {v!r}") from None

    def vector(self, key, default=None):
        if default is not None and key not in self.sec:
            return tuple(default)
        return _floats(self.raw(key), self.where(key))

    def bool(self, key, default=False):
        try:
            return self.sec.getboolean(key, fallback=default)
        except ValueError:
            raise ConfigError(f"{self.where(key)}: not a boolean") from None


def _field(cp, name, seen=()):
    if name in seen:
        raise ConfigError(f"[{name}]: cyclic product-composite definition")
    sec = _Section(cp, name)
    kind = sec.raw("kind")
    try:
        if kind == "constant":
            fld = Constant(sec.float("value"))
        elif kind == "quadratic-well":
            fld = QuadraticWell(sec.float("base"), sec.vector("center"),
                                sec.vector("coeffs"))
        elif kind == "gaussian-bump-sum":
            fld = GaussianBumps(sec.float("base"), sec.vector("amplitudes"),
                                _points(sec.raw("centers"),
                                        sec.where("centers")),
                                sec.vector("widths"))
        elif kind == "product-composite":
            names = [n.strip() for n in sec.raw("factors").split(",")
                     if n.strip()]
            fld = Product(tuple(_field(cp, n, seen + (name,)) for n in names))
        else:
            raise ConfigError(f"{sec.where('kind')}: unknown field kind "
                              f"{kind!r}")
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[{name}]: {exc}") from None
    if sec.has("floor"):
        fl = sec.float("floor")
        if not fl > 0:
            raise ConfigError(f"{sec.where('floor')}: floor must be positive")
        if fl > fld.floor * (1 + 1e-12):
            raise ConfigError(f"{sec.where('floor')}: declared floor {fl:g} "
                              f"exceeds the field's lower bound {fld.floor:g}")
    elif not fld.floor > 0:
        raise ConfigError(f"[{name}]: field is not bounded below by a "
                          "positive constant")
    return fld


@dataclass
class RunConfig:
    V: ScalarField
    s: ScalarField
    pen: PenalizedNonlinearity
    dim: int
    geometry: str
    domain: float
    h_ratio: float
    tol: float
    eps_list: tuple
    eps: float
    gs_opts: SolverOptions
    parser: configparser.ConfigParser = field(repr=False)

    def section(self, name):
        return _Section(self.parser, name)

    def has_section(self, name):
        return self.parser.has_section(name)

    def point(self, section, key, default=None):
        if not self.has_section(section):
            if default is None:
                raise ConfigError(f"missing section [{section}]")
            return np.asarray(default, dtype=float)
        sec = self.section(section)
        pt = np.asarray(sec.vector(key, default), dtype=float)
        if pt.size != self.dim:
            raise ConfigError(f"{sec.where(key)}: expected {self.dim} "
                              f"coordinates, got {pt.size}")
        return pt

    def problem(self, eps=None):
        eps = self.eps if eps is None else eps
        try:
            return EpsProblem(eps, self.V, self.s, self.pen, L=self.domain,
                              geometry=self.geometry, dim=self.dim,
                              h_ratio=self.h_ratio, tol=self.tol)
        except (ValueError, DomainError) as exc:
            raise ConfigError(f"[solver]: {exc}") from None


def parse_config(text, source="<config>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    V = _field(cp, "fields.V")
    s = _field(cp, "fields.s")
    mu = (_Section(cp, "fields.V").float("floor")
          if "floor" in cp["fields.V"] else V.floor)

    solver = _Section(cp, "solver") if cp.has_section("solver") else None
    get = (lambda fn, key, default: getattr(solver, fn)(key, default)
           if solver else default)
    dim = get("int", "dim", 2)
    if dim < 2:
        raise ConfigError("[solver] dim: dimension must be >= 2")

    ball = _Section(cp, "ball")
    z = ball.vector("z")
    if len(z) != dim:
        raise ConfigError(f"{ball.where('z')}: expected {dim} coordinates")
    r = ball.float("r")
    r_inner = ball.float("r_inner") if ball.has("r_inner") else 0.8 * r
    if not r > 0:
        raise ConfigError(f"{ball.where('r')}: radius must be positive")
    if not 0 < r_inner < r:
        raise ConfigError(f"{ball.where('r_inner')}: need 0 < r' < r "
                          f"(got r' = {r_inner:g}, r = {r:g})")
    nu = 0.25
    if cp.has_section("penalization"):
        nu = _Section(cp, "penalization").float("nu", 0.25)
    if not 0 < nu < 0.5:
        raise ConfigError(f"[penalization] nu: must lie in (0, 1/2), got {nu:g}")
    pen = PenalizedNonlinearity(s, tuple(z), r, r_inner, nu, mu, V)

    eps_list = (tuple(_floats(solver.raw("eps_list"), solver.where("eps_list")))
                if solver and solver.has("eps_list") else (0.5, 0.25, 0.125))
    if any(e <= 0 for e in eps_list):
        raise ConfigError("[solver] eps_list: entries must be positive")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigError("[solver] eps_list: must be strictly decreasing")
    geometry = get("raw", "geometry", "radial")
    if geometry not in ("radial", "box"):
        raise ConfigError(f"[solver] geometry: unknown value {geometry!r}")
    h_ratio = get("float", "h_ratio", 16.0)
    if h_ratio < 4:
        raise ConfigError("[solver] h_ratio: must be >= 4 so that h <= eps/4")
    domain = get("float", "domain", 6.0)
    tol = get("float", "tol", 1e-9)
    n_grid = get("int", "n_grid", SolverOptions.n_grid)
    if n_grid < 16:
        raise ConfigError("[solver] n_grid: too small")
    eps = eps_list[-1]
    if cp.has_section("solve_eps"):
        eps = _Section(cp, "solve_eps").float("eps", eps)
    if not eps > 0:
        raise ConfigError("[solve_eps] eps: must be positive")
    return RunConfig(V, s, pen, dim, geometry, domain, h_ratio, tol, eps_list,
                     eps, SolverOptions(n_grid=n_grid), cp)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

PRESETS = {
    # V and s share a strict minimum at the origin; radial fast path.
    "concentric-wells": """\
[fields.V]
kind = quadratic-well
base = 1.0
center = 0, 0
coeffs = 0.01, 0.01

[fields.s]
kind = quadratic-well
base = 0.5
center = 0, 0
coeffs = 0.01, 0.01

[ball]
z = 0, 0
r = 1.5

[penalization]
nu = 0.25

[solver]
dim = 2
geometry = radial
domain = 6.0
h_ratio = 16
tol = 1e-9
eps_list = 0.5, 0.25, 0.125, 0.0625

[groundstate]
y = 0, 0

[sigma_map]
lower = -1, -1
upper = 1, 1
points = 9, 9
search = true
seed = 0.6, -0.4

[check_necessary]
z = 0, 0
""",
    # constant potential, saturation coefficient with a dip at the origin
    "constant-V-varying-s": """\
[fields.V]
kind = constant
value = 1.0

[fields.s]
kind = gaussian-bump-sum
base = 0.6
amplitudes = -0.3
centers = 0, 0
widths = 0.8

[ball]
z = 0, 0
r = 1.5

[penalization]
nu = 0.25

[solver]
dim = 2
geometry = radial
domain = 6.0
h_ratio = 16
tol = 1e-9
eps_list = 0.5, 0.25, 0.125, 0.0625

[groundstate]
y = 0, 0

[sigma_map]
lower = -1, -1
upper = 1, 1
points = 9, 9
search = true
seed = 0.5, 0.3

[check_necessary]
z = 0, 0
""",
    # off the common center both gradients point the same way
    "same-direction-gradients": """\
[fields.V]
kind = quadratic-well
base = 1.0
center = 0, 0
coeffs = 0.2, 0.2

[fields.s]
kind = quadratic-well
base = 0.3
center = 0, 0
coeffs = 0.2, 0.2

[ball]
z = 0, 0
r = 1.0

[solver]
dim = 2
geometry = box
domain = 4.0
h_ratio = 8
eps_list = 0.5, 0.25

[groundstate]
y = 0.5, 0

[sigma_map]
lower = -1, -1
upper = 1, 1
points = 9, 9
search = true
seed = 0.5, 0.5

[check_necessary]
z = 0.5, 0
""",
    # a non-symmetric pair used for landscape and gradient checks
    "generic": """\
[fields.V]
kind = quadratic-well
base = 0.6
center = 0.1, -0.2
coeffs = 0.3, 0.5

[fields.s]
kind = gaussian-bump-sum
base = 0.5
amplitudes = 0.4
centers = 0.3, 0.2
widths = 0.6

[ball]
z = 0, 0
r = 1.0

[solver]
dim = 2
geometry = box
domain = 4.0
h_ratio = 8
eps_list = 0.5, 0.25

[groundstate]
y = 0.2, 0.1

[sigma_map]
lower = -0.7, -0.7
upper = 0.7, 0.7
points = 8, 8
search = true
seed = 0.5, 0.5

[check_necessary]
z = 0, 0
""",
}


def preset(name) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from "
                          f"{', '.join(sorted(PRESETS))}")
    return parse_config(PRESETS[name], f"<preset {name}>")
