"""Ground states of the frozen problem by radial shooting.

For a frozen point y with coefficients ``Vy = V(y)`` and ``sy = s(y)`` the
ground state is the positive radial solution of

    u'' + (N-1)/r u' - Vy u + u^3/(1 + sy u^2) = 0,   u'(0) = 0,  u -> 0.

The initial amplitude is found by bisection between undershooting and
overshooting trajectories.  Once the trajectory has decayed to a small
fraction of its amplitude the equation is linear to working precision, and
the profile is continued with the decaying radial solution of
``-u'' - (N-1)/r u' + Vy u = 0`` (a modified Bessel function), which avoids
the exponential loss of accuracy that plain shooting suffers in the tail.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from math import gamma, pi

import numpy as np
from scipy.special import kve

from . import _shooting as _k
from .errors import (BracketNotFound, MaxIterations, NoProjection, NotInOmega,
                     SolverError, TruncationTooSmall)
from .fields import F_primitive, f_saturable

SCHEMA_VERSION = 1


def sphere_area(n):
    """Surface measure of the unit sphere S^{N-1}."""
    return 2.0 * pi ** (n / 2.0) / gamma(n / 2.0)


@dataclass(frozen=True)
class RadialProfile:
    """Radial function sampled on ``0 = r_0 < ... < r_M = R``.

    Integrals over R^N apply the composite trapezoid rule in r to the
    integrand times ``|S^{N-1}| r^{N-1}``.
    """

    dim: int
    r: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        u = np.asarray(self.u, dtype=float)
        if r.ndim != 1 or r.shape != u.shape or r.size < 3:
            raise ValueError("r and u must be 1-D arrays of equal length >= 3")
        if r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise ValueError("grid must start at 0 and increase strictly")
        if self.dim < 2:
            raise ValueError("dimension must be >= 2")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "u", u)

    @property
    def radius(self):
        return float(self.r[-1])

    @cached_property
    def weights(self):
        h = np.diff(self.r)
        w = np.zeros_like(self.r)
        w[:-1] += 0.5 * h
        w[1:] += 0.5 * h
        return sphere_area(self.dim) * self.r ** (self.dim - 1) * w

    def integrate(self, values):
        return float(np.dot(self.weights, values))

    @cached_property
    def du(self):
        """u' by centered differences; u'(0) = 0 by symmetry."""
        d = np.gradient(self.u, self.r, edge_order=2)
        d[0] = 0.0
        return d

    def l2sq(self):
        return self.integrate(self.u ** 2)

    def gradsq(self):
        return self.integrate(self.du ** 2)

    def with_values(self, u):
        return RadialProfile(self.dim, self.r, np.asarray(u, dtype=float))

    def __call__(self, rho):
        """Linear interpolation in r, zero beyond the grid."""
        return np.interp(rho, self.r, self.u, right=0.0)


@dataclass(frozen=True)
class SolverOptions:
    """Knobs of :func:`solve_ground_state`.

    ``radius`` overrides the automatic truncation radius
    ``r_match + tail_length / sqrt(Vy)``, where ``r_match`` is where the
    shooting trajectory has decayed to ``tail_switch * u(0)``.
    """

    n_grid: int = 16384
    radius: float | None = None
    tail_length: float = 15.0
    tail_switch: float = 1e-4
    tail_tol: float = 1e-8
    amp_rtol: float = 1e-12
    ode_rtol: float = 1e-12
    scan_lo: float = 1e-3
    scan_hi: float = 1e3
    n_scan: int = 61
    max_bisect: int = 200
    max_steps: int = 1_000_000

    def refined(self, factor=2):
        return replace(self, n_grid=self.n_grid * factor)


@dataclass(frozen=True)
class GroundState:
    profile: RadialProfile
    y: tuple | None
    Vy: float
    sy: float
    amplitude: float
    energy: float
    l2sq: float
    gradsq: float
    nehari: float
    pohozaev_residual: float
    r_match: float
    opts: SolverOptions = field(repr=False, default_factory=SolverOptions)

    @property
    def dim(self):
        return self.profile.dim

    def metadata(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "y": None if self.y is None else [float(c) for c in self.y],
            "dim": self.dim,
            "Vy": self.Vy,
            "sy": self.sy,
            "amplitude": self.amplitude,
            "energy": self.energy,
            "l2sq": self.l2sq,
            "gradsq": self.gradsq,
            "nehari": self.nehari,
            "pohozaev_residual": self.pohozaev_residual,
            "radius": self.profile.radius,
            "n_grid": self.profile.r.size - 1,
            "r_match": self.r_match,
        }


# ---------------------------------------------------------------------------
# functionals on radial profiles
# ---------------------------------------------------------------------------

def frozen_energy(u: RadialProfile, Vy, sy, nonlinear=True):
    """I_y(u) = 1/2 |grad u|^2 + Vy/2 |u|^2 - int F(sy, u)."""
    quad = 0.5 * u.gradsq() + 0.5 * Vy * u.l2sq()
    if not nonlinear:
        return quad
    return quad - u.integrate(F_primitive(sy, u.u))


def nehari_functional(u: RadialProfile, Vy, sy):
    """<I_y'(u), u> = |grad u|^2 + Vy |u|^2 - int u^4/(1 + sy u^2)."""
    return (u.gradsq() + Vy * u.l2sq()
            - u.integrate(u.u * f_saturable(sy, u.u)))


def nehari_gap(u: RadialProfile, Vy, sy):
    """|grad u|^2 + (Vy - 1/sy)|u|^2; negative iff u can be projected."""
    return u.gradsq() + (Vy - 1.0 / sy) * u.l2sq()


def _fibering(u: RadialProfile, Vy, sy):
    a = u.gradsq() + Vy * u.l2sq()
    w = u.weights
    u2 = u.u ** 2

    def g(tau):
        return a - tau * tau * np.dot(w, u2 * u2 / (1.0 + sy * tau * tau * u2))

    return g


def nehari_project(u: RadialProfile, Vy, sy, rtol=1e-14, max_iter=400):
    """Unique theta > 0 with theta u on the Nehari manifold N_y.

    On the fibering map ``g(tau) = <I_y'(tau u), tau u>/tau^2``, which
    decreases strictly from ``|grad u|^2 + Vy |u|^2 > 0`` to the Nehari gap,
    the root is bracketed by doubling and then bisected.
    """
    gap = nehari_gap(u, Vy, sy)
    if not np.any(u.u) or gap >= 0:
        raise NoProjection(f"Nehari gap {gap:.6g} >= 0: no projection exists")
    g = _fibering(u, Vy, sy)
    lo, hi = 0.0, 1.0
    n = 0
    while g(hi) > 0:
        lo, hi = hi, 2.0 * hi
        n += 1
        if n > 2000:
            raise MaxIterations("could not bracket the Nehari projection")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= rtol * hi or mid in (lo, hi):
            return mid
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    raise MaxIterations("Nehari projection bisection did not converge")


def pohozaev_residual(gs: GroundState):
    return pohozaev_value(gs.profile, gs.Vy, gs.sy)


def pohozaev_value(u: RadialProfile, Vy, sy):
    """|(N-2)/2 |grad u|^2 + N/2 Vy |u|^2 - N int F(sy, u)|."""
    n = u.dim
    val = (0.5 * (n - 2) * u.gradsq() + 0.5 * n * Vy * u.l2sq()
           - n * u.integrate(F_primitive(sy, u.u)))
    return abs(val)


# ---------------------------------------------------------------------------
# shooting
# ---------------------------------------------------------------------------

def _trajectory(a, n, vy, sy, opts, stop_level=0.0, record=False):
    r0 = 1e-2 / np.sqrt(max(vy, a * a / (1.0 + sy * a * a)))
    r_max = 80.0 / np.sqrt(vy) + 40.0 * np.sqrt(sy) * np.sqrt(
        1.0 + 1.0 / max(1.0 - vy * sy, 1e-12))
    scale_p = a * np.sqrt(vy)
    return r0, _k.shoot(a, float(n), vy, sy, r0, r_max, opts.ode_rtol,
                        1e-4 * opts.ode_rtol * a, 1e-4 * opts.ode_rtol * scale_p,
                        stop_level, record, opts.max_steps)


def _classify(a, n, vy, sy, opts):
    """True when the trajectory from amplitude ``a`` overshoots."""
    _, (code, count, rs, us, ps) = _trajectory(a, n, vy, sy, opts)
    if code == _k.OVERSHOOT:
        return True
    if code == _k.UNDERSHOOT:
        return False
    if code == _k.REACHED_END:
        # sign of the growing-mode component e^{+sqrt(V) r}
        return not (ps[0] + np.sqrt(vy) * us[0] > 0)
    raise SolverError(f"ODE integration failed at amplitude {a:.6g}")


def _bracket(n, vy, sy, opts):
    amps = np.geomspace(opts.scan_lo, opts.scan_hi, opts.n_scan) / np.sqrt(sy)
    # below sqrt(V/(1 - V s)) the trajectory rises at once
    a_min = np.sqrt(vy / (1.0 - vy * sy))
    amps = amps[amps > a_min]
    prev = None
    for a in amps:
        over = _classify(a, n, vy, sy, opts)
        if over and prev is not None and not prev[1]:
            return prev[0], a
        prev = (a, over)
    raise BracketNotFound(
        f"no undershoot/overshoot change for amplitudes in "
        f"[{amps[0] if amps.size else a_min:.3g}, {opts.scan_hi / np.sqrt(sy):.3g}] "
        f"(V*s = {vy * sy:.6g})")


def _bisect(lo, hi, n, vy, sy, opts):
    for _ in range(opts.max_bisect):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _classify(mid, n, vy, sy, opts):
            hi = mid
        else:
            lo = mid
    if hi - lo > opts.amp_rtol * hi:
        raise MaxIterations("amplitude bisection did not reach tolerance")
    return lo


def _hermite5(r, r1, r2, y1, y2):
    """Quintic Hermite interpolant from (u, u', u'') at both ends."""
    h = r2 - r1
    t = (r - r1) / h
    u1, d1, a1 = y1
    u2, d2, a2 = y2
    t2 = t * t
    t3 = t2 * t
    t4 = t3 * t
    t5 = t4 * t
    h00 = 1 - 10 * t3 + 15 * t4 - 6 * t5
    h10 = t - 6 * t3 + 8 * t4 - 3 * t5
    h20 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5)
    h01 = 10 * t3 - 15 * t4 + 6 * t5
    h11 = -4 * t3 + 7 * t4 - 3 * t5
    h21 = 0.5 * (t3 - 2 * t4 + t5)
    return (h00 * u1 + h10 * h * d1 + h20 * h * h * a1
            + h01 * u2 + h11 * h * d2 + h21 * h * h * a2)


def _radial_tail(r, r_m, u_m, n, vy):
    nu = 0.5 * n - 1.0
    k = np.sqrt(vy)
    return (u_m * (r_m / r) ** nu * kve(nu, k * r) / kve(nu, k * r_m)
            * np.exp(-k * (r - r_m)))


def _profile_from_amplitude(a, n, vy, sy, opts):
    stop = opts.tail_switch * a
    r0, (code, count, rs, us, ps) = _trajectory(a, n, vy, sy, opts,
                                                stop_level=stop, record=True)
    if code != _k.STOP_LEVEL:
        raise SolverError(
            "shooting trajectory left the ground-state branch before reaching "
            f"the tail switch level (code {code})")
    rs, us, ps = rs[:count], us[:count], ps[:count]
    acc = -(n - 1.0) * ps / rs + vy * us - f_saturable(sy, us)

    # locate r_match with u(r_match) = stop inside the last step
    y1 = (us[-2], ps[-2], acc[-2])
    y2 = (us[-1], ps[-1], acc[-1])
    lo, hi = rs[-2], rs[-1]
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if _hermite5(mid, rs[-2], rs[-1], y1, y2) > stop:
            lo = mid
        else:
            hi = mid
    r_match = 0.5 * (lo + hi)

    radius = opts.radius
    if radius is None:
        radius = r_match + opts.tail_length / np.sqrt(vy)
    grid = np.linspace(0.0, radius, opts.n_grid + 1)
    u = np.empty_like(grid)

    core = grid <= r0
    c = (vy * a - f_saturable(sy, a)) / (2.0 * n)
    dg = vy - a * a * (3.0 + sy * a * a) / (1.0 + sy * a * a) ** 2
    d = dg * c / (4.0 * (n + 2.0))
    u[core] = a + c * grid[core] ** 2 + d * grid[core] ** 4

    mid_mask = (grid > r0) & (grid <= r_match)
    rm = grid[mid_mask]
    j = np.clip(np.searchsorted(rs, rm) - 1, 0, rs.size - 2)
    u[mid_mask] = _hermite5(rm, rs[j], rs[j + 1],
                            (us[j], ps[j], acc[j]),
                            (us[j + 1], ps[j + 1], acc[j + 1]))

    tail = grid > r_match
    u[tail] = _radial_tail(grid[tail], r_match, stop, n, vy)
    return RadialProfile(n, grid, u), r_match


def solve_ground_state(Vy, sy, dim=2, opts: SolverOptions | None = None,
                       y=None) -> GroundState:
    """Positive radial least-energy solution of the frozen problem.

    Raises
    ------
    NotInOmega
        If ``Vy * sy >= 1``.
    BracketNotFound
        If the amplitude scan shows no change from undershoot to overshoot.
    TruncationTooSmall
        If ``|u(R)| > tail_tol * u(0)`` for the chosen radius.
    """
    opts = opts or SolverOptions()
    Vy = float(Vy)
    sy = float(sy)
    if not (Vy > 0 and sy > 0):
        raise ValueError("V(y) and s(y) must be positive")
    if dim < 2:
        raise ValueError("dimension must be >= 2")
    if Vy * sy >= 1.0:
        raise NotInOmega(y, Vy, sy)
    lo, hi = _bracket(dim, Vy, sy, opts)
    a = _bisect(lo, hi, dim, Vy, sy, opts)
    prof, r_match = _profile_from_amplitude(a, dim, Vy, sy, opts)
    if abs(prof.u[-1]) > opts.tail_tol * a:
        raise TruncationTooSmall(
            f"|u(R)| = {abs(prof.u[-1]):.3g} exceeds {opts.tail_tol:g} u(0) "
            f"at R = {prof.radius:.4g}")
    return GroundState(
        profile=prof, y=None if y is None else tuple(map(float, y)),
        Vy=Vy, sy=sy, amplitude=a,
        energy=frozen_energy(prof, Vy, sy),
        l2sq=prof.l2sq(), gradsq=prof.gradsq(),
        nehari=nehari_functional(prof, Vy, sy),
        pohozaev_residual=pohozaev_value(prof, Vy, sy),
        r_match=r_match, opts=opts)


def ground_state_at(V, s, y, dim=None, opts=None):
    """Convenience wrapper evaluating the coefficient fields at ``y``."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    dim = dim or y.size
    return solve_ground_state(float(V.eval(y)), float(s.eval(y)), dim=dim,
                              opts=opts, y=y)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def save_ground_state(gs: GroundState, csv_path, json_path):
    np.savetxt(csv_path, np.column_stack([gs.profile.r, gs.profile.u]),
               delimiter=",", header="r,u", comments="", fmt="%.17g")
    with open(json_path, "w") as fh:
        json.dump(gs.metadata(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_ground_state(csv_path, json_path):
    """Returns ``(profile, metadata)`` as written by :func:`save_ground_state`."""
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    with open(json_path) as fh:
        meta = json.load(fh)
    if meta.get("schema_version") != SCHEMA_VERSION:
        raise ValueError("unsupported ground-state schema version")
    return RadialProfile(meta["dim"], data[:, 0], data[:, 1]), meta
