"""Concentration observables extracted from penalized-problem solutions."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import maximum_filter

from .autonomous import SCHEMA_VERSION
from .epssolver import GridSolution, penalization_active
from .errors import FitRangeEmpty, TrivialSolution


@dataclass
class Maximum:
    point: np.ndarray
    value: float
    index: tuple


def _quad_offset(um, u0, up):
    """Vertex offset (in grid units) and value of the parabola through 3 nodes."""
    den = um - 2.0 * u0 + up
    if den >= 0:
        return 0.0, u0
    off = 0.5 * (um - up) / den
    return off, u0 - 0.125 * (um - up) ** 2 / den


def locate_maxima(sol: GridSolution, floor=0.1, threshold=1e-8):
    """Strict discrete local maxima above ``floor`` times the global maximum.

    Each maximum is refined by a quadratic through its neighbours along
    every axis.  For the radial geometry a maximum at r = 0 stays at the
    center, and maxima at r > 0 are spheres reported by one point on the
    first axis.  Sorted by decreasing value.
    """
    grid = sol.grid
    U = sol.values
    gmax = float(np.max(U))
    if not gmax > threshold:
        raise TrivialSolution(f"max u = {gmax:.3g} is below {threshold:g}")
    h = grid.h
    out = []
    if grid.geometry == "radial":
        ext = np.concatenate([U[1:2], U])  # mirror node r = -h
        for i in range(U.size - 1):
            um, u0, up = ext[i], ext[i + 1], ext[i + 2]
            if u0 > um and u0 > up and u0 >= floor * gmax:
                if i == 0:
                    # symmetric neighbours: the parabola peaks on the node
                    r, val = 0.0, u0
                else:
                    off, val = _quad_offset(um, u0, up)
                    r = (i + off) * h
                pt = sol.problem.z.copy()
                pt[0] += r
                out.append(Maximum(pt, float(val), (i,)))
    else:
        foot = np.ones((3,) * grid.dim, dtype=bool)
        foot[(1,) * grid.dim] = False
        neigh = maximum_filter(U, footprint=foot, mode="constant", cval=0.0)
        mask = (U > neigh) & (U >= floor * gmax)
        for idx in zip(*np.nonzero(mask)):
            pt = np.array([grid.axes[k][idx[k]] for k in range(grid.dim)])
            val = U[idx]
            for k in range(grid.dim):
                if 0 < idx[k] < U.shape[k] - 1:
                    lo = list(idx)
                    hi = list(idx)
                    lo[k] -= 1
                    hi[k] += 1
                    off, v = _quad_offset(U[tuple(lo)], U[idx], U[tuple(hi)])
                    pt[k] += off * h
                    val += v - U[idx]
            out.append(Maximum(pt, float(val), tuple(int(i) for i in idx)))
    out.sort(key=lambda m: -m.value)
    return out


@dataclass
class DecayFit:
    mu1: float
    mu2: float
    r2: float
    n_samples: int

    def __iter__(self):
        return iter((self.mu1, self.mu2))

    @property
    def accepted(self):
        return self.mu2 > 0 and self.r2 >= 0.99


def decay_fit(sol: GridSolution, x_eps, eps=None, inner=2.0, outer=6.0):
    """Least-squares fit of ln u against |x - x_eps|/eps on the annulus.

    Returns :class:`DecayFit`, which unpacks to ``(mu1, mu2)`` with
    ``u ~ mu1 exp(-mu2 |x - x_eps| / eps)``.
    """
    eps = sol.eps if eps is None else eps
    grid = sol.grid
    p = sol.problem
    x_eps = np.asarray(x_eps, dtype=float)
    if grid.geometry == "radial":
        rc = float(np.linalg.norm(x_eps - p.z))
        if rc + outer * eps > p.L:
            raise FitRangeEmpty("fit annulus leaves the radial domain")
        d = np.abs(grid.dist - rc)
    else:
        lo = np.array([a[0] for a in grid.axes])
        hi = np.array([a[-1] for a in grid.axes])
        if np.any(x_eps - outer * eps < lo) or np.any(x_eps + outer * eps > hi):
            raise FitRangeEmpty("fit annulus leaves the box")
        d = np.linalg.norm(grid.points - x_eps, axis=-1)
    sel = (d >= inner * eps) & (d <= outer * eps) & (sol.u > 1e-280)
    if np.count_nonzero(sel) < 3:
        raise FitRangeEmpty("fewer than 3 positive samples in the annulus")
    rho = d[sel] / eps
    y = np.log(sol.u[sel])
    slope, icpt = np.polyfit(rho, y, 1)
    fit = slope * rho + icpt
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - fit) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return DecayFit(float(np.exp(icpt)), float(-slope), r2, int(rho.size))


@dataclass
class ConcentrationReport:
    epsilon: float
    h: float
    x_eps: list
    dist: float
    n_local_maxima: int
    max_value: float
    V_at_max: float
    s_at_max: float
    mu1: float
    mu2: float
    fit_r2: float
    fit_accepted: bool
    rescaled_energy: float
    sigma_at_limit: float
    penalization_active: bool
    max_bound_margin: float

    def to_dict(self):
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return d


@dataclass
class ConcentrationTrends:
    dist_nonincreasing: bool
    V_gap_nonincreasing: bool
    s_gap_nonincreasing: bool
    energy_gap_nonincreasing: bool
    single_maximum: bool
    energy_rel_gap_last: float
    mu2_spread: float

    def to_dict(self):
        return asdict(self)


def _report(sol: GridSolution, z, sigma_z):
    p = sol.problem
    maxima = locate_maxima(sol)
    top = maxima[0]
    vx = float(p.V.eval(top.point))
    sx = float(p.s.eval(top.point))
    try:
        fit = decay_fit(sol, top.point, sol.eps)
    except FitRangeEmpty:
        fit = DecayFit(np.nan, np.nan, np.nan, 0)
    return ConcentrationReport(
        epsilon=sol.eps, h=p.h, x_eps=[float(c) for c in top.point],
        dist=float(np.linalg.norm(top.point - z)),
        n_local_maxima=len(maxima), max_value=top.value,
        V_at_max=vx, s_at_max=sx, mu1=fit.mu1, mu2=fit.mu2,
        fit_r2=fit.r2, fit_accepted=bool(fit.n_samples and fit.accepted),
        rescaled_energy=sol.rescaled_energy, sigma_at_limit=float(sigma_z),
        penalization_active=penalization_active(sol),
        max_bound_margin=top.value ** 2 - vx)


def _nonincreasing(vals, atol):
    return bool(all(b <= a + atol for a, b in zip(vals, vals[1:])))


def concentration_report(sweep, z, sigma_z, atol=1e-9):
    """Per-eps rows and trend flags for a solved sweep.

    ``sigma_z`` is Sigma at the expected concentration point (a number, or
    an object with a ``sigma_at`` method).
    """
    sols = list(sweep)
    if not sols:
        raise ValueError("empty sweep")
    z = np.asarray(z, dtype=float)
    if hasattr(sigma_z, "sigma_at"):
        sigma_z = sigma_z.sigma_at(z)
    p = sols[0].problem
    v0, s0 = float(p.V.eval(z)), float(p.s.eval(z))
    rows = [_report(sol, z, sigma_z) for sol in sols]
    egap = [abs(r.rescaled_energy - sigma_z) for r in rows]
    mu2 = np.array([r.mu2 for r in rows])
    spread = (float(np.max(mu2) / np.min(mu2) - 1.0)
              if np.all(np.isfinite(mu2)) and np.all(mu2 > 0) else np.inf)
    trends = ConcentrationTrends(
        dist_nonincreasing=_nonincreasing([r.dist for r in rows], atol),
        V_gap_nonincreasing=_nonincreasing(
            [abs(r.V_at_max - v0) for r in rows], atol),
        s_gap_nonincreasing=_nonincreasing(
            [abs(r.s_at_max - s0) for r in rows], atol),
        energy_gap_nonincreasing=_nonincreasing(egap, atol),
        single_maximum=all(r.n_local_maxima == 1 for r in rows),
        energy_rel_gap_last=egap[-1] / abs(sigma_z),
        mu2_spread=spread)
    return rows, trends


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

SUMMARY_COLUMNS = ["eps", "dist", "V_at_max", "s_at_max", "mu2",
                   "rescaled_energy"]


def write_reports_jsonl(rows, path):
    with open(path, "w") as fh:
        for r in rows:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def load_reports_jsonl(path):
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                if d.pop("schema_version", None) != SCHEMA_VERSION:
                    raise ValueError("unsupported report schema version")
                out.append(ConcentrationReport(**d))
    return out


def write_summary_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            w.writerow([repr(float(v)) for v in
                        (r.epsilon, r.dist, r.V_at_max, r.s_at_max, r.mu2,
                         r.rescaled_energy)])


def load_summary_csv(path):
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header != SUMMARY_COLUMNS:
            raise ValueError(f"unexpected summary columns {header}")
        data = [[float(v) for v in row] for row in rd]
    return {k: np.array([row[j] for row in data])
            for j, k in enumerate(SUMMARY_COLUMNS)}
