"""The concentration function Sigma(y) = I_y(Q_y) and its gradient.

Sigma depends on y only through the pair (V(y), s(y)), so ground states are
memoized on that pair.  Outside Omega = {V s < 1} Sigma is +inf.

Because Q_y is a critical point of I_y, the envelope identity gives

    grad Sigma(y) = 1/2 [ grad V(y) |Q_y|^2
                          + grad s(y) s(y)^-3 int k(s(y) Q_y^2) ],
    k(t) = t - 2 ln(1 + t) + t/(1 + t) > 0  for t > 0,

and a concentration point must make the bracket vanish.
"""

from __future__ import annotations

import csv
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .autonomous import (SCHEMA_VERSION, GroundState, SolverOptions,
                         solve_ground_state)
from .errors import (DomainError, LeftOmega, NoDescent, NotInOmega,
                     SaturableError)


def k_integrand(t):
    """t - 2 ln(1+t) + t/(1+t); equals t^3/3 - t^4/2 + ... near 0."""
    t = np.asarray(t, dtype=float)
    direct = t - 2.0 * np.log1p(t) + t / (1.0 + t)
    series = t ** 3 * (1.0 / 3.0 - 0.5 * t + 0.6 * t * t)
    return np.where(t < 1e-3, series, direct)


def _key(v):
    return float(f"{float(v):.12g}")


@dataclass
class SigmaSample:
    y: np.ndarray
    sigma: float
    in_omega: bool
    grad_formula: np.ndarray | None = None
    grad_fd: np.ndarray | None = None
    error: str | None = None


@dataclass
class NecessaryConditionReport:
    z: np.ndarray
    gradV: np.ndarray
    grads: np.ndarray
    l2sq: float
    integral_factor: float
    identity_residual: np.ndarray
    colinearity_defect: float
    opposite_orientation: bool
    scale: float

    @property
    def residual_norm(self):
        return float(np.linalg.norm(self.identity_residual))

    @property
    def relative_residual(self):
        return self.residual_norm / self.scale

    def to_dict(self):
        return {
            "z": self.z.tolist(),
            "gradV": self.gradV.tolist(),
            "grads": self.grads.tolist(),
            "l2sq": self.l2sq,
            "integral_factor": self.integral_factor,
            "identity_residual": self.identity_residual.tolist(),
            "residual_norm": self.residual_norm,
            "scale": self.scale,
            "relative_residual": self.relative_residual,
            "colinearity_defect": self.colinearity_defect,
            "opposite_orientation": self.opposite_orientation,
        }


@dataclass
class DescentResult:
    point: np.ndarray
    sigma: float
    grad: np.ndarray
    iterations: int
    converged: bool
    on_boundary: bool
    history: list = field(default_factory=list)


class SigmaLandscape:
    """Sigma for a pair of coefficient fields, with a shared ground-state cache.

    The cache is safe for concurrent use: lookups are plain dict reads and
    inserts happen under a lock.  Two threads may occasionally solve the same
    key; the results are identical so either may win.
    """

    def __init__(self, V, s, opts: SolverOptions | None = None):
        self.V = V
        self.s = s
        self.opts = opts or SolverOptions()
        self._cache: dict = {}
        self._lock = threading.Lock()

    # -- ground states -----------------------------------------------------

    def coefficients(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return float(self.V.eval(y)), float(self.s.eval(y))

    def in_omega(self, y):
        vy, sy = self.coefficients(y)
        return vy * sy < 1.0

    def ground_state(self, y) -> GroundState:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        vy, sy = self.coefficients(y)
        key = (_key(vy), _key(sy), y.size)
        gs = self._cache.get(key)
        if gs is None:
            if key[0] * key[1] >= 1.0:
                raise NotInOmega(y, vy, sy)
            gs = solve_ground_state(key[0], key[1], dim=y.size, opts=self.opts)
            with self._lock:
                gs = self._cache.setdefault(key, gs)
        return gs

    def cache_size(self):
        return len(self._cache)

    # -- Sigma and its gradient --------------------------------------------

    def sigma_at(self, y):
        if not self.in_omega(y):
            return np.inf
        return self.ground_state(y).energy

    def _factors(self, y):
        gs = self.ground_state(y)
        prof = gs.profile
        factor = prof.integrate(k_integrand(gs.sy * prof.u ** 2)) / gs.sy ** 3
        return gs, gs.l2sq, factor

    def grad_sigma_formula(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if not self.in_omega(y):
            vy, sy = self.coefficients(y)
            raise NotInOmega(y, vy, sy)
        _, l2sq, factor = self._factors(y)
        return 0.5 * (self.V.grad(y) * l2sq + self.s.grad(y) * factor)

    def grad_sigma_fd(self, y, h=1e-3):
        """Fourth-order central differences of :meth:`sigma_at`."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        g = np.empty_like(y)
        for j in range(y.size):
            e = np.zeros_like(y)
            e[j] = h
            g[j] = (-self.sigma_at(y + 2 * e) + 8 * self.sigma_at(y + e)
                    - 8 * self.sigma_at(y - e) + self.sigma_at(y - 2 * e)
                    ) / (12 * h)
        return g

    def sample(self, y, with_fd=False, h=1e-3):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if not self.in_omega(y):
            return SigmaSample(y, np.inf, False)
        try:
            smp = SigmaSample(y, self.sigma_at(y), True,
                              grad_formula=self.grad_sigma_formula(y))
            if with_fd:
                smp.grad_fd = self.grad_sigma_fd(y, h)
        except SaturableError as exc:
            return SigmaSample(y, np.nan, True, error=f"{type(exc).__name__}: "
                                                   f"{exc}")
        return smp

    def sample_many(self, points, with_fd=False, threads=1):
        points = [np.atleast_1d(np.asarray(p, dtype=float)) for p in points]
        if threads <= 1:
            return [self.sample(p, with_fd) for p in points]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda p: self.sample(p, with_fd), points))

    # -- minimization --------------------------------------------------------

    def find_sigma_minimum(self, seed, ball, tol=None, max_iter=500):
        """Projected gradient descent with Armijo backtracking in B(z, r).

        Stops when the projected gradient is below ``1e-5 (1 + |Sigma|)``
        (or ``tol``).  Iterates that reach the sphere |y - z| = r are kept
        there and flagged instead of following Sigma towards dOmega.
        """
        z = np.atleast_1d(np.asarray(ball[0], dtype=float))
        r = float(ball[1])
        y = np.atleast_1d(np.asarray(seed, dtype=float)).copy()

        def project(p):
            d = p - z
            n = np.linalg.norm(d)
            return p if n <= r else z + d * (r / n)

        def on_sphere(p):
            return bool(np.linalg.norm(p - z) >= r * (1 - 1e-12))

        if np.linalg.norm(y - z) > r:
            raise DomainError("seed lies outside the search ball")
        if not self.in_omega(y):
            vy, sy = self.coefficients(y)
            raise LeftOmega(f"seed is not in Omega (V s = {vy * sy:.6g})")
        sig = self.sigma_at(y)
        g = self.grad_sigma_formula(y)
        history = [(y.copy(), sig)]
        step = 1.0 / max(np.linalg.norm(g), 1e-300)
        for it in range(max_iter):
            stop = (tol if tol is not None else 1e-5 * (1.0 + abs(sig)))
            pg = y - project(y - g)
            if np.linalg.norm(pg) < stop:
                return DescentResult(y, sig, g, it, True, on_sphere(y),
                                     history)
            t = step
            outside = 0
            for _ in range(60):
                trial = project(y - t * g)
                if not self.in_omega(trial):
                    outside += 1
                    t *= 0.5
                    continue
                st = self.sigma_at(trial)
                if st <= sig - 1e-4 * np.dot(g, y - trial):
                    break
                t *= 0.5
            else:
                if outside == 60:
                    raise LeftOmega("every trial step left Omega")
                raise NoDescent(f"backtracking stalled at {y.tolist()}")
            g_new = self.grad_sigma_formula(trial)
            dy, dg = trial - y, g_new - g
            curv = np.dot(dy, dg)
            # Barzilai-Borwein guess for the next trial step
            step = np.dot(dy, dy) / curv if curv > 0 else 2.0 * t
            y, sig, g = trial, st, g_new
            history.append((y.copy(), sig))
        return DescentResult(y, sig, g, max_iter, False, on_sphere(y), history)

    # -- necessary condition -------------------------------------------------

    def necessary_condition_report(self, z) -> NecessaryConditionReport:
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if not self.in_omega(z):
            vy, sy = self.coefficients(z)
            raise NotInOmega(z, vy, sy)
        _, l2sq, factor = self._factors(z)
        gv = np.asarray(self.V.grad(z), dtype=float)
        gs = np.asarray(self.s.grad(z), dtype=float)
        dot = float(np.dot(gv, gs))
        return NecessaryConditionReport(
            z=z, gradV=gv, grads=gs, l2sq=l2sq, integral_factor=factor,
            identity_residual=gv * l2sq + gs * factor,
            colinearity_defect=float(np.linalg.norm(gv) * np.linalg.norm(gs)
                                     - abs(dot)),
            opposite_orientation=dot <= 0.0,
            scale=l2sq + factor)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def grid_points(lower, upper, counts):
    """Tensor grid of sample points, first coordinate varying slowest."""
    axes = [np.linspace(a, b, int(n)) for a, b, n in zip(lower, upper, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def write_sigma_map(samples, path):
    dim = samples[0].y.size
    header = ([f"y{k}" for k in range(dim)] + ["sigma"]
              + [f"grad{k}" for k in range(dim)] + ["in_omega"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for smp in samples:
            g = (smp.grad_formula if smp.grad_formula is not None
                 else np.full(dim, np.nan))
            w.writerow([repr(float(c)) for c in smp.y] + [repr(float(smp.sigma))]
                       + [repr(float(c)) for c in g] + [int(smp.in_omega)])


def load_sigma_map(path):
    """Returns a dict of columns as written by :func:`write_sigma_map`."""
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        rows = [[float(v) for v in row] for row in rd]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    cols = {k: data[:, j] for j, k in enumerate(header)}
    cols["in_omega"] = cols["in_omega"].astype(bool)
    return cols


def write_necessary_report(rep: NecessaryConditionReport, path):
    with open(path, "w") as fh:
        json.dump({"schema_version": SCHEMA_VERSION, **rep.to_dict()}, fh,
                  indent=2, sort_keys=True)
        fh.write("\n")


def load_necessary_report(path) -> NecessaryConditionReport:
    with open(path) as fh:
        d = json.load(fh)
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ValueError("unsupported report schema version")
    arr = {k: np.asarray(d[k], dtype=float)
           for k in ("z", "gradV", "grads", "identity_residual")}
    return NecessaryConditionReport(
        l2sq=d["l2sq"], integral_factor=d["integral_factor"],
        colinearity_defect=d["colinearity_defect"],
        opposite_orientation=d["opposite_orientation"], scale=d["scale"],
        **arr)
