"""Finite-difference solver for the penalized problem

    -eps^2 Lap u + V(x) u = g(x, u)   on a truncated domain, u = 0 on its edge.

Two discretizations share one code path:

``radial``
    nodes ``r_i = i h`` on ``[0, L]`` about the ball center, written in
    finite-volume form: ``W`` holds the exact shell volumes of the control
    cells and ``K`` the flux couplings ``|S^{N-1}| r_{i+1/2}^{N-1} / h``.
``box``
    the Cartesian grid on ``[-L, L]^N`` (shifted by ``center``) with the
    standard ``2N + 1`` point stencil, ``W = h^N`` and ``K = h^{N-2}`` times the
    graph Laplacian.

In both cases ``-Lap_h = W^-1 K`` and the discrete energy is
``J(u) = eps^2/2 u.K.u + sum W (V u^2/2 - G(x, u))``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.linalg import solve_banded
from scipy.sparse.linalg import spsolve

from .autonomous import (SCHEMA_VERSION, SolverOptions, solve_ground_state,
                         sphere_area)
from .errors import ConvergedToZero, DomainError, NoConvergence, NotInOmega
from .fields import (G_from, PenalizedNonlinearity, dg_from, g_from,
                     smooth_cutoff)


# ---------------------------------------------------------------------------
# problem and grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpsProblem:
    """One instance of the penalized problem.

    ``h`` defaults to ``eps / h_ratio``.  For the radial geometry V, s and
    the ball must be radial about the ball center ``pen.z``.
    """

    eps: float
    V: object
    s: object
    pen: PenalizedNonlinearity
    L: float
    geometry: str = "radial"
    dim: int = 2
    h: float | None = None
    h_ratio: float = 16.0
    center: tuple | None = None
    tol: float = 1e-9
    max_newton: int = 60
    flow_steps: int = 400

    def __post_init__(self):
        if self.h is None:
            object.__setattr__(self, "h", self.eps / self.h_ratio)
        if self.center is None:
            object.__setattr__(self, "center", (0.0,) * self.dim)
        if not self.eps > 0:
            raise DomainError("eps must be positive")
        if self.geometry not in ("radial", "box"):
            raise DomainError(f"unknown geometry {self.geometry!r}")
        if self.h > self.eps / 4 * (1 + 1e-12):
            raise DomainError(f"grid spacing h = {self.h:g} exceeds eps/4")
        z = np.asarray(self.pen.z, dtype=float)
        if z.size != self.dim:
            raise DomainError("ball center has the wrong dimension")
        r = self.pen.r
        if self.geometry == "radial":
            if not (self.V.is_radial_about(z) and self.s.is_radial_about(z)):
                raise DomainError("radial geometry needs V and s radial about z")
            margin = self.L - r
        else:
            margin = float(np.min(self.L - np.abs(z - np.asarray(self.center))
                                  - r))
        if margin < 2 * r * (1 - 1e-12):
            raise DomainError(f"ball B(z, {r:g}) needs a margin >= 2r from the "
                              f"domain edge (have {margin:g})")

    def with_eps(self, eps):
        return replace(self, eps=eps, h=eps / self.h_ratio)

    def build_grid(self) -> "Grid":
        if self.geometry == "radial":
            return _radial_grid(self)
        return _box_grid(self)

    @property
    def z(self):
        return np.asarray(self.pen.z, dtype=float)

    def to_dict(self):
        return {"eps": self.eps, "L": self.L, "geometry": self.geometry,
                "dim": self.dim, "h": self.h, "h_ratio": self.h_ratio,
                "center": list(self.center), "tol": self.tol,
                "V": self.V.to_dict(), "s": self.s.to_dict(),
                "penalization": self.pen.to_dict()}


@dataclass
class Grid:
    """Unknown nodes of a discretization plus its operators.

    ``points`` are the physical coordinates of the unknowns, ``shape`` the
    array shape of the full grid including the Dirichlet boundary, and
    ``index`` maps unknowns into the flattened full grid.
    """

    geometry: str
    dim: int
    h: float
    points: np.ndarray
    dist: np.ndarray
    weights: np.ndarray
    K: object
    shape: tuple
    index: np.ndarray
    axes: list

    @property
    def size(self):
        return self.weights.size

    def full(self, u):
        out = np.zeros(int(np.prod(self.shape)))
        out[self.index] = u
        return out.reshape(self.shape)

    def apply_K(self, u):
        if self.geometry == "radial":
            d, o = self.K
            out = d * u
            out[:-1] += o * u[1:]
            out[1:] += o * u[:-1]
            return out
        return self.K @ u

    def dirichlet_form(self, u):
        """sum over edges of c_e (u_i - u_j)^2, evaluated edge by edge."""
        U = self.full(u)
        if self.geometry == "radial":
            rr = self.axes[0]
            mid = 0.5 * (rr[1:] + rr[:-1])
            c = sphere_area(self.dim) * mid ** (self.dim - 1) / self.h
            return float(np.sum(c * np.diff(U) ** 2))
        return float(sum(np.sum(np.diff(U, axis=k) ** 2)
                         for k in range(self.dim)) * self.h ** (self.dim - 2))


def _radial_grid(p: EpsProblem) -> Grid:
    h = p.h
    m = int(round(p.L / h))
    rr = np.arange(m + 1) * h
    n = p.dim
    om = sphere_area(n)
    lo = np.maximum(rr[:-1] - h / 2, 0.0)
    w = om * ((rr[:-1] + h / 2) ** n - lo ** n) / n
    c = om * (rr[:-1] + h / 2) ** (n - 1) / h
    diag = c.copy()
    diag[1:] += c[:-1]
    off = -c[:-1]
    z = p.z
    e = np.zeros(n)
    e[0] = 1.0
    pts = z + rr[:-1, None] * e
    return Grid("radial", n, h, pts, rr[:-1], w, (diag, off), (m + 1,),
                np.arange(m), [rr])


def _lap1d(m):
    return sp.diags([-np.ones(m - 1), 2 * np.ones(m), -np.ones(m - 1)],
                    [-1, 0, 1], format="csr")


def _box_grid(p: EpsProblem) -> Grid:
    h = p.h
    m = int(round(2 * p.L / h))
    n = p.dim
    axes = [c - p.L + np.arange(m + 1) * h for c in p.center]
    inner = m - 1
    eye = sp.identity(inner, format="csr")
    K = None
    for k in range(n):
        term = None
        for j in range(n):
            mat = _lap1d(inner) if j == k else eye
            term = mat if term is None else sp.kron(term, mat, format="csr")
        K = term if K is None else K + term
    K = (K * h ** (n - 2)).tocsc()
    mesh = np.meshgrid(*[a[1:-1] for a in axes], indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=-1)
    full_idx = np.arange((m + 1) ** n).reshape((m + 1,) * n)
    index = full_idx[(slice(1, -1),) * n].ravel()
    dist = np.linalg.norm(pts - p.z, axis=-1)
    w = np.full(pts.shape[0], h ** n)
    return Grid("box", n, h, pts, dist, w, K, (m + 1,) * n, index, axes)


# ---------------------------------------------------------------------------
# solution container and discrete functionals
# ---------------------------------------------------------------------------

@dataclass
class GridSolution:
    problem: EpsProblem
    grid: Grid
    u: np.ndarray
    residual: float
    energy: float
    iterations: int
    method: str
    trace: list = field(default_factory=list)

    @property
    def eps(self):
        return self.problem.eps

    @property
    def rescaled_energy(self):
        return self.energy / self.problem.eps ** self.problem.dim

    @property
    def values(self):
        """Values on the full grid, Dirichlet boundary included."""
        return self.grid.full(self.u)

    @property
    def max_value(self):
        return float(np.max(self.u))

    def summary(self):
        return {"eps": self.eps, "h": self.problem.h,
                "residual": self.residual, "energy": self.energy,
                "rescaled_energy": self.rescaled_energy,
                "max_value": self.max_value, "iterations": self.iterations,
                "method": self.method, "n_unknowns": int(self.u.size)}


class _Coefficients:
    """Grid samples of V, s, chi; evaluates g, dg/dt, G on the unknowns."""

    def __init__(self, problem: EpsProblem, grid: Grid):
        pen = problem.pen
        self.V = np.asarray(problem.V.eval(grid.points), dtype=float)
        self.s = np.asarray(problem.s.eval(grid.points), dtype=float)
        self.chi = pen.chi_radial(grid.dist)
        self.nu_mu = pen.nu_mu

    def g(self, u):
        return g_from(self.chi, self.s, self.nu_mu, u)

    def dg(self, u):
        return dg_from(self.chi, self.s, self.nu_mu, u)

    def G(self, u):
        return G_from(self.chi, self.s, self.nu_mu, u)


def residual_vector(problem, grid, coef, u):
    """Pointwise discrete residual -eps^2 Lap_h u + V u - g(x, u)."""
    return (problem.eps ** 2 * grid.apply_K(u) / grid.weights
            + coef.V * u - coef.g(u))


def energy_quadrature(problem, grid, coef, u):
    """J_eps by edge differences plus cell sums."""
    return (0.5 * problem.eps ** 2 * grid.dirichlet_form(u)
            + float(np.sum(grid.weights * (0.5 * coef.V * u * u
                                           - coef.G(u)))))


def energy_operator(problem, grid, coef, u):
    """J_eps as 1/2 <A_h u, u> - sum_cells G, A_h = eps^2 K + W V."""
    Au = problem.eps ** 2 * grid.apply_K(u) + grid.weights * coef.V * u
    return 0.5 * float(np.dot(Au, u)) - float(np.sum(grid.weights
                                                      * coef.G(u)))


def _solve(grid, problem, diag_extra, rhs):
    """Solve (eps^2 K + diag(diag_extra)) x = rhs."""
    e2 = problem.eps ** 2
    if grid.geometry == "radial":
        d, o = grid.K
        ab = np.zeros((3, d.size))
        ab[0, 1:] = e2 * o
        ab[1] = e2 * d + diag_extra
        ab[2, :-1] = e2 * o
        return solve_banded((1, 1), ab, rhs)
    A = (e2 * grid.K + sp.diags(diag_extra)).tocsc()
    return spsolve(A, rhs)


# ---------------------------------------------------------------------------
# initial guess
# ---------------------------------------------------------------------------

def boundary_cutoff(problem: EpsProblem, grid: Grid):
    """1 away from the domain edge, 0 on it; quintic ramp over the outer 20%."""
    L = problem.L
    if grid.geometry == "radial":
        return smooth_cutoff((grid.dist - 0.8 * L) / (0.2 * L))
    rel = np.abs(grid.points - np.asarray(problem.center))
    return np.prod(smooth_cutoff((rel - 0.8 * L) / (0.2 * L)), axis=-1)


def initial_guess(problem: EpsProblem, grid: Grid | None = None,
                  opts: SolverOptions | None = None, ground_state=None):
    """eta(x) Q_z((x - z)/eps) sampled on the unknowns."""
    grid = grid or problem.build_grid()
    z = problem.z
    if ground_state is None:
        vz, sz = float(problem.V.eval(z)), float(problem.s.eval(z))
        if vz * sz >= 1.0:
            raise NotInOmega(z, vz, sz)
        ground_state = solve_ground_state(vz, sz, dim=problem.dim,
                                          opts=opts or SolverOptions(n_grid=4096))
    rho = np.linalg.norm(grid.points - z, axis=-1) / problem.eps
    return ground_state.profile(rho) * boundary_cutoff(problem, grid)


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------

def _newton(problem, grid, coef, u0, trace):
    u = u0.copy()
    w = grid.weights
    r = residual_vector(problem, grid, coef, u)
    merit = np.sqrt(np.sum(w * r * r))
    for it in range(1, problem.max_newton + 1):
        if np.max(np.abs(r)) < problem.tol:
            return u, it - 1, True
        du = _solve(grid, problem, w * (coef.V - coef.dg(u)), -w * r)
        t = 1.0
        for _ in range(40):
            trial = u + t * du
            rt = residual_vector(problem, grid, coef, trial)
            mt = np.sqrt(np.sum(w * rt * rt))
            if mt <= (1.0 - 1e-4 * t) * merit:
                break
            t *= 0.5
        else:
            trace.append({"stage": "newton", "iteration": it,
                          "residual": float(np.max(np.abs(r))),
                          "step": 0.0})
            return u, it, False
        u, r, merit = trial, rt, mt
        trace.append({"stage": "newton", "iteration": it,
                      "residual": float(np.max(np.abs(r))), "step": t})
    return u, problem.max_newton, bool(np.max(np.abs(r)) < problem.tol)


def _nehari_scale(problem, grid, coef, u):
    """theta > 0 with J'(theta u) u = 0, by bracketing and bisection."""
    w = grid.weights
    a = problem.eps ** 2 * np.dot(grid.apply_K(u), u) + np.sum(w * coef.V * u * u)

    def gap(th):
        return a - np.sum(w * coef.g(th * u) * u) / th

    lo, hi = 1e-8, 1.0
    if gap(lo) <= 0:
        return None
    while gap(hi) > 0:
        hi *= 2.0
        if hi > 1e12:
            return None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14 * hi:
            break
    return 0.5 * (lo + hi)


def _gradient_flow(problem, grid, coef, u0, trace, step=0.5):
    """Sobolev-preconditioned descent on J_eps, projected to the Nehari set."""
    w = grid.weights
    u = np.maximum(u0, 0.0)
    th = _nehari_scale(problem, grid, coef, u)
    if th is None:
        return None
    u = th * u
    diagA = w * coef.V
    for it in range(1, problem.flow_steps + 1):
        grad = u - _solve(grid, problem, diagA, w * coef.g(u))
        gnorm = np.sqrt(np.dot(grad, problem.eps ** 2 * grid.apply_K(grad)
                               + diagA * grad))
        unorm = np.sqrt(np.dot(u, problem.eps ** 2 * grid.apply_K(u)
                               + diagA * u))
        trace.append({"stage": "flow", "iteration": it,
                      "gradient": float(gnorm / unorm)})
        if gnorm < 1e-6 * unorm:
            break
        v = u - step * grad
        th = _nehari_scale(problem, grid, coef, v)
        if th is None:
            return None
        u = th * v
    return u


def solve_penalized(problem: EpsProblem, guess=None, grid: Grid | None = None,
                    opts: SolverOptions | None = None) -> GridSolution:
    """Damped Newton from ``guess``; Nehari gradient flow as a fallback.

    The fallback runs when Newton stalls or when it lands on u = 0 from a
    nontrivial guess; ``method`` and ``trace`` record which path was taken.

    Raises
    ------
    ConvergedToZero
        If the iteration settles on the trivial critical point.
    NoConvergence
        If neither Newton nor the flow-then-Newton restart meets ``tol``.
    """
    grid = grid or problem.build_grid()
    if guess is None:
        guess = initial_guess(problem, grid, opts)
    guess = np.asarray(guess, dtype=float)
    if guess.shape != (grid.size,):
        raise ValueError("guess does not match the grid")
    coef = _Coefficients(problem, grid)
    trace: list = []
    zero_level = 1e-6 * float(np.max(guess)) if np.max(guess) > 0 else 0.0

    u, its, ok = _newton(problem, grid, coef, guess, trace)
    method = "newton"
    collapsed = ok and np.max(np.abs(u)) <= zero_level
    if not ok or collapsed:
        # a collapse from a nontrivial seed is treated as a Newton failure:
        # the Nehari-projected flow cannot reach u = 0, so restart from it
        fail = ConvergedToZero if collapsed else NoConvergence
        if not np.max(guess) > 0:
            raise fail("Newton failed and the guess is not positive"
                       if not collapsed else "Newton converged to u = 0")
        v = _gradient_flow(problem, grid, coef, guess, trace)
        if v is None:
            raise fail("Newton failed and the guess cannot be projected "
                       "onto the Nehari set")
        u, its2, ok = _newton(problem, grid, coef, v, trace)
        its += its2
        method = "flow+newton"
        if not ok:
            raise NoConvergence(f"no convergence after {its} Newton steps")
        if np.max(np.abs(u)) <= zero_level:
            raise ConvergedToZero("solver collapsed onto u = 0 "
                                  f"(|u|_inf = {np.max(np.abs(u)):.3g})")

    res = float(np.max(np.abs(residual_vector(problem, grid, coef, u))))
    return GridSolution(problem, grid, u, res,
                        energy_quadrature(problem, grid, coef, u),
                        its, method, trace)


def solution_checks(sol: GridSolution):
    """Independent recomputation of residual, energies and positivity."""
    coef = _Coefficients(sol.problem, sol.grid)
    r = residual_vector(sol.problem, sol.grid, coef, sol.u)
    eq = energy_quadrature(sol.problem, sol.grid, coef, sol.u)
    eo = energy_operator(sol.problem, sol.grid, coef, sol.u)
    return {"residual": float(np.max(np.abs(r))),
            "energy_quadrature": eq, "energy_operator": eo,
            "energy_mismatch": abs(eq - eo) / max(abs(eq), 1e-300),
            "min_value": float(np.min(sol.u))}


def penalization_active(sol: GridSolution, pen: PenalizedNonlinearity | None = None):
    """True iff u exceeds the switch level of fbar somewhere outside B(z, r)."""
    pen = pen or sol.problem.pen
    d = np.linalg.norm(sol.grid.points - np.asarray(pen.z), axis=-1)
    out = d >= pen.r
    if not np.any(out):
        return False
    level = pen.switch_level(sol.grid.points[out])
    return bool(np.any(sol.u[out] > level))


# ---------------------------------------------------------------------------
# continuation in eps
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    solutions: list
    failure: str | None = None

    def __len__(self):
        return len(self.solutions)

    def __iter__(self):
        return iter(self.solutions)

    def __getitem__(self, i):
        return self.solutions[i]


def transfer(prev: GridSolution, problem: EpsProblem, grid: Grid):
    """Linear interpolation of ``prev`` in the stretched variable (x - z)/eps.

    Shrinking eps in the spike variable keeps the warm start on the same
    solution branch; the new grid is finer, so nothing is lost.
    """
    z = problem.z
    ratio = prev.eps / problem.eps
    pts = z + (grid.points - z) * ratio
    if prev.grid.geometry == "radial":
        rr = prev.grid.axes[0]
        d = np.linalg.norm(pts - z, axis=-1)
        return np.interp(d, rr, prev.values, right=0.0)
    f = RegularGridInterpolator(prev.grid.axes, prev.values,
                                bounds_error=False, fill_value=0.0)
    return f(pts)


def continuation_sweep(template: EpsProblem, eps_list, opts=None,
                       ground_state=None) -> SweepResult:
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise DomainError("eps_list must be strictly decreasing")
    out = []
    prev = None
    for eps in eps_list:
        prob = template.with_eps(eps)
        grid = prob.build_grid()
        if prev is None:
            guess = initial_guess(prob, grid, opts, ground_state)
        else:
            guess = transfer(prev, prob, grid)
        try:
            sol = solve_penalized(prob, guess, grid)
        except NoConvergence as exc:
            return SweepResult(out, f"eps={eps:g}: {exc}")
        out.append(sol)
        prev = sol
    return SweepResult(out)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def save_solution(sol: GridSolution, csv_path, json_path=None):
    """Unknown-node coordinates and values as CSV, optional JSON summary."""
    n = sol.problem.dim
    if sol.grid.geometry == "radial":
        data = np.column_stack([sol.grid.dist, sol.u])
        header = "r,u"
    else:
        data = np.column_stack([sol.grid.points, sol.u])
        header = ",".join([f"x{k}" for k in range(n)] + ["u"])
    np.savetxt(csv_path, data, delimiter=",", header=header, comments="",
               fmt="%.17g")
    if json_path is not None:
        meta = {"schema_version": SCHEMA_VERSION,
                "problem": sol.problem.to_dict(), **sol.summary(),
                "penalization_active": penalization_active(sol)}
        with open(json_path, "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_solution(csv_path, json_path=None):
    with open(csv_path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    cols = {name: data[:, k] for k, name in enumerate(header)}
    meta = None
    if json_path is not None:
        with open(json_path) as fh:
            meta = json.load(fh)
        if meta.get("schema_version") != SCHEMA_VERSION:
            raise ValueError("unsupported solution schema version")
    return cols, meta


__all__ = ["EpsProblem", "Grid", "GridSolution", "SweepResult",
           "initial_guess", "solve_penalized", "continuation_sweep",
           "penalization_active", "solution_checks", "transfer",
           "energy_quadrature", "energy_operator", "residual_vector",
           "save_solution", "load_solution"]
