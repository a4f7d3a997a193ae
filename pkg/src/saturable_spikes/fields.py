"""Spatial coefficients and the saturable / penalized nonlinearities.

Coefficient fields are small immutable objects with analytic values and
gradients.  All evaluation routines accept points as arrays of shape
``(..., N)`` and broadcast over the leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod

import numpy as np


# ---------------------------------------------------------------------------
# saturable nonlinearity
# ---------------------------------------------------------------------------

def f_saturable(s, t):
    """f(t) = t^3 / (1 + s t^2)."""
    t = np.asarray(t, dtype=float)
    return t * t * t / (1.0 + s * t * t)


def df_saturable(s, t):
    """Derivative of :func:`f_saturable` with respect to t."""
    t = np.asarray(t, dtype=float)
    q = s * t * t
    return t * t * (3.0 + q) / (1.0 + q) ** 2


def F_primitive(s, t):
    """F(t) = t^2/(2s) - ln(1 + s t^2)/(2 s^2), the primitive with F(0) = 0.

    For small ``s t^2`` the two terms cancel to leading order, so the series
    ``t^4/4 - s t^6/6 + s^2 t^8/8`` is used there instead.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    q = s * t * t
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (q - np.log1p(q)) / (2.0 * s * s)
    series = t ** 4 * (0.25 - q / 6.0 + q * q / 8.0 - q ** 3 / 10.0)
    return np.where(np.abs(q) < 1e-3, series, direct)


def nonquadraticity(s, t):
    """f t - 2F = [ln(1 + s t^2) - s t^2/(1 + s t^2)] / s^2, always >= 0."""
    t = np.asarray(t, dtype=float)
    q = s * t * t
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (np.log1p(q) - q / (1.0 + q)) / (s * s)
    series = t ** 4 * (0.5 - 2.0 * q / 3.0 + 0.75 * q * q)
    return np.where(np.abs(q) < 1e-3, series, direct)


def in_omega(vy, sy):
    """True iff the frozen problem has a ground state, i.e. V(y) s(y) < 1."""
    return bool(vy * sy < 1.0)


# ---------------------------------------------------------------------------
# coefficient fields
# ---------------------------------------------------------------------------

def _points(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    return x


class ScalarField:
    """Smooth positive coefficient on R^N with an analytic gradient."""

    kind = "abstract"

    def __call__(self, x):
        return self.eval(x)

    def eval(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    @property
    def floor(self) -> float:
        """A certified positive lower bound of the field on R^N."""
        raise NotImplementedError

    def value_growth(self) -> tuple[float, float]:
        """(beta, gamma) with |field(x)| <= beta exp(gamma |x|)."""
        raise NotImplementedError

    def grad_growth(self) -> tuple[float, float]:
        """(beta, gamma) with |grad field(x)| <= beta exp(gamma |x|)."""
        raise NotImplementedError

    def is_radial_about(self, z) -> bool:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_dict(d: dict) -> "ScalarField":
        kind = d["kind"]
        if kind == "constant":
            return Constant(float(d["value"]))
        if kind == "quadratic-well":
            return QuadraticWell(float(d["base"]), tuple(d["center"]),
                                 tuple(d["coeffs"]))
        if kind == "gaussian-bump-sum":
            return GaussianBumps(float(d["base"]), tuple(d["amplitudes"]),
                                 tuple(tuple(c) for c in d["centers"]),
                                 tuple(d["widths"]))
        if kind == "product-composite":
            return Product(tuple(ScalarField.from_dict(f)
                                 for f in d["factors"]))
        raise ValueError(f"unknown field kind {kind!r}")


@dataclass(frozen=True)
class Constant(ScalarField):
    value: float
    kind = "constant"

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError("constant field must be positive")

    def eval(self, x):
        x = _points(x)
        return np.full(x.shape[:-1], self.value)

    def grad(self, x):
        return np.zeros_like(_points(x))

    @property
    def floor(self):
        return self.value

    def value_growth(self):
        return self.value, 0.0

    def grad_growth(self):
        return 0.0, 0.0

    def is_radial_about(self, z):
        return True

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class QuadraticWell(ScalarField):
    """base + sum_k coeffs[k] (x_k - center_k)^2 with nonnegative coeffs."""

    base: float
    center: tuple
    coeffs: tuple
    kind = "quadratic-well"

    def __post_init__(self):
        if len(self.center) != len(self.coeffs):
            raise ValueError("center and coeffs must have equal length")
        if min(self.coeffs) < 0:
            raise ValueError("quadratic-well coefficients must be >= 0")
        if not self.base > 0:
            raise ValueError("quadratic-well base must be positive")

    def eval(self, x):
        d = _points(x) - np.asarray(self.center)
        return self.base + d ** 2 @ np.asarray(self.coeffs, dtype=float)

    def grad(self, x):
        d = _points(x) - np.asarray(self.center)
        return 2.0 * np.asarray(self.coeffs, dtype=float) * d

    @property
    def floor(self):
        return self.base

    def value_growth(self):
        c = float(np.linalg.norm(self.center))
        return self.base + max(self.coeffs) * (1.0 + c) ** 2, 2.0

    def grad_growth(self):
        c = float(np.linalg.norm(self.center))
        return 2.0 * max(self.coeffs) * (1.0 + c), 1.0

    def is_radial_about(self, z):
        return (np.allclose(self.center, z, rtol=0, atol=1e-14)
                and np.ptp(self.coeffs) == 0)

    def to_dict(self):
        return {"kind": self.kind, "base": self.base,
                "center": list(self.center), "coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class GaussianBumps(ScalarField):
    """base + sum_k A_k exp(-|x - c_k|^2 / (2 w_k^2))."""

    base: float
    amplitudes: tuple
    centers: tuple
    widths: tuple
    kind = "gaussian-bump-sum"

    def __post_init__(self):
        if not (len(self.amplitudes) == len(self.centers) == len(self.widths)):
            raise ValueError("amplitudes, centers and widths differ in length")
        if min(self.widths, default=1.0) <= 0:
            raise ValueError("bump widths must be positive")
        if not self.floor > 0:
            raise ValueError("gaussian-bump-sum is not bounded below by a "
                             "positive constant (base + negative amplitudes "
                             "<= 0)")

    def _bumps(self, x):
        x = _points(x)
        c = np.asarray(self.centers, dtype=float)
        w = np.asarray(self.widths, dtype=float)
        d = x[..., None, :] - c
        e = np.exp(-np.sum(d * d, axis=-1) / (2.0 * w * w))
        return d, e, w

    def eval(self, x):
        _, e, _ = self._bumps(x)
        return self.base + e @ np.asarray(self.amplitudes, dtype=float)

    def grad(self, x):
        d, e, w = self._bumps(x)
        a = np.asarray(self.amplitudes, dtype=float)
        return -np.sum((a * e / (w * w))[..., None] * d, axis=-2)

    @property
    def floor(self):
        return self.base + sum(min(a, 0.0) for a in self.amplitudes)

    def value_growth(self):
        return self.base + sum(abs(a) for a in self.amplitudes), 0.0

    def grad_growth(self):
        b = sum(abs(a) / w for a, w in zip(self.amplitudes, self.widths))
        return b * np.exp(-0.5), 0.0

    def is_radial_about(self, z):
        return all(np.allclose(c, z, rtol=0, atol=1e-14) for c in self.centers)

    def to_dict(self):
        return {"kind": self.kind, "base": self.base,
                "amplitudes": list(self.amplitudes),
                "centers": [list(c) for c in self.centers],
                "widths": list(self.widths)}


@dataclass(frozen=True)
class Product(ScalarField):
    factors: tuple
    kind = "product-composite"

    def __post_init__(self):
        if not self.factors:
            raise ValueError("product needs at least one factor")

    def eval(self, x):
        out = self.factors[0].eval(x)
        for f in self.factors[1:]:
            out = out * f.eval(x)
        return out

    def grad(self, x):
        vals = [f.eval(x) for f in self.factors]
        out = 0.0
        for i, f in enumerate(self.factors):
            others = prod((v for j, v in enumerate(vals) if j != i),
                          start=np.ones_like(vals[0]))
            out = out + others[..., None] * f.grad(x)
        return out

    @property
    def floor(self):
        return prod(f.floor for f in self.factors)

    def value_growth(self):
        gs = [f.value_growth() for f in self.factors]
        return prod(b for b, _ in gs), sum(g for _, g in gs)

    def grad_growth(self):
        vg = [f.value_growth() for f in self.factors]
        beta, gamma = 0.0, 0.0
        for i, f in enumerate(self.factors):
            bg, gg = f.grad_growth()
            b = bg * prod(vg[j][0] for j in range(len(vg)) if j != i)
            g = gg + sum(vg[j][1] for j in range(len(vg)) if j != i)
            beta += b
            gamma = max(gamma, g)
        return beta, gamma

    def is_radial_about(self, z):
        return all(f.is_radial_about(z) for f in self.factors)

    def to_dict(self):
        return {"kind": self.kind,
                "factors": [f.to_dict() for f in self.factors]}


# ---------------------------------------------------------------------------
# penalization
# ---------------------------------------------------------------------------

def smooth_cutoff(rho):
    """1 for rho <= 0, 0 for rho >= 1, quintic smoothstep (C^2) between."""
    rho = np.clip(np.asarray(rho, dtype=float), 0.0, 1.0)
    return 1.0 - rho ** 3 * (10.0 - 15.0 * rho + 6.0 * rho * rho)


def switch_level(s, nu_mu):
    """Amplitude t* > 0 where f(t) = nu mu t; +inf if f(t) < nu mu t always."""
    s = np.asarray(s, dtype=float)
    den = 1.0 - nu_mu * s
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, np.sqrt(nu_mu / np.where(den > 0, den, 1.0)),
                        np.inf)


def fbar_from(s, nu_mu, t):
    t = np.asarray(t, dtype=float)
    tp = np.maximum(t, 0.0)
    return np.minimum(f_saturable(s, tp), nu_mu * tp)


def dfbar_from(s, nu_mu, t):
    t = np.asarray(t, dtype=float)
    tp = np.maximum(t, 0.0)
    capped = f_saturable(s, tp) > nu_mu * tp
    return np.where(t < 0, 0.0,
                    np.where(capped, nu_mu, df_saturable(s, tp)))


def Fbar_from(s, nu_mu, t):
    """Exact primitive of fbar, continuous across the switch level t*."""
    t = np.asarray(t, dtype=float)
    tp = np.maximum(t, 0.0)
    ts = switch_level(s, nu_mu)
    below = F_primitive(s, tp)
    tsc = np.where(np.isfinite(ts), ts, 0.0)
    above = F_primitive(s, tsc) + 0.5 * nu_mu * (tp * tp - tsc * tsc)
    return np.where(tp <= ts, below, above)


def g_from(chi, s, nu_mu, t):
    return chi * f_saturable(s, t) + (1.0 - chi) * fbar_from(s, nu_mu, t)


def dg_from(chi, s, nu_mu, t):
    return chi * df_saturable(s, t) + (1.0 - chi) * dfbar_from(s, nu_mu, t)


def G_from(chi, s, nu_mu, t):
    # g is affine in chi at fixed x, so G = chi F + (1 - chi) Fbar exactly
    return chi * F_primitive(s, t) + (1.0 - chi) * Fbar_from(s, nu_mu, t)


@dataclass(frozen=True)
class PenalizedNonlinearity:
    """g = chi f + (1 - chi) fbar around the ball B(z, r).

    ``chi`` is 1 on B(z, r_inner), 0 outside B(z, r) and a quintic
    smoothstep in |x - z| on the annulus.
    """

    s: ScalarField
    z: tuple
    r: float
    r_inner: float | None = None
    nu: float = 0.25
    mu: float | None = None
    V: ScalarField | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.r_inner is None:
            object.__setattr__(self, "r_inner", 0.8 * self.r)
        if self.mu is None:
            if self.V is None:
                raise ValueError("need mu or the potential V to take its floor")
            object.__setattr__(self, "mu", self.V.floor)
        if not 0 < self.r_inner < self.r:
            raise ValueError("need 0 < r' < r")
        if not 0 < self.nu < 0.5:
            raise ValueError("nu must lie in (0, 1/2)")
        if not self.mu > 0:
            raise ValueError("mu must be positive")

    @property
    def nu_mu(self):
        return self.nu * self.mu

    def chi(self, x):
        d = np.linalg.norm(_points(x) - np.asarray(self.z), axis=-1)
        return self.chi_radial(d)

    def chi_radial(self, d):
        return smooth_cutoff((np.asarray(d) - self.r_inner)
                             / (self.r - self.r_inner))

    def f(self, x, t):
        return f_saturable(self.s.eval(x), t)

    def fbar(self, x, t):
        return fbar_from(self.s.eval(x), self.nu_mu, t)

    def g(self, x, t):
        return g_from(self.chi(x), self.s.eval(x), self.nu_mu, t)

    def dg_dt(self, x, t):
        return dg_from(self.chi(x), self.s.eval(x), self.nu_mu, t)

    def G(self, x, t):
        return G_from(self.chi(x), self.s.eval(x), self.nu_mu, t)

    def switch_level(self, x):
        return switch_level(self.s.eval(x), self.nu_mu)

    def to_dict(self):
        return {"z": list(self.z), "r": self.r, "r_inner": self.r_inner,
                "nu": self.nu, "mu": self.mu}


# ---------------------------------------------------------------------------
# elementary inequalities used in the compactness argument
# ---------------------------------------------------------------------------

def decre_i(t):
    """t^2 - ln(1 + t^2), bounded by C(q)|t|^q for 2 <= q <= 4."""
    t = np.asarray(t, dtype=float)
    q = t * t
    return np.where(q < 1e-4, q * q / 2.0 - q ** 3 / 3.0, q - np.log1p(q))


def decre_ii(s, t):
    """t^2 / (1 + s t), bounded by |t|/s for t >= 0."""
    t = np.asarray(t, dtype=float)
    return t * t / (1.0 + s * t)


def decre_iii(L, s):
    """h(s) = L/s - ln(1 + L s)/s^2, decreasing in s > 0 for each L >= 0."""
    s = np.asarray(s, dtype=float)
    x = L * s
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (x - np.log1p(x)) / (s * s)
    series = L * L * (0.5 - x / 3.0 + x * x / 4.0)
    return np.where(np.abs(x) < 1e-4, series, direct)
