"""Compiled Dormand-Prince 5(4) kernel for the radial frozen ODE.

The ODE is ``u'' + (N-1)/r u' = V u - u^3/(1 + s u^2)`` written as a first
order system in ``(u, p = u')``.  The kernel classifies a trajectory started
from ``u(r0) = a + c r0^2 + d r0^4`` as overshoot / undershoot and can
record the accepted steps for dense evaluation afterwards.
"""

import numpy as np
from numba import njit

OVERSHOOT = 0
UNDERSHOOT = 1
STOP_LEVEL = 2
REACHED_END = 3
STEP_FAILURE = 4

# Dormand-Prince 5(4), Hairer-Norsett-Wanner table.
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = (19372.0 / 6561.0, -25360.0 / 2187.0,
                          64448.0 / 6561.0, -212.0 / 729.0)
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0,
                                46732.0 / 5247.0, 49.0 / 176.0,
                                -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
_E1 = 71.0 / 57600.0
_E3 = -71.0 / 16695.0
_E4 = 71.0 / 1920.0
_E5 = -17253.0 / 339200.0
_E6 = 22.0 / 525.0
_E7 = -1.0 / 40.0


@njit(cache=True, nogil=True)
def _rhs(r, u, p, n, v, s):
    return p, -(n - 1.0) * p / r + v * u - u * u * u / (1.0 + s * u * u)


@njit(cache=True, nogil=True)
def series_start(a, n, v, s, r0):
    """Fourth-order Taylor start ``u = a + c r^2 + d r^4`` near the origin."""
    g = v * a - a ** 3 / (1.0 + s * a * a)
    dg = v - a * a * (3.0 + s * a * a) / (1.0 + s * a * a) ** 2
    c = g / (2.0 * n)
    d = dg * c / (4.0 * (n + 2.0))
    u = a + c * r0 ** 2 + d * r0 ** 4
    p = 2.0 * c * r0 + 4.0 * d * r0 ** 3
    return u, p


@njit(cache=True, nogil=True)
def shoot(a, n, v, s, r0, r_max, rtol, atol_u, atol_p, stop_level,
          record, max_steps):
    """Integrate from ``r0`` until a classifying event.

    Returns ``(code, count, rs, us, ps)``; the arrays hold ``count`` accepted
    nodes when ``record`` is true, otherwise only the last state.  ``code`` is
    one of the module level constants.  ``stop_level > 0`` ends the run on
    the first step where ``u`` drops below it while still decreasing.
    """
    r = r0
    u, p = series_start(a, n, v, s, r0)
    cap = 1024 if record else 1
    rs = np.empty(cap)
    us = np.empty(cap)
    ps = np.empty(cap)
    count = 0
    rs[0] = r
    us[0] = u
    ps[0] = p
    if record:
        count = 1
    if p > 0.0:
        return UNDERSHOOT, count, rs, us, ps
    h = 0.01 / np.sqrt(v)
    k1u, k1p = _rhs(r, u, p, n, v, s)
    steps = 0
    while r < r_max:
        if steps >= max_steps:
            return STEP_FAILURE, count, rs, us, ps
        steps += 1
        if r + h > r_max:
            h = r_max - r
        k2u, k2p = _rhs(r + _C2 * h, u + h * _A21 * k1u,
                        p + h * _A21 * k1p, n, v, s)
        k3u, k3p = _rhs(r + _C3 * h, u + h * (_A31 * k1u + _A32 * k2u),
                        p + h * (_A31 * k1p + _A32 * k2p), n, v, s)
        k4u, k4p = _rhs(r + _C4 * h,
                        u + h * (_A41 * k1u + _A42 * k2u + _A43 * k3u),
                        p + h * (_A41 * k1p + _A42 * k2p + _A43 * k3p),
                        n, v, s)
        k5u, k5p = _rhs(r + _C5 * h,
                        u + h * (_A51 * k1u + _A52 * k2u + _A53 * k3u
                                 + _A54 * k4u),
                        p + h * (_A51 * k1p + _A52 * k2p + _A53 * k3p
                                 + _A54 * k4p), n, v, s)
        k6u, k6p = _rhs(r + h,
                        u + h * (_A61 * k1u + _A62 * k2u + _A63 * k3u
                                 + _A64 * k4u + _A65 * k5u),
                        p + h * (_A61 * k1p + _A62 * k2p + _A63 * k3p
                                 + _A64 * k4p + _A65 * k5p), n, v, s)
        un = u + h * (_B1 * k1u + _B3 * k3u + _B4 * k4u + _B5 * k5u
                      + _B6 * k6u)
        pn = p + h * (_B1 * k1p + _B3 * k3p + _B4 * k4p + _B5 * k5p
                      + _B6 * k6p)
        k7u, k7p = _rhs(r + h, un, pn, n, v, s)
        eu = h * (_E1 * k1u + _E3 * k3u + _E4 * k4u + _E5 * k5u
                  + _E6 * k6u + _E7 * k7u)
        ep = h * (_E1 * k1p + _E3 * k3p + _E4 * k4p + _E5 * k5p
                  + _E6 * k6p + _E7 * k7p)
        su = atol_u + rtol * max(abs(u), abs(un))
        sp = atol_p + rtol * max(abs(p), abs(pn))
        err = np.sqrt(0.5 * ((eu / su) ** 2 + (ep / sp) ** 2))
        if err <= 1.0:
            r = r + h
            u = un
            p = pn
            k1u = k7u
            k1p = k7p
            if record:
                if count == rs.shape[0]:
                    rs = _grow(rs)
                    us = _grow(us)
                    ps = _grow(ps)
                rs[count] = r
                us[count] = u
                ps[count] = p
                count += 1
            else:
                rs[0] = r
                us[0] = u
                ps[0] = p
            if u < 0.0:
                return OVERSHOOT, count, rs, us, ps
            if p > 0.0:
                return UNDERSHOOT, count, rs, us, ps
            if stop_level > 0.0 and u < stop_level:
                return STOP_LEVEL, count, rs, us, ps
            fac = 5.0 if err == 0.0 else min(5.0, 0.9 * err ** -0.2)
        else:
            fac = max(0.2, 0.9 * err ** -0.2)
        h = h * fac
        if h < 1e-14 * max(1.0, r):
            return STEP_FAILURE, count, rs, us, ps
    return REACHED_END, count, rs, us, ps


@njit(cache=True, nogil=True)
def _grow(arr):
    out = np.empty(2 * arr.shape[0])
    out[:arr.shape[0]] = arr
    return out
