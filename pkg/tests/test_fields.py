import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from saturable_spikes.fields import (
    Constant, F_primitive, GaussianBumps, PenalizedNonlinearity, Product,
    QuadraticWell, ScalarField, decre_i, decre_ii, decre_iii, df_saturable,
    f_saturable, in_omega, nonquadraticity, smooth_cutoff, switch_level)

pos = st.floats(0.05, 5.0)
amp = st.floats(-30.0, 30.0)


# -- saturable nonlinearity --------------------------------------------------

def test_f_values():
    assert f_saturable(1.0, 1.0) == 0.5
    assert f_saturable(1.0, 0.0) == 0.0
    assert f_saturable(0.5, 10.0) == pytest.approx(1000 / 51, rel=1e-15)


def test_F_values():
    assert F_primitive(1.0, 0.0) == 0.0
    assert F_primitive(1.0, 1.0) == pytest.approx((1 - np.log(2)) / 2,
                                                  rel=1e-14)


@given(pos, amp)
def test_f_odd_and_bounded(s, t):
    assert f_saturable(s, -t) == -f_saturable(s, t)
    assert abs(f_saturable(s, t)) <= abs(t) / s * (1 + 1e-15)


@given(pos, st.floats(-20, 20))
def test_F_derivative_matches_f(s, t):
    h = 1e-5
    fd = (F_primitive(s, t + h) - F_primitive(s, t - h)) / (2 * h)
    assert fd == pytest.approx(f_saturable(s, t), rel=1e-6, abs=1e-8)


@given(pos, st.floats(-20, 20))
def test_df_matches_fd(s, t):
    h = 1e-6
    fd = (f_saturable(s, t + h) - f_saturable(s, t - h)) / (2 * h)
    assert df_saturable(s, t) == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_F_series_branch_is_continuous():
    s = 0.7
    q = 1e-3
    t = np.sqrt(q / s)
    lo = F_primitive(s, t * (1 - 1e-9))
    hi = F_primitive(s, t * (1 + 1e-9))
    assert hi == pytest.approx(lo, rel=1e-8)
    # high precision reference via the integral of f
    ref = quad(lambda x: x ** 3 / (1 + s * x * x), 0, t, epsabs=0,
               epsrel=1e-13)[0]
    assert lo == pytest.approx(ref, rel=1e-9)


def test_in_omega():
    assert in_omega(0.5, 0.5)
    assert not in_omega(2.0, 1.0)
    assert not in_omega(1.0, 1.0)  # the boundary is excluded


# -- coefficient fields ------------------------------------------------------

FIELDS = [
    Constant(0.7),
    QuadraticWell(0.6, (0.1, -0.2), (0.3, 0.5)),
    GaussianBumps(0.5, (0.4, -0.2), ((0.3, 0.2), (-0.5, 0.1)), (0.6, 0.9)),
    Product((QuadraticWell(1.0, (0.0, 0.0), (0.1, 0.2)),
             GaussianBumps(0.8, (0.3,), ((0.2, -0.1),), (0.7,)))),
]


@pytest.mark.parametrize("fld", FIELDS, ids=lambda f: f.kind)
def test_field_floor_and_gradient(fld):
    rng = np.random.default_rng(3)
    x = rng.uniform(-3, 3, size=(200, 2))
    vals = fld.eval(x)
    assert np.all(vals >= fld.floor) and fld.floor > 0
    h = 1e-5
    g = fld.grad(x)
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd = (fld.eval(x + e) - fld.eval(x - e)) / (2 * h)
        scale = 1 + np.abs(fd)
        assert np.all(np.abs(g[:, k] - fd) <= 1e-6 * scale)


@pytest.mark.parametrize("fld", FIELDS, ids=lambda f: f.kind)
def test_field_growth_bounds(fld):
    rng = np.random.default_rng(4)
    x = rng.uniform(-8, 8, size=(500, 2))
    r = np.linalg.norm(x, axis=-1)
    b, c = fld.grad_growth()
    assert np.all(np.linalg.norm(fld.grad(x), axis=-1) <= b * np.exp(c * r))
    b, c = fld.value_growth()
    assert np.all(np.abs(fld.eval(x)) <= b * np.exp(c * r))


@pytest.mark.parametrize("fld", FIELDS, ids=lambda f: f.kind)
def test_field_dict_round_trip(fld):
    back = ScalarField.from_dict(fld.to_dict())
    x = np.array([[0.3, -0.4], [1.2, 0.5]])
    np.testing.assert_array_equal(back.eval(x), fld.eval(x))


def test_radial_symmetry_detection():
    assert Constant(1.0).is_radial_about((3.0, 1.0))
    w = QuadraticWell(1.0, (0.5, 0.0), (0.2, 0.2))
    assert w.is_radial_about((0.5, 0.0))
    assert not w.is_radial_about((0.0, 0.0))
    assert not QuadraticWell(1.0, (0.0, 0.0), (0.2, 0.3)).is_radial_about((0, 0))


def test_invalid_fields_rejected():
    with pytest.raises(ValueError):
        Constant(-1.0)
    with pytest.raises(ValueError):
        GaussianBumps(0.2, (-0.5,), ((0.0, 0.0),), (1.0,))


# -- penalization ------------------------------------------------------------

@pytest.fixture
def pen():
    s = QuadraticWell(0.5, (0.0, 0.0), (0.1, 0.1))
    return PenalizedNonlinearity(s, (0.0, 0.0), 1.0, V=Constant(1.2))


def test_penalization_defaults(pen):
    assert pen.r_inner == pytest.approx(0.8)
    assert pen.nu == 0.25
    assert pen.mu == 1.2


def test_chi_shape(pen):
    d = np.linspace(0, 2, 2001)
    chi = pen.chi_radial(d)
    assert np.all(chi[d <= 0.8] == 1) and np.all(chi[d >= 1.0] == 0)
    assert np.all((chi >= 0) & (chi <= 1))
    assert np.all(np.diff(chi) <= 0)
    # C^1 across both radii: one-sided slopes vanish
    h = 1e-6
    for r0 in (0.8, 1.0):
        assert abs(pen.chi_radial(r0 + h) - pen.chi_radial(r0 - h)) < 1e-10


def test_g_inside_inner_ball_is_f(pen):
    x = np.array([[0.2, 0.3]])
    t = np.linspace(0, 20, 50)
    np.testing.assert_allclose(pen.g(x, t), pen.f(x, t), rtol=0, atol=0)
    np.testing.assert_allclose(pen.G(x, t), F_primitive(pen.s.eval(x), t),
                               rtol=1e-15)


def test_g_outside_ball(pen):
    x = np.array([[1.5, 0.2]])
    t = np.linspace(-5, 30, 400)
    g = pen.g(x, t)
    assert np.all(g[t < 0] == 0)
    expect = np.minimum(pen.f(x, np.maximum(t, 0)), pen.nu_mu * np.maximum(t, 0))
    np.testing.assert_allclose(g, expect, rtol=1e-15)


def test_G_outside_ball_below_quadratic_cap(pen):
    # Above the switch level the closed form is F(t*) + nu mu (t^2 - t*^2)/2;
    # it lies below nu mu t^2 / 2 and differs from it by a t-independent
    # constant, so 2G <= g t <= nu mu t^2 still holds.
    x = np.array([[1.5, 0.0]])
    sx = float(pen.s.eval(x)[0])
    ts = float(switch_level(sx, pen.nu_mu))
    t = np.linspace(1.01 * ts, 20 * ts, 50)
    G = pen.G(x, t)
    cap = 0.5 * pen.nu_mu * t * t
    assert np.all(G <= cap)
    gap = cap - G
    np.testing.assert_allclose(gap, gap[0], rtol=1e-12)
    assert gap[0] == pytest.approx(0.5 * pen.nu_mu * ts ** 2
                                   - F_primitive(sx, ts), rel=1e-12)


@pytest.mark.parametrize("d", [0.3, 0.85, 0.9, 0.97, 1.4])
def test_G_matches_quadrature_of_g(pen, d):
    x = np.array([[d, 0.0]])
    for t in (-2.0, 0.3, 1.0, 2.5, 8.0):
        ref = quad(lambda u: float(pen.g(x, u)[0]), 0.0, t, epsabs=1e-13,
                   epsrel=1e-12, limit=200,
                   points=[float(pen.switch_level(x)[0])]
                   if 0 < pen.switch_level(x)[0] < t else None)[0]
        assert float(pen.G(x, t)[0]) == pytest.approx(ref, rel=1e-10, abs=1e-13)


def test_G_derivative_in_annulus(pen):
    x = np.array([[0.9, 0.0]])
    h = 1e-5
    for t in (0.2, 0.7, 3.0, 9.0):
        fd = (pen.G(x, t + h) - pen.G(x, t - h)) / (2 * h)
        assert float(fd[0]) == pytest.approx(float(pen.g(x, t)[0]), rel=1e-7)


def test_dg_matches_fd(pen):
    x = np.array([[0.9, 0.1], [1.3, 0.0], [0.1, 0.0]])
    h = 1e-6
    for t in (-1.0, 0.4, 2.0, 6.0):
        fd = (pen.g(x, t + h) - pen.g(x, t - h)) / (2 * h)
        np.testing.assert_allclose(pen.dg_dt(x, t), fd, rtol=1e-6, atol=1e-9)


def test_smooth_cutoff_endpoints():
    assert smooth_cutoff(-1.0) == 1 and smooth_cutoff(0.0) == 1
    assert smooth_cutoff(1.0) == 0 and smooth_cutoff(0.5) == pytest.approx(0.5)


def test_bad_penalization_parameters():
    s = Constant(0.5)
    with pytest.raises(ValueError):
        PenalizedNonlinearity(s, (0, 0), 1.0, r_inner=1.2, mu=1.0)
    with pytest.raises(ValueError):
        PenalizedNonlinearity(s, (0, 0), 1.0, nu=0.5, mu=1.0)


# -- elementary inequalities ---------------------------------------------------

def test_decre_iii_spot_values():
    assert decre_iii(1.0, 1.0) == pytest.approx(1 - np.log(2), rel=1e-14)
    assert decre_iii(1.0, 2.0) == pytest.approx(0.5 - np.log(3) / 4, rel=1e-14)
    assert decre_iii(1.0, 1.0) > decre_iii(1.0, 2.0)


@settings(max_examples=200)
@given(st.floats(0.0, 50.0), st.floats(0.01, 10.0), st.floats(1e-3, 5.0))
def test_decre_iii_decreasing(L, s, ds):
    assert decre_iii(L, s + ds) <= decre_iii(L, s) + 1e-15 * (1 + L * L)


@given(pos, st.floats(0, 100))
def test_nonquadraticity_closed_form(s, t):
    direct = f_saturable(s, t) * t - 2 * F_primitive(s, t)
    nq = nonquadraticity(s, t)
    assert nq >= 0
    assert nq == pytest.approx(direct, rel=1e-7, abs=1e-10 * (1 + t ** 4))


def test_decre_i_and_ii_bounds():
    t = np.linspace(-50, 50, 20001)
    for q in (2, 3, 4):
        ratio = decre_i(t[t != 0]) / np.abs(t[t != 0]) ** q
        assert np.isfinite(ratio).all() and ratio.max() <= 1.0
    tp = t[t >= 0]
    for s in (0.1, 1.0, 7.0):
        assert np.all(decre_ii(s, tp) <= tp / s + 1e-12)
