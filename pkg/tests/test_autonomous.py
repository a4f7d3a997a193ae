import json

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from saturable_spikes.autonomous import (
    RadialProfile, SolverOptions, frozen_energy, load_ground_state,
    nehari_functional, nehari_gap, nehari_project, pohozaev_value,
    save_ground_state, solve_ground_state, sphere_area)
from saturable_spikes.errors import NoProjection, NotInOmega


@pytest.fixture(scope="module")
def q_half():
    return solve_ground_state(0.5, 0.5, dim=2)


def test_reference_values(q_half):
    # frozen from a grid-halving (Richardson) run at 16384 / 32768 intervals
    assert q_half.amplitude == pytest.approx(1.90870994932, rel=1e-10)
    assert q_half.energy == pytest.approx(5.0473763, rel=1e-6)
    assert q_half.l2sq == pytest.approx(32.31693, rel=1e-5)


def _ivp_overshoots(a, v, s, n):
    """Independent shooting classification with scipy's DOP853."""
    def rhs(r, y):
        u, p = y
        return [p, -(n - 1) * p / r + v * u - u ** 3 / (1 + s * u * u)]

    def cross(r, y):
        return y[0]

    def turn(r, y):
        return y[1]

    cross.terminal = turn.terminal = True
    cross.direction = -1
    turn.direction = 1
    r0 = 1e-4
    c = (v * a - a ** 3 / (1 + s * a * a)) / (2 * n)
    sol = solve_ivp(rhs, (r0, 60.0), [a + c * r0 ** 2, 2 * c * r0],
                    method="DOP853", rtol=1e-13, atol=1e-15,
                    events=(cross, turn))
    return sol.t_events[0].size > 0


@pytest.mark.parametrize("v,s,n", [(0.5, 0.5, 2), (1.0, 0.5, 2), (0.5, 0.5, 3)])
def test_amplitude_brackets_with_independent_integrator(v, s, n):
    a = solve_ground_state(v, s, dim=n).amplitude
    assert _ivp_overshoots(a * (1 + 1e-7), v, s, n)
    assert not _ivp_overshoots(a * (1 - 1e-7), v, s, n)


@pytest.mark.parametrize("n", [2, 3])
def test_scaling_relation(n):
    # u(x) = s^{-1/2} w(x / sqrt(s)) maps the (kappa, s = 1) problem onto
    # (V, s) with kappa = V s
    v, s = 0.8, 0.6
    big = solve_ground_state(v, s, dim=n)
    ref = solve_ground_state(v * s, 1.0, dim=n)
    assert big.amplitude == pytest.approx(ref.amplitude / np.sqrt(s), rel=1e-10)
    assert big.energy == pytest.approx(s ** (n / 2 - 2) * ref.energy, rel=2e-6)
    assert big.l2sq == pytest.approx(s ** (n / 2 - 1) * ref.l2sq, rel=2e-6)


@pytest.mark.parametrize("v,s,n", [(0.5, 0.5, 2), (0.3, 1.2, 2), (0.5, 0.5, 3)])
def test_virial_and_nehari_identities(v, s, n):
    gs = solve_ground_state(v, s, dim=n)
    scale = gs.gradsq + gs.l2sq
    # Pohozaev + Nehari give I(Q) = |grad Q|^2 / N for ground states
    assert gs.energy == pytest.approx(gs.gradsq / n, rel=1e-6)
    assert abs(gs.nehari) < 1e-6 * scale
    assert gs.pohozaev_residual < 1e-6 * scale


def test_profile_shape(q_half):
    u = q_half.profile.u
    assert np.all(u > 0)
    assert np.all(np.diff(u) <= 0)
    assert u[-1] < 1e-8 * u[0]


def test_refinement_oracle(q_half):
    fine = solve_ground_state(0.5, 0.5, dim=2, opts=SolverOptions().refined(2))
    assert abs(fine.energy - q_half.energy) < 1e-6 * q_half.energy
    assert abs(fine.l2sq - q_half.l2sq) < 1e-6 * q_half.l2sq


def test_pohozaev_second_order():
    coarse = solve_ground_state(0.5, 0.5, 2, SolverOptions(n_grid=2048))
    fine = solve_ground_state(0.5, 0.5, 2, SolverOptions(n_grid=4096))
    assert coarse.pohozaev_residual / fine.pohozaev_residual >= 4.0


def test_outside_omega():
    with pytest.raises(NotInOmega, match=r"V s < 1"):
        solve_ground_state(1.0, 1.0)
    with pytest.raises(NotInOmega):
        solve_ground_state(2.0, 0.75)


def test_close_to_omega_boundary():
    gs = solve_ground_state(0.95, 1.0)
    assert gs.amplitude > 10 and gs.nehari < 1e-6 * (gs.gradsq + gs.l2sq)


def test_radial_quadrature_volume():
    r = np.linspace(0, 2.0, 4097)
    for n in (2, 3, 4):
        prof = RadialProfile(n, r, np.ones_like(r))
        ball = sphere_area(n) * 2.0 ** n / n
        assert prof.integrate(np.ones_like(r)) == pytest.approx(ball, rel=1e-6)


def test_gaussian_integrals():
    r = np.linspace(0, 12.0, 8193)
    prof = RadialProfile(2, r, np.exp(-r * r / 2))
    assert prof.l2sq() == pytest.approx(np.pi, rel=1e-6)
    # |grad u|^2 = r^2 e^{-r^2}, integral over R^2 is pi
    assert prof.gradsq() == pytest.approx(np.pi, rel=1e-5)


def test_nehari_projection_of_ground_state(q_half):
    assert nehari_project(q_half.profile, 0.5, 0.5) == pytest.approx(1.0,
                                                                     abs=1e-6)


def test_nehari_projection_lands_on_manifold(q_half):
    prof = q_half.profile
    trial = prof.with_values(np.exp(-(prof.r / 3.0) ** 2))
    gap = nehari_gap(trial, 0.5, 0.5)
    assert gap < 0
    th = nehari_project(trial, 0.5, 0.5)
    on = trial.with_values(th * trial.u)
    scale = on.gradsq() + on.l2sq()
    assert abs(nehari_functional(on, 0.5, 0.5)) < 1e-12 * scale
    assert frozen_energy(on, 0.5, 0.5) >= q_half.energy - 1e-6


def test_no_projection_for_steep_profiles(q_half):
    prof = q_half.profile
    steep = prof.with_values(np.exp(-(prof.r / 0.3) ** 2))
    assert nehari_gap(steep, 0.5, 0.5) > 0
    with pytest.raises(NoProjection):
        nehari_project(steep, 0.5, 0.5)
    with pytest.raises(NoProjection):
        nehari_project(prof.with_values(np.zeros_like(prof.u)), 0.5, 0.5)


def test_pohozaev_value_of_nonsolution(q_half):
    prof = q_half.profile
    assert pohozaev_value(prof.with_values(2 * prof.u), 0.5, 0.5) > 1.0


def test_save_load_round_trip(q_half, tmp_path):
    save_ground_state(q_half, tmp_path / "q.csv", tmp_path / "q.json")
    prof, meta = load_ground_state(tmp_path / "q.csv", tmp_path / "q.json")
    np.testing.assert_array_equal(prof.u, q_half.profile.u)
    np.testing.assert_array_equal(prof.r, q_half.profile.r)
    assert meta["energy"] == q_half.energy
    assert json.loads((tmp_path / "q.json").read_text())["schema_version"] == 1
