import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_gapped_hermitian, random_hermitian
from superadiabatic.adiabatic import AdiabaticFamily
from superadiabatic.fock import FockSector
from superadiabatic.models import qwz, rice_mele, rice_mele_static
from superadiabatic.propagate import Schedule
from superadiabatic.response import (
    TwistedFamily,
    TwistGrid,
    berry_current,
    berry_curvature,
    chern_number,
    current_density,
    eigensum_current,
    hall_experiment,
    persistent_current,
    projection_twist_derivatives,
    response_formulas,
    response_series,
    twist_ramp,
)
from superadiabatic.spectral import eig_cluster, projection_derivative


@pytest.fixture(scope="module")
def pump():
    tdi = rice_mele(4, flux=0.4)
    sec = FockSector(tdi.lattice, 1, 2)
    return TwistedFamily.from_interaction(tdi, sec)


def test_current_density_zero_current(rng):
    rho = np.diag([1.0, 0, 0])
    assert np.allclose(current_density(rho, [np.zeros((3, 3))]), 0)


def test_current_density_rejects_non_hermitian():
    with pytest.raises(ValueError):
        current_density(np.eye(2) / 2, [np.array([[0, 1], [0, 0]])])


def test_current_density_scaling(rng):
    J = random_hermitian(rng, 4)
    rho = np.eye(4) / 4
    a = current_density(rho, [J], eps=1.0, volume=1.0)
    b = current_density(rho, [J], eps=0.5, volume=4.0)
    assert np.allclose(b, a / 2)


def test_inversion_symmetric_chain_has_no_static_current():
    # a real Hamiltonian has a real ground state and hence zero current
    phi = rice_mele_static(4, 0.3)
    sec = FockSector(phi.lattice, 1, 2)
    fam = TwistedFamily.from_interaction(phi, sec)
    assert persistent_current(fam, [0.0]) < 1e-12


def test_twisted_derivative_matches_fd(pump):
    th, h = np.array([0.3]), 1e-5
    fd = (pump.H(0.4, th + h) - pump.H(0.4, th - h)) / (2 * h)
    assert np.linalg.norm(fd - pump.dtheta(0.4, th, 0), 2) < 1e-8


def test_response_forms_agree(pump):
    adf = AdiabaticFamily(pump.path())
    for t in (0.2, 0.5, 0.7):
        d = adf.data(t)
        J = pump.currents(t)
        dP = projection_twist_derivatives(pump, t, d.sd)
        f1, f2 = response_formulas(d.sd, d.Pdot, J, d.P, dP, pump.volume)
        es = eigensum_current(d.sd, d.Pdot, J, pump.volume)
        assert np.abs(f1 - f2).max() < 1e-9
        assert np.abs(es - f1).max() < 1e-9
        bc = berry_current(pump, t)
        assert np.abs(bc - f1).max() < 1e-8


def test_analytic_and_fd_twist_derivatives_agree(pump):
    a = projection_twist_derivatives(pump, 0.3)
    b = projection_twist_derivatives(pump, 0.3, method="fd", step=1e-3)
    assert np.linalg.norm(a[0] - b[0], 2) < 1e-7


def test_response_series_first_order(pump):
    grid = np.linspace(0, 1, 6)
    d = []
    for eps in (0.1, 0.05):
        recs = response_series(pump, eps, grid, tol=1e-9)
        assert recs[0].discrepancy < 1e-12  # flat start, no motion yet
        d.append(max(r.discrepancy for r in recs))
    assert d[1] < d[0]
    assert d[1] < 0.2 * max(abs(r.f1).max() for r in recs)


@given(st.integers(0, 2**31 - 1))
def test_real_family_has_no_curvature(seed):
    rng = np.random.default_rng(seed)
    H, Q, ev = random_gapped_hermitian(rng, 8)
    H = H.real
    X1, X2 = rng.normal(size=(2, 8, 8))
    sd = eig_cluster((H + H.T) / 2)
    dP1 = projection_derivative(sd, X1 + X1.T)
    dP2 = projection_derivative(sd, X2 + X2.T)
    assert abs(berry_curvature(sd, dP1, dP2)) < 1e-12


def test_curvature_antisymmetric(rng):
    H, _, _ = random_gapped_hermitian(rng, 6)
    sd = eig_cluster(H)
    dP1 = projection_derivative(sd, random_hermitian(rng, 6))
    dP2 = projection_derivative(sd, random_hermitian(rng, 6))
    assert abs(berry_curvature(sd, dP1, dP2) + berry_curvature(sd, dP2, dP1)) < 1e-12


def test_chern_of_constant_frame_vanishes():
    H = np.diag([0.0, 1.0, 2.0])
    C, fl = chern_number(TwistGrid.build(lambda th: H, 6))
    assert C == 0 and np.allclose(fl, 0)


def test_chern_independent_of_frame_phases():
    def H(th):
        d = np.array([np.sin(th[0]), np.sin(th[1]), 1.0 - np.cos(th[0]) - np.cos(th[1])])
        return d[0] * np.array([[0, 1], [1, 0]]) + d[1] * np.array([[0, -1j], [1j, 0]]) + d[2] * np.diag([1, -1])

    g = TwistGrid.build(H, 12)
    C, _ = chern_number(g)
    rng = np.random.default_rng(0)
    g.frames = g.frames * np.exp(2j * np.pi * rng.uniform(size=(12, 12, 1, 1)))
    C2, _ = chern_number(g)
    assert abs(round(C) - C) < 1e-10 and abs(C) == 1 and C2 == pytest.approx(C)


def test_chern_sign_matches_curvature_integral():
    # two-band model with analytic curvature; compare the lattice sum with a midpoint integral
    sx, sy, sz = np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])

    def d(th):
        return np.array([np.sin(th[0]), np.sin(th[1]), 1.0 - np.cos(th[0]) - np.cos(th[1])])

    H = lambda th: np.tensordot(d(th), [sx, sy, sz], 1)
    C, _ = chern_number(TwistGrid.build(H, 16))
    n = 40
    total = 0.0
    for i in range(n):
        for j in range(n):
            th = 2 * np.pi * (np.array([i, j]) + 0.5) / n
            sd = eig_cluster(H(th))
            e1 = np.array([np.cos(th[0]), 0, np.sin(th[0])])
            e2 = np.array([0, np.cos(th[1]), np.sin(th[1])])
            dP1 = projection_derivative(sd, np.tensordot(e1, [sx, sy, sz], 1))
            dP2 = projection_derivative(sd, np.tensordot(e2, [sx, sy, sz], 1))
            total += berry_curvature(sd, dP1, dP2)
    assert abs(total * (2 * np.pi / n) ** 2 / (2 * np.pi) - C) < 0.05


def test_chern_refinement_error_on_coarse_grid():
    H = lambda th: np.diag([np.cos(th[0]), -np.cos(th[0])])  # level crossing
    with pytest.raises(Exception):
        chern_number(TwistGrid.build(H, 4))


@pytest.mark.slow
def test_pump_chern_number_stable_under_refinement():
    M = 4
    tdi = rice_mele(M, sweep=2 * np.pi, schedule=Schedule("linear"))
    sec = FockSector(tdi.lattice, 1, M // 2)
    fam = TwistedFamily.from_interaction(tdi, sec)
    H = lambda th: fam.H(th[0] / (2 * np.pi), th[1:])
    C = [chern_number(TwistGrid.build(H, n))[0] for n in (12, 24)]
    assert abs(C[0] - C[1]) < 1e-9
    assert abs(abs(C[1]) / M - 1) < 1e-9


def test_twist_ramp_shape():
    r = twist_ramp(1.0)
    assert r(0.0) == 0.0 and r(-1.0) == 0.0
    assert r(2.0) - r(1.0) == pytest.approx(1.0)
    assert r(1.0) == pytest.approx(0.5, abs=1e-12)  # symmetric flat schedule
    h = 1e-6
    for s in (0.3, 0.7, 1.4):
        assert (r(s + h) - r(s - h)) / (2 * h) == pytest.approx(r(s, 1), abs=1e-7)
    assert r(3.0, 1) == 1.0 and r(3.0, 2) == 0.0


def test_hall_experiment_rejects_bad_input():
    phi = rice_mele_static(4, 0.3)
    sec = FockSector(phi.lattice, 1, 2)
    with pytest.raises(ValueError):
        hall_experiment(phi, sec, kind="nonsense")
    with pytest.raises(ValueError):
        hall_experiment(phi, sec)


@pytest.mark.slow
def test_hall_discrepancy_shrinks_with_rate():
    phi = qwz(3, U=0.5, disorder=2.0, seed=1)
    sec = FockSector(phi.lattice, 2, 1)
    d = [
        hall_experiment(phi, sec, "conductivity", rate=rate, s_grid=[1.0, 1.5, 2.0], tol=1e-8).discrepancy
        for rate in (0.1, 0.05)
    ]
    assert d[0] / d[1] > 2.0, d
