"""Acceptance criteria 1-11, each printing one PASS/FAIL line.

Criteria that need a complex Hamiltonian use a flux through the ring and
a complex bond observable; with a real Hamiltonian and a real observable the
leading error terms cancel by time reversal and only every other order in
eps survives (see the decisions ledger).  ``scale`` multiplies the
Hamiltonian, which is equivalent to running at eps / scale.
"""

import math
import time

import numpy as np
import pytest

from superadiabatic.adiabatic import AdiabaticFamily, defect, first_order_blocks
from superadiabatic.bounds import lr_check, norm_volume_check
from superadiabatic.fock import FockSector
from superadiabatic.interaction import assemble, build_tvw
from superadiabatic.lattice import LocalizationPlane, TorusLattice
from superadiabatic.models import bond_hopping, chain_components, driven_chain, qwz, rice_mele, two_level_path
from superadiabatic.propagate import adiabatic_errors, composite_evolutions, intertwining_error
from superadiabatic.response import TwistGrid, TwistedFamily, chern_number, response_series
from superadiabatic.spectral import eig_cluster, inverse_liouvillian, liouvillian, reduced_resolvent, split_od

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail, elapsed=None, limit=None):
        within = elapsed is None or limit is None or elapsed < limit
        status = "PASS" if ok and within else "FAIL"
        timing = "" if elapsed is None else f" [{elapsed:.1f} s / {limit:.0f} s]"
        with capsys.disabled():
            print(f"\nacceptance {number}: {status} {detail}{timing}", flush=True)
        return ok and within

    return emit


def ratios(values):
    return [values[i] / values[i + 1] for i in range(len(values) - 1)]


def in_range(rs, lo, hi):
    return all(lo <= r <= hi for r in rs)


# --------------------------------------------------------------------------
# shared setup for criteria 3-5: staggered-gap chain with flux pi/2


CHAIN_SCALE = 7.0
CHAIN_EPS = (0.2, 0.1, 0.05)
CHAIN_GRID = np.linspace(0.0, 1.0, 41)


def chain_setup(M):
    tdi = driven_chain(M, dimer_drive=0.8, stagger_drive=0.0, flux=np.pi / 2, scale=CHAIN_SCALE)
    sec = FockSector(tdi.lattice, 1, M // 2)
    fam = AdiabaticFamily(tdi.path(sec))
    B = assemble(bond_hopping(tdi.lattice, (0,), (1,), np.exp(1j * np.pi / 4)), sec)
    return fam, B


def chain_errors(M, eps):
    fam, B = chain_setup(M)
    e0, e1 = adiabatic_errors(fam, B, eps / CHAIN_SCALE, CHAIN_GRID, tol=1e-10, method="cfm4")
    return e0.max(), e1.max()


@pytest.fixture(scope="module")
def chain_sweep():
    t0 = time.process_time()
    errs = [chain_errors(6, eps) for eps in CHAIN_EPS]
    return errs, time.process_time() - t0


# --------------------------------------------------------------------------


def test_1_liouvillian_inversion(report):
    t0 = time.process_time()
    rng = np.random.default_rng(2024)
    worst_inv, worst_diag = 0.0, 0.0
    for _ in range(20):
        dim = int(rng.integers(16, 65))
        n_low = int(rng.integers(1, 4))
        low = np.sort(rng.uniform(-0.2, 0.2, n_low))
        high = low.max() + 0.5 + rng.uniform(0, 3, dim - n_low)
        X = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        Q, _ = np.linalg.qr(X)
        H = (Q * np.concatenate([low, high])) @ Q.conj().T
        sd = eig_cluster(H, ("window", -0.25, 0.25), eta=1e-12)
        assert len(sd.cluster) == n_low and sd.gap >= 0.5 - 1e-12
        A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        _, Bod = split_od(A, sd.P)
        for mode in ("exact", "filter"):
            X = inverse_liouvillian(sd, Bod, mode)
            worst_inv = max(worst_inv, np.linalg.norm(liouvillian(H, X) - Bod, 2) / np.linalg.norm(Bod, 2))
            Y = inverse_liouvillian(sd, A, mode)
            worst_diag = max(worst_diag, np.linalg.norm(sd.P @ Y @ sd.P, 2))
    elapsed = time.process_time() - t0
    ok = worst_inv <= 1e-10 and worst_diag <= 1e-10
    assert report(1, ok, f"inversion residual {worst_inv:.2e}, diagonal block {worst_diag:.2e}", elapsed, 5)


def test_2_intertwining(report):
    t0 = time.process_time()
    tol = 1e-8
    grid = np.linspace(0, 1, 11)
    eps = 0.1
    worst = {}
    tdi = driven_chain(6)
    sec = FockSector(tdi.lattice, 1, 3)
    for name, path in (("two-level", two_level_path()), ("M=6 chain", tdi.path(sec))):
        fam = AdiabaticFamily(path)
        props = composite_evolutions(fam, eps, grid, tol, "cfm4", which=("U_par", "U_a", "U_sa"))
        P = [fam.data(t).P for t in grid]
        Psa = [fam.P_sa(t, eps) for t in grid]
        worst[name] = (
            intertwining_error(props["U_par"], P),
            intertwining_error(props["U_a"], P),
            intertwining_error(props["U_sa"], Psa),
        )
    elapsed = time.process_time() - t0
    top = max(max(v) for v in worst.values())
    detail = ", ".join(f"{k}: par {a:.1e} a {b:.1e} sa {c:.1e}" for k, (a, b, c) in worst.items())
    assert report(2, top <= 10 * tol, detail, elapsed, 60)


def test_3_leading_order_scaling(report, chain_sweep):
    errs, elapsed = chain_sweep
    rs = ratios([e[0] for e in errs])
    assert report(3, in_range(rs, 1.6, 2.4), f"err0 ratios {rs[0]:.3f}, {rs[1]:.3f}", elapsed, 600)


def test_4_first_order_scaling(report, chain_sweep):
    errs, elapsed = chain_sweep
    rs = ratios([e[1] for e in errs])
    assert report(4, in_range(rs, 3.2, 4.8), f"err1 ratios {rs[0]:.3f}, {rs[1]:.3f}", elapsed, 600)


def test_5_volume_uniformity(report, chain_sweep):
    errs, _ = chain_sweep
    t0 = time.process_time()
    e6 = errs[1][0]  # eps = 0.1 at M = 6
    e8 = chain_errors(8, 0.1)[0]
    elapsed = time.process_time() - t0
    assert report(5, e8 <= 1.5 * e6, f"err0(M=8)/err0(M=6) = {e8 / e6:.3f}", elapsed, 1200)


def test_6_superadiabatic_defect(report):
    t0 = time.process_time()
    grid = np.linspace(0.05, 0.95, 19)
    tdi = driven_chain(4)
    models = {
        "two-level": AdiabaticFamily(two_level_path()),
        "M=4 chain": AdiabaticFamily(tdi.path(FockSector(tdi.lattice, 1, 2))),
    }
    out = {name: ratios([defect(fam, eps, grid).max() for eps in (0.2, 0.1, 0.05)]) for name, fam in models.items()}
    elapsed = time.process_time() - t0
    ok = all(in_range(r, 5.5, 11) for r in out.values())
    detail = ", ".join(f"{k}: {r[0]:.2f}, {r[1]:.2f}" for k, r in out.items())
    assert report(6, ok, detail, elapsed, 300)


def test_7_response_identities(report):
    t0 = time.process_time()
    scale = 16.0
    tdi = rice_mele(6, flux=np.pi / 2, scale=scale)
    fam = TwistedFamily.from_interaction(tdi, FockSector(tdi.lattice, 1, 3))
    grid = np.linspace(0, 1, 21)
    disc, f12, es = [], 0.0, 0.0
    for eps in (0.2, 0.1, 0.05):
        recs = response_series(fam, eps / scale, grid, tol=1e-7)
        disc.append(max(r.discrepancy for r in recs))
        f12 = max(f12, max(np.abs(r.f1 - r.f2).max() for r in recs))
        es = max(es, max(np.abs(r.diagnostics["eigensum"] - r.f1).max() for r in recs))
    elapsed = time.process_time() - t0
    rs = ratios(disc)
    ok = f12 <= 1e-9 and es <= 1e-9 and in_range(rs, 1.5, 2.5)
    detail = f"|f1-f2| {f12:.1e}, |eigensum-f1| {es:.1e}, discrepancy ratios {rs[0]:.3f}, {rs[1]:.3f}"
    assert report(7, ok, detail, elapsed, 600)


def test_8_chern_integrality(report):
    t0 = time.process_time()
    phi = qwz(3, U=0.5, disorder=1.0)
    fam = TwistedFamily.from_interaction(phi, FockSector(phi.lattice, 2, 2), "beta")
    C24, _ = chern_number(TwistGrid.build(fam.static(0.0), 24))
    C48, _ = chern_number(TwistGrid.build(fam.static(0.0), 48))
    elapsed = time.process_time() - t0
    ok = abs(C24 - round(C24)) <= 1e-6 and round(C24) == round(C48) and abs(C48 - round(C48)) <= 1e-6
    assert report(8, ok, f"C(24) = {C24:.2e}, C(48) = {C48:.2e}", elapsed, 900)


def test_9_lieb_robinson(report):
    t0 = time.process_time()
    lat, hop, _, stagger = chain_components(8)
    phi = hop + 0.5 * stagger + build_tvw(lat, pair={1: 1.0})
    times = [0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0]
    pairs = [
        ([(0,)], [(y,)]) for y in (1, 2, 3, 4)
    ] + [
        ([(-3,)], [(y,)]) for y in (-1, 0, 1, 2, 4)
    ] + [
        ([(0,), (1,)], [(y,)]) for y in (3, 4, -2)
    ] + [
        ([(-3,), (-2,)], [(2,), (3,)]),
        ([(0,)], [(2,), (3,), (4,)]),
    ]
    samples = []
    for X, Y in pairs:
        samples += lr_check(phi, X, Y, times).samples
    elapsed = time.process_time() - t0
    margin = min(s.margin for s in samples)
    ok = len(samples) >= 100 and margin >= -1e-9
    assert report(9, ok, f"{len(samples)} samples, min margin {margin:.3e}", elapsed, 600)


def test_10_expansion_consistency(report):
    t0 = time.process_time()
    tdi = driven_chain(6, flux=np.pi / 2)
    sec = FockSector(tdi.lattice, 1, 3)
    fam = AdiabaticFamily(tdi.path(sec))
    c1, c2 = 0.0, 0.0
    for t in (0.25, 0.5, 0.75):
        d, ex = fam.data(t), fam.expansion(t)
        P = d.P
        c1 = max(c1, np.linalg.norm((ex.K1 @ P - P @ ex.K1) - (d.Kpar @ P - P @ d.Kpar), 2))
        A1t, K2t = first_order_blocks(d.sd, d.Pdot)
        HE = d.H - d.sd.E_star * np.eye(d.H.shape[0])
        inner = A1t @ HE - HE @ A1t
        alt = -0.5 * P @ (A1t @ inner - inner @ A1t) @ P
        c2 = max(c2, np.linalg.norm(K2t - alt, 2))
    elapsed = time.process_time() - t0
    assert report("10 (K1 and K2 parts)", c1 <= 1e-10 and c2 <= 1e-9, f"[K1,P] {c1:.1e}, K2 {c2:.1e}", elapsed, 60)


@pytest.mark.xfail(strict=True, reason="the stated resolvent form of A1_tilde has the opposite overall sign")
def test_10_resolvent_form_as_stated(report):
    tdi = driven_chain(6, flux=np.pi / 2)
    sec = FockSector(tdi.lattice, 1, 3)
    fam = AdiabaticFamily(tdi.path(sec))
    d = fam.data(0.5)
    A1t, _ = first_order_blocks(d.sd, d.Pdot)
    R = reduced_resolvent(d.sd)
    _, Hod = split_od(d.Hdot, d.P)
    stated = R @ R @ Hod + Hod @ R @ R
    dev = np.linalg.norm(A1t - stated, 2)
    flipped = np.linalg.norm(A1t + stated, 2)
    ok = report("10 (resolvent form)", dev <= 1e-10, f"deviation {dev:.2e} (with opposite sign {flipped:.1e})")
    assert ok


def test_11_norm_volume(report):
    t0 = time.process_time()
    Ms = [4, 6, 8, 10]

    def chain(M):
        return chain_components(M)[1]

    def interacting_chain(M):
        lat, hop, _, stagger = chain_components(M)
        return hop + 0.5 * stagger + build_tvw(lat, pair={1: 1.0})

    def square(M):
        lat = TorusLattice(2, M)
        return build_tvw(lat, {(1, 0): -1.0, (-1, 0): -1.0, (0, 1): -1.0, (0, -1): -1.0})

    def line_potential(M):
        return build_tvw(TorusLattice(2, M), potential=lambda x: math.exp(-5 * abs(x[1])))

    cases = {
        "chain": norm_volume_check(chain, Ms),
        "interacting chain": norm_volume_check(interacting_chain, Ms),
        "square": norm_volume_check(square, Ms),
        "line potential": norm_volume_check(line_potential, Ms, plane=LocalizationPlane((0, 1), (0, 0))),
    }
    elapsed = time.process_time() - t0
    # bounded by one constant: no growth beyond the smallest size
    ok = all(rep.max_ratio <= 1.5 * rep.ratios[0] and rep.max_ratio < 1.0 for rep in cases.values())
    detail = ", ".join(f"{k}: max {r.max_ratio:.3f} (M^{r.exponent})" for k, r in cases.items())
    assert report(11, ok, detail, elapsed, 120)
