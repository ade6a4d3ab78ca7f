import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from superadiabatic.bounds import (
    lr_check,
    lr_rhs,
    lr_velocity,
    norm_volume_check,
    operator_norm,
    phi_boundary,
)
from superadiabatic.fock import FockSector
from superadiabatic.interaction import Interaction, assemble, build_tvw, interaction_norm
from superadiabatic.fock import dense
from superadiabatic.lattice import DecayFunction, LocalizationPlane, TorusLattice, norm_F_Gamma
from superadiabatic.models import chain_components


def free_chain(M):
    return chain_components(M)[1]


def test_velocity_formula():
    phi = free_chain(6)
    for a in (0.5, 1.0, 2.0):
        nphi = interaction_norm(phi, DecayFunction.exponential(a), 0)
        assert lr_velocity(phi, a) == pytest.approx(16 * norm_F_Gamma(1) * nphi / a)


def test_velocity_for_unit_norm():
    # v / ||Phi|| = 2^{2d+2} ||F||_Gamma / a in one dimension
    phi = free_chain(6)
    nphi = interaction_norm(phi, DecayFunction.exponential(1.0), 0)
    assert lr_velocity(phi) / nphi == pytest.approx(36.638, abs=5e-3)


@given(st.floats(0.1, 10.0))
def test_velocity_homogeneous(c):
    phi = free_chain(4)
    assert lr_velocity(c * phi) == pytest.approx(c * lr_velocity(phi), rel=1e-12)


def test_velocity_zero_interaction():
    assert lr_velocity(Interaction(TorusLattice(1, 4))) == 0.0
    with pytest.raises(ValueError):
        lr_velocity(free_chain(4), a=0)


def test_boundary_of_region():
    phi = free_chain(6)
    lat = phi.lattice
    X = [lat.index((0,)), lat.index((1,))]
    assert phi_boundary(phi, X) == set(X)
    assert phi_boundary(phi, range(lat.n_sites)) == set()


def test_rhs_vanishes_at_zero_time_and_decays_in_distance():
    z = DecayFunction.exponential(1.0)
    F = norm_F_Gamma(1)
    assert lr_rhs(1, 1, 0.0, 1, 2.0, F, 1, 1, 3, z) == 0.0
    vals = [lr_rhs(1, 1, 0.1, 1, 2.0, F, 1, 1, r, z) for r in range(1, 6)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert math.isinf(lr_rhs(1, 1, 1e3, 1, 2.0, F, 1, 1, 3, z))


def test_bound_holds_on_free_chain():
    phi = free_chain(8)
    rep = lr_check(phi, [(-3,)], [(2,)], [0.0, 0.01, 0.05, 0.1, 0.5, 2.0])
    assert rep.samples[0].lhs == pytest.approx(0.0, abs=1e-12)
    assert rep.holds
    assert len(rep) == 6
    assert all(s.rhs_exact <= s.rhs * (1 + 1e-12) or math.isinf(s.rhs) for s in rep.samples)


def test_bound_holds_with_interactions():
    lat, hop, _, stagger = chain_components(6)
    phi = hop + 0.5 * stagger + build_tvw(lat, pair={1: 1.0})
    rep = lr_check(phi, [(0,)], [(3,)], np.linspace(0, 0.3, 7))
    assert rep.holds


def test_overlapping_supports_rejected():
    phi = free_chain(4)
    with pytest.raises(ValueError):
        lr_check(phi, [(0,)], [(0,)], [0.1])


def test_operator_norm_one_body_matches_full_fock():
    lat, hop, _, stagger = chain_components(6)
    phi = hop + 0.3 * stagger
    full = np.abs(np.linalg.eigvalsh(dense(assemble(phi, FockSector(lat, 1, None))))).max()
    assert operator_norm(phi) == pytest.approx(full)


def test_norm_volume_ratio_bounded_on_chain():
    rep = norm_volume_check(free_chain, [4, 6, 8, 10])
    assert rep.exponent == 1
    assert max(rep.ratios) / min(rep.ratios) < 1.5
    assert rep.max_ratio < 1.0


def test_norm_volume_line_localized_potential():
    # a potential decaying away from the line x_2 = 0 has norm ~ M, not M^2
    def model(M):
        lat = TorusLattice(2, M)
        return build_tvw(lat, potential=lambda x: math.exp(-5 * abs(x[1])))

    plane = LocalizationPlane((0, 1), (0, 0))
    rep = norm_volume_check(model, [3, 5, 7], plane=plane)
    assert rep.exponent == 1
    assert max(rep.ratios) / min(rep.ratios) < 1.5


def test_norm_volume_plane_dimension_checked():
    with pytest.raises(ValueError):
        norm_volume_check(free_chain, [4], plane=LocalizationPlane((0, 1), (0, 0)))
