import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from superadiabatic.fock import (
    FockSector,
    LadderPoly,
    annihilation,
    creation,
    dense,
    half_space,
    ladder_map,
    number_operator,
    position_twist,
)
from superadiabatic.lattice import TorusLattice


def jw_annihilation(m, n_modes):
    """Brute-force tensor-product oracle: a_m = Z x ... x Z x sigma^- x 1 ...

    Mode 0 is the least significant bit of the basis index.
    """
    Z = np.diag([1.0, -1.0])
    lower = np.array([[0.0, 1.0], [0.0, 0.0]])  # |0><1|
    out = np.ones((1, 1))
    for k in reversed(range(n_modes)):  # most significant first in kron order
        f = Z if k < m else (lower if k == m else np.eye(2))
        out = np.kron(out, f)
    return out


def full(M=2, l=1, d=1):
    return FockSector(TorusLattice(d, M), l, None)


def test_car_single_site():
    sec = FockSector(TorusLattice(1, 2), 1, None)
    a, ad = dense(annihilation(0, sec)), dense(creation(0, sec))
    assert np.allclose(a @ ad + ad @ a, np.eye(sec.dim))


def test_pauli_exclusion():
    sec = full(2)
    state = np.zeros(4)
    state[0b11] = 1
    op = dense(ladder_map({(0, 1): 1.0}, sec))
    assert np.allclose(op @ state, 0)


def test_hop_signs_two_modes():
    sec = full(2)
    e = np.eye(4)
    # a*_1 a_0 |mode 0 occupied> = +|mode 1 occupied>
    assert np.allclose(dense(ladder_map({(1, 0): 1.0}, sec)) @ e[0b01], e[0b10])
    assert np.allclose(dense(ladder_map({(0, 1): 1.0}, sec)) @ e[0b10], e[0b01])


@pytest.mark.parametrize("n_modes", [2, 3, 4])
def test_ladder_matches_jordan_wigner_oracle(n_modes):
    sec = FockSector(TorusLattice(1, n_modes), 1, None)
    for m in range(n_modes):
        assert np.allclose(dense(annihilation(m, sec)), jw_annihilation(m, n_modes))
        assert np.allclose(dense(creation(m, sec)), jw_annihilation(m, n_modes).T)


def test_car_all_mode_pairs():
    sec = FockSector(TorusLattice(2, 2), 2, None)  # 8 modes
    n = sec.n_modes
    a = [dense(annihilation(m, sec)) for m in range(n)]
    ad = [x.conj().T for x in a]
    one = np.eye(sec.dim)
    for i, j in itertools.product(range(n), repeat=2):
        assert np.allclose(a[i] @ ad[j] + ad[j] @ a[i], one * (i == j))
        assert np.allclose(a[i] @ a[j] + a[j] @ a[i], 0)


def test_sector_matrix_is_restriction_of_full_space(rng):
    lat = TorusLattice(1, 5)
    full_sec = FockSector(lat, 1, None)
    sec = FockSector(lat, 1, 2)
    poly = LadderPoly()
    for _ in range(6):
        m, n = rng.integers(0, 5, 2)
        poly = poly + LadderPoly.hop(int(m), int(n), complex(*rng.normal(size=2)))
    quartic = LadderPoly.density(0) * LadderPoly.density(3)
    poly = poly + quartic
    big = dense(poly.matrix(full_sec))
    idx = np.searchsorted(full_sec.states, sec.states)
    assert np.allclose(big[np.ix_(idx, idx)], dense(poly.matrix(sec)))


def test_number_operator_examples():
    lat = TorusLattice(1, 4)
    sec = FockSector(lat, 1, 3)
    everything = [lat.site(i) for i in range(lat.n_sites)]
    assert np.allclose(dense(number_operator(everything, sec)), 3 * np.eye(sec.dim))
    assert np.allclose(dense(number_operator([], sec)), 0)
    sec1 = FockSector(lat, 1, 1)
    left = half_space(lat, 0)
    assert np.allclose(np.diag(dense(number_operator(left, sec1))).real, [1, 1, 0, 0])


def test_position_twist_examples():
    lat = TorusLattice(1, 4)
    sec = FockSector(lat, 1, 1)
    Q, tw = position_twist((0,), [0.0], sec)
    assert np.allclose(np.diag(dense(Q[0])).real, [-1, 0, 1, 2])
    assert np.allclose(dense(tw), np.eye(4))
    _, tp = position_twist((0,), [0.37], sec)
    _, tm = position_twist((0,), [-0.37], sec)
    assert np.allclose(dense(tp) @ dense(tm), np.eye(4), atol=1e-14)


def test_number_violation_rejected():
    sec = FockSector(TorusLattice(1, 3), 1, 1)
    with pytest.raises(ValueError):
        LadderPoly({((0, True),): 1.0}).matrix(sec)


def test_single_ladder_needs_full_space():
    with pytest.raises(ValueError):
        annihilation(0, FockSector(TorusLattice(1, 2), 1, 1))


def test_too_many_modes_for_full_space():
    with pytest.raises(ValueError):
        FockSector(TorusLattice(1, 26), 1, None)


@given(st.integers(2, 6), st.data())
def test_sector_dimension_and_hermiticity(n, data):
    N = data.draw(st.integers(0, n))
    lat = TorusLattice(1, n)
    sec = FockSector(lat, 1, N)
    from math import comb

    assert sec.dim == comb(n, N)
    m1, m2 = data.draw(st.integers(0, n - 1)), data.draw(st.integers(0, n - 1))
    c = complex(data.draw(st.floats(-2, 2)), data.draw(st.floats(-2, 2)))
    poly = LadderPoly.hop(m1, m2, c) + LadderPoly.hop(m2, m1, np.conj(c))
    H = dense(poly.matrix(sec))
    assert np.allclose(H, H.conj().T)


@given(st.integers(1, 4), st.data())
def test_adjoint_matches_conjugate_transpose(n_terms, data):
    sec = FockSector(TorusLattice(1, 4), 1, None)
    poly = LadderPoly()
    for _ in range(n_terms):
        k = data.draw(st.integers(1, 3))
        ops = tuple((data.draw(st.integers(0, 3)), data.draw(st.booleans())) for _ in range(k))
        poly = poly + LadderPoly({ops: complex(data.draw(st.floats(-1, 1)), data.draw(st.floats(-1, 1)))})
    assert np.allclose(dense(poly.adjoint().matrix(sec)), dense(poly.matrix(sec)).conj().T)
