"""Lieb-Robinson velocity and bound checks, and norm-volume checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .fock import FockSector, dense
from .interaction import Interaction, assemble, interaction_norm
from .lattice import DecayFunction, LocalizationPlane, decay_weights, norm_F_Gamma


def lr_velocity(phi: Interaction, a: float = 1.0, F_gamma: Optional[float] = None) -> float:
    """v = 2^{2d+2} ||F||_Gamma ||Phi||_{a,0} / a."""
    if a <= 0:
        raise ValueError("decay rate must be positive")
    d = phi.lattice.d
    F_gamma = norm_F_Gamma(d) if F_gamma is None else F_gamma
    return 2 ** (2 * d + 2) * F_gamma * interaction_norm(phi, DecayFunction.exponential(a), 0) / a


def phi_boundary(phi: Interaction, X: Iterable[int]) -> set:
    """Sites of X lying in some nonzero term that also leaves X."""
    X = set(X)
    out = set()
    for key in phi.terms:
        if key & X and key - X:
            out |= key & X
    return out


@dataclass
class LRSample:
    t: float
    X: tuple
    Y: tuple
    lhs: float
    rhs: float
    rhs_exact: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


@dataclass
class LRReport:
    """Measured commutator norms against the Lieb-Robinson bound."""

    samples: list
    velocity: float
    a: float
    norm_phi: float
    F_gamma: float

    @property
    def min_margin(self) -> float:
        return min(s.margin for s in self.samples)

    @property
    def holds(self) -> bool:
        return self.min_margin >= -1e-9

    def __len__(self):
        return len(self.samples)


def lr_rhs(
    normA: float,
    normB: float,
    t: float,
    d: int,
    norm_phi: float,
    F_gamma: float,
    size_X: int,
    size_Y: int,
    dist_XY: int,
    zeta: DecayFunction,
) -> float:
    """Bound with the min{|X|, |Y|} zeta(d(X, Y)) simplification of the boundary sum."""
    return _prefactor(normA, normB, t, d, norm_phi, F_gamma) * F_gamma * min(size_X, size_Y) * float(zeta(dist_XY))


def _prefactor(normA, normB, t, d, norm_phi, F_gamma) -> float:
    rate = 2 ** (2 * d + 2) * F_gamma * norm_phi * abs(t)
    if normA * normB == 0 or rate == 0:
        return 0.0
    if rate > 700:  # beyond float range; the bound is trivially satisfied
        return math.inf
    return normA * normB * math.expm1(rate) / (2 ** (2 * d) * F_gamma)


def lr_check(
    phi: Interaction,
    A_sites: Sequence,
    B_sites: Sequence,
    times: Sequence[float],
    A=None,
    B=None,
    a: float = 1.0,
    sector: Optional[FockSector] = None,
) -> LRReport:
    """Compare ||[u_t(A), B]|| with the Lieb-Robinson bound for a static interaction.

    Parameters
    ----------
    phi : Interaction
        Generates the dynamics u_t(A) = e^{itH} A e^{-itH} (unscaled, eps = 1).
    A_sites, B_sites : sequences of sites
        Disjoint supports X and Y.
    A, B : optional operators
        Defaults: the particle numbers on X and on Y.
    sector : FockSector, optional
        Default is the full Fock space, where A need only be even.
    """
    lat = phi.lattice
    X = sorted(lat.index(x) for x in A_sites)
    Y = sorted(lat.index(y) for y in B_sites)
    if set(X) & set(Y):
        raise ValueError("supports of A and B must be disjoint")
    sector = sector or FockSector(lat, phi.internal_dim, None)
    if A is None:
        A = _number(X, sector)
    if B is None:
        B = _number(Y, sector)
    A, B = dense(A), dense(B)
    H = dense(assemble(phi, sector))
    w, v = np.linalg.eigh(H)
    zeta = DecayFunction.exponential(a)
    F_gamma = norm_F_Gamma(lat.d)
    nphi = interaction_norm(phi, zeta, 0)
    normA, normB = np.linalg.norm(A, 2), np.linalg.norm(B, 2)
    D = lat.distance_matrix()
    dXY = int(D[np.ix_(X, Y)].min())
    bd = sorted(phi_boundary(phi, X))
    _, Fz = decay_weights(D, lat.d, zeta)
    bsum = float(Fz[np.ix_(bd, Y)].sum()) if bd else 0.0
    Av, Bv = v.conj().T @ A @ v, v.conj().T @ B @ v
    samples = []
    for t in times:
        ph = np.exp(1j * w * t)
        At = (ph[:, None] * Av) * ph.conj()[None, :]  # eigenbasis of e^{itH} A e^{-itH}
        lhs = float(np.linalg.norm(At @ Bv - Bv @ At, 2))
        rhs = lr_rhs(normA, normB, t, lat.d, nphi, F_gamma, len(X), len(Y), dXY, zeta)
        pre = _prefactor(normA, normB, t, lat.d, nphi, F_gamma)
        exact = pre * bsum if bsum else 0.0
        samples.append(LRSample(float(t), tuple(X), tuple(Y), lhs, rhs, exact))
    v_lr = 2 ** (2 * lat.d + 2) * F_gamma * nphi / a
    return LRReport(samples, v_lr, a, nphi, F_gamma)


def _number(indices, sector: FockSector) -> np.ndarray:
    lat = sector.lattice
    from .fock import number_operator

    return dense(number_operator([lat.site(i) for i in indices], sector))


# ----------------------------------------------------------------------------
# norm-volume check


def _is_one_body(phi: Interaction) -> bool:
    return all(len(ops) == 2 and ops[0][1] and not ops[1][1] for _, p in phi.items() for ops in p.terms)


def operator_norm(phi: Interaction, max_modes: int = 14) -> float:
    """Exact norm of the assembled operator on the full Fock space.

    One-body interactions use the one-particle matrix h: the many-body
    spectrum consists of all subset sums of eig(h), so the norm is
    max(sum of positive, -sum of negative eigenvalues).  Otherwise the full
    Fock space is diagonalized (at most ``max_modes`` modes).
    """
    if not phi.terms:
        return 0.0
    n = phi.lattice.n_sites * phi.internal_dim
    if _is_one_body(phi):
        h = np.zeros((n, n), dtype=complex)
        for _, p in phi.items():
            for ops, c in p.terms.items():
                h[ops[0][0], ops[1][0]] += c
        e = np.linalg.eigvalsh(0.5 * (h + h.conj().T))
        return float(max(e[e > 0].sum(), -e[e < 0].sum()))
    if n > max_modes:
        raise ValueError(f"{n} modes exceed the full-Fock limit {max_modes} for interacting terms")
    sector = FockSector(phi.lattice, phi.internal_dim, None)
    return float(np.abs(np.linalg.eigvalsh(dense(assemble(phi, sector)))).max())


@dataclass
class NormVolumeReport:
    Ms: list
    norms: list
    phi_norms: list
    ratios: list
    exponent: int

    @property
    def max_ratio(self) -> float:
        return max(self.ratios)


def norm_volume_check(
    model: Callable[[int], Interaction],
    Ms: Sequence[int],
    zeta: Optional[DecayFunction] = None,
    plane: Optional[LocalizationPlane] = None,
) -> NormVolumeReport:
    """Table of ||A^Lambda|| / (||Phi||_{zeta,0,L} M^{d - |ell|}) over ``Ms``."""
    zeta = zeta or DecayFunction.exponential(1.0)
    norms, pn, ratios = [], [], []
    exponent = None
    for M in Ms:
        phi = model(M)
        d = phi.lattice.d
        pl = plane
        if pl is not None and len(pl.anchor) != d:
            raise ValueError("plane dimension does not match the lattice")
        exponent = d - (pl.n_constrained if pl is not None else 0)
        nA = operator_norm(phi)
        nphi = interaction_norm(phi, zeta, 0, pl)
        norms.append(nA)
        pn.append(nphi)
        ratios.append(0.0 if nphi == 0 else nA / (nphi * M**exponent))
    return NormVolumeReport(list(Ms), norms, pn, ratios, exponent)
