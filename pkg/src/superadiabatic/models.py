"""Reference models used by the tests, demos and the experiment runner."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .fock import LadderPoly
from .interaction import (
    Interaction,
    LinearPath,
    TimeDependentInteraction,
    build_tvw,
)
from .lattice import TorusLattice
from .propagate import Schedule, schedule_eval


def composed(F: Callable, dF: Callable, ddF: Callable, schedule: Schedule = Schedule("flat"), duration: float = 1.0):
    """Coefficient c(t) = F(f(t / duration)) with its first two derivatives."""

    def c(t, order=0):
        f, f1, f2 = schedule_eval(t / duration, schedule)
        f1, f2 = f1 / duration, f2 / duration**2
        if order == 0:
            return float(F(f))
        if order == 1:
            return float(dF(f) * f1)
        return float(ddF(f) * f1**2 + dF(f) * f2)

    return c


def two_level_path(theta_max: float = np.pi / 2, schedule: Schedule = Schedule("flat"), phase: float = 0.0):
    """H(t) = [[cos th, e^{-i phase} sin th], [e^{i phase} sin th, -cos th]], th = theta_max f(t)."""
    sz = np.diag([1.0, -1.0]).astype(complex)
    sx = np.array([[0, np.exp(-1j * phase)], [np.exp(1j * phase), 0]])
    cos_c = composed(lambda f: np.cos(theta_max * f), lambda f: -theta_max * np.sin(theta_max * f),
                     lambda f: -theta_max**2 * np.cos(theta_max * f), schedule)
    sin_c = composed(lambda f: np.sin(theta_max * f), lambda f: theta_max * np.cos(theta_max * f),
                     lambda f: -theta_max**2 * np.sin(theta_max * f), schedule)
    return LinearPath([cos_c, sin_c], [sz, sx])


def _stagger(x) -> float:
    return float((-1) ** (int(np.sum(x)) % 2))


def bond_hopping(lattice: TorusLattice, x, y, c: complex = 1.0, internal: int = 0, internal_dim: int = 1) -> Interaction:
    """Single bond term c a*_x a_y + h.c."""
    phi = Interaction(lattice, internal_dim)
    m = lattice.index(x) * internal_dim + internal
    n = lattice.index(y) * internal_dim + internal
    phi.add([x, y], LadderPoly.hop(m, n, c) + LadderPoly.hop(n, m, np.conj(c)))
    return phi


def chain_components(M: int, flux: float = 0.0):
    """Uniform hopping, dimerized hopping and staggered potential on a ring.

    Returns ``(lattice, hop, dimer, stagger)`` with
    hop = -sum (u a*_x a_{x+1} + h.c.), dimer = -sum (-1)^x (u a*_x a_{x+1} + h.c.)
    and stagger = sum (-1)^x n_x, where u = exp(i flux / M) threads a total
    flux ``flux`` through the ring (breaking time reversal unless it is 0 or pi).
    """
    if M % 2:
        raise ValueError("staggered chains need an even number of sites")
    lat = TorusLattice(1, M)
    u = np.exp(1j * flux / M)
    hop = build_tvw(lat, {1: -u, -1: -np.conj(u)}) if flux else build_tvw(lat, {1: -1.0, -1: -1.0})
    dimer = Interaction(lat)
    for x in range(lat.lo, lat.hi + 1):
        y = lat.add((x,), (1,))
        dimer = dimer + bond_hopping(lat, (x,), y, -_stagger((x,)) * u)
    stagger = build_tvw(lat, potential=lambda x: _stagger(x))
    return lat, hop, dimer, stagger


def driven_chain(
    M: int,
    gap: float = 1.0,
    dimer_drive: float = 0.4,
    stagger_drive: float = 0.5,
    U: float = 0.0,
    schedule: Schedule = Schedule("flat"),
    flux: float = 0.0,
    scale: float = 1.0,
) -> TimeDependentInteraction:
    """Staggered-gap chain ramped by a switching schedule on [0, 1].

    H(t) = scale * (hop + gap * stagger + U * sum n_x n_{x+1}
                    + f(t) (dimer_drive * dimer + stagger_drive * stagger))

    A nonzero ``flux`` makes the hoppings complex (see :func:`chain_components`).
    ``scale`` sets the energy unit; multiplying H by ``scale`` is equivalent to
    dividing the adiabatic parameter by it.
    """
    lat, hop, dimer, stagger = chain_components(M, flux)
    base = hop + gap * stagger
    if U:
        base = base + build_tvw(lat, pair={1: U})
    drive = dimer_drive * dimer + stagger_drive * stagger
    return TimeDependentInteraction.from_components(
        [(scale, base), (schedule.coefficient(amplitude=scale), drive)]
    )


def rice_mele(
    M: int,
    delta0: float = 0.5,
    Delta0: float = 1.0,
    phase0: float = 0.0,
    sweep: float = np.pi,
    schedule: Schedule = Schedule("flat"),
    flux: float = 0.0,
    scale: float = 1.0,
) -> TimeDependentInteraction:
    """Pump chain scale * (hop + delta(t) dimer + Delta(t) stagger).

    (delta, Delta) = (delta0 cos phi, Delta0 sin phi) with
    phi(t) = phase0 + sweep f(t).  The Hamiltonian is real at every time
    unless a ``flux`` is threaded through the ring.
    """
    lat, hop, dimer, stagger = chain_components(M, flux)
    d0, D0 = scale * delta0, scale * Delta0
    cos_c = composed(lambda f: d0 * np.cos(phase0 + sweep * f), lambda f: -d0 * sweep * np.sin(phase0 + sweep * f),
                     lambda f: -d0 * sweep**2 * np.cos(phase0 + sweep * f), schedule)
    sin_c = composed(lambda f: D0 * np.sin(phase0 + sweep * f), lambda f: D0 * sweep * np.cos(phase0 + sweep * f),
                     lambda f: -D0 * sweep**2 * np.sin(phase0 + sweep * f), schedule)
    return TimeDependentInteraction.from_components([(scale, hop), (cos_c, dimer), (sin_c, stagger)])


def rice_mele_static(M: int, phi: float, delta0: float = 0.5, Delta0: float = 1.0, flux: float = 0.0) -> Interaction:
    """Rice-Mele chain frozen at pump phase ``phi``."""
    _, hop, dimer, stagger = chain_components(M, flux)
    return hop + delta0 * np.cos(phi) * dimer + Delta0 * np.sin(phi) * stagger


def qwz(M: int, mass: float = -1.0, U: float = 0.0, hop: float = 1.0, disorder: float = 0.0, seed: int = 0) -> Interaction:
    """Two-orbital Chern insulator on the M x M torus with density repulsion U.

    T(e_1) = hop (s_z - i s_x)/2, T(e_2) = hop (s_z - i s_y)/2 and on-site
    mass * s_z; nearest-neighbour interaction U n_x n_y.  A nonzero
    ``disorder`` adds a seeded on-site potential uniform in [-disorder,
    disorder], which lifts the momentum degeneracies of small tori.
    """
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]])
    sz = np.diag([1.0, -1.0]).astype(complex)
    T1 = hop * (sz - 1j * sx) / 2
    T2 = hop * (sz - 1j * sy) / 2
    table = {(1, 0): T1, (-1, 0): T1.conj().T, (0, 1): T2, (0, -1): T2.conj().T}
    lat = TorusLattice(2, M)
    pair = {1: U * np.ones((2, 2))} if U else None
    rng = np.random.default_rng(seed)
    w = {lat.site(i): rng.uniform(-disorder, disorder) for i in range(lat.n_sites)} if disorder else {}
    return build_tvw(
        lat, table, potential=lambda x: mass * sz + w.get(tuple(x), 0.0) * np.eye(2), pair=pair, internal_dim=2
    )
