"""Interactions X -> Phi(X), Hamiltonian assembly, twists and norms.

Local terms are :class:`~superadiabatic.fock.LadderPoly` objects acting on the
modes of the sites in X.  Twisting by exp(-i theta . G) with G a sum of
densities multiplies every monomial by exp(-i theta . g), where g is the
charge (created minus annihilated) of the monomial under G.  Position twists,
half-space twists and current operators are all handled this way.
"""

from __future__ import annotations

import inspect
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import sparse

from .errors import ConfigurationError
from .fock import FockSector, LadderPoly, as_operator
from .lattice import DecayFunction, LocalizationPlane, TorusLattice, decay_weights


class Interaction:
    """Map from site subsets X to number-conserving local terms.

    Parameters
    ----------
    lattice : TorusLattice
    internal_dim : int
    terms : mapping
        ``{X: LadderPoly}`` where ``X`` is an iterable of site tuples or of
        linear site indices.
    """

    def __init__(self, lattice: TorusLattice, internal_dim: int = 1, terms: Optional[Mapping] = None):
        self.lattice = lattice
        self.internal_dim = internal_dim
        self.terms: dict = {}
        self._norms: dict = {}
        for X, poly in (terms or {}).items():
            self.add(X, poly)

    def _key(self, X) -> frozenset:
        out = set()
        for x in X:
            if isinstance(x, (int, np.integer)):
                if not 0 <= x < self.lattice.n_sites:
                    raise ValueError(f"site index {x} outside the lattice")
                out.add(int(x))
            else:
                out.add(self.lattice.index(x))
        if not out:
            raise ValueError("empty support set")
        return frozenset(out)

    def modes_of(self, key: frozenset) -> set:
        l = self.internal_dim
        return {i * l + k for i in key for k in range(l)}

    def add(self, X, poly: LadderPoly) -> None:
        """Add ``poly`` to the term on ``X`` (in place)."""
        key = self._key(X)
        if not poly.modes() <= self.modes_of(key):
            raise ValueError(f"term acts outside its support set {sorted(key)}")
        if key in self.terms:
            poly = self.terms[key] + poly
        if poly:
            self.terms[key] = poly
        else:
            self.terms.pop(key, None)
        self._norms.pop(key, None)

    def items(self):
        return self.terms.items()

    def __len__(self):
        return len(self.terms)

    def __add__(self, other: "Interaction") -> "Interaction":
        self._compatible(other)
        out = self.copy()
        for key, poly in other.terms.items():
            out.add(key, poly)
        return out

    def __mul__(self, c) -> "Interaction":
        out = Interaction(self.lattice, self.internal_dim)
        if c != 0:
            out.terms = {k: p * c for k, p in self.terms.items()}
        return out

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (-1.0) * other

    def copy(self) -> "Interaction":
        out = Interaction(self.lattice, self.internal_dim)
        out.terms = dict(self.terms)
        out._norms = dict(self._norms)
        return out

    def _compatible(self, other):
        if other.lattice != self.lattice or other.internal_dim != self.internal_dim:
            raise ValueError("interactions live on different lattices")

    def sites(self, key) -> list:
        return [self.lattice.site(i) for i in sorted(key)]

    @property
    def max_size(self) -> int:
        """Largest |X| over nonzero terms."""
        return max((len(k) for k in self.terms), default=0)

    @property
    def diameter(self) -> int:
        """Largest torus diameter of a support set."""
        D = self.lattice.distance_matrix()
        return max((int(D[np.ix_(list(k), list(k))].max()) for k in self.terms), default=0)

    def term_norm(self, key) -> float:
        key = self._key(key) if not isinstance(key, frozenset) else key
        if key not in self._norms:
            self._norms[key] = self.terms[key].norm() if key in self.terms else 0.0
        return self._norms[key]

    def validate(self, tol: float = 1e-12) -> None:
        """Check hermiticity and number conservation of every term."""
        for key, poly in self.terms.items():
            if not poly.is_number_conserving():
                raise ValueError(f"term on {self.sites(key)} does not conserve particle number")
            A = poly.local_matrix(sorted(self.modes_of(key)))
            if np.abs(A - A.conj().T).max() > tol:
                raise ValueError(f"term on {self.sites(key)} is not hermitian")

    def poly(self) -> LadderPoly:
        out = LadderPoly()
        for p in self.terms.values():
            out = out + p
        return out


def assemble(phi: Interaction, sector: FockSector):
    """Hamiltonian sum_X Phi(X) as a matrix on ``sector``."""
    if sector.lattice != phi.lattice or sector.internal_dim != phi.internal_dim:
        raise ValueError("interaction and sector live on different lattices")
    if not phi.terms:
        return as_operator(sparse.csr_matrix((sector.dim, sector.dim), dtype=complex), sector.dim)
    return phi.poly().matrix(sector)


def _as_block(v, l: int) -> np.ndarray:
    b = np.asarray(v, dtype=complex)
    if b.ndim == 0:
        b = b * np.eye(l)
    if b.shape != (l, l):
        raise ValueError(f"block has shape {b.shape}, expected {(l, l)}")
    return b


def _n_params(f) -> int:
    return len(inspect.signature(f).parameters)


def _site_key(k) -> tuple:
    return tuple(int(c) for c in np.atleast_1d(k))


def build_tvw(
    lattice: TorusLattice,
    hopping: Optional[Mapping] = None,
    potential=None,
    pair: Optional[Mapping] = None,
    mu: float = 0.0,
    internal_dim: int = 1,
    t: float = 0.0,
    tol: float = 1e-12,
) -> Interaction:
    """Interaction of the T/V/W lattice Hamiltonian at time ``t``.

    Parameters
    ----------
    hopping : mapping or callable
        ``{displacement: block}`` with the block T(x - y) multiplying
        a*_x T a_y.  Must satisfy T(-x) = T(x)^*.  A callable is called with
        ``t`` and must return such a mapping.
    potential : mapping, callable or None
        ``{site: block}`` or ``f(site)``/``f(t, site)`` returning the on-site
        Hermitian block.
    pair : mapping or callable
        ``{distance: block}`` for sum_{x != y} n_{i,x} W_ij n_{j,y}.
    mu : float
        Chemical potential, entering as -mu N.
    """
    l = internal_dim
    phi = Interaction(lattice, l)
    if callable(hopping):
        hopping = hopping(t)
    if callable(pair):
        pair = pair(t)
    hopping = {_site_key(k): _as_block(v, l) for k, v in (hopping or {}).items()}
    for disp, block in hopping.items():
        if lattice.fold(disp) != disp:
            raise ConfigurationError(f"hopping displacement {disp} does not fit on the torus of size {lattice.M}")
        neg = lattice.fold(tuple(-c for c in disp))
        partner = hopping.get(neg, np.zeros((l, l)))
        if np.abs(partner - block.conj().T).max() > tol:
            raise ValueError(f"hopping table is not hermitian at displacement {disp}")
    sector_modes = lambda x, i: lattice.index(x) * l + i
    for x in map(tuple, lattice.sites):
        for disp, block in hopping.items():
            y = lattice.sub(x, disp)
            poly = LadderPoly()
            for i in range(l):
                for j in range(l):
                    if block[i, j] != 0:
                        poly = poly + LadderPoly.hop(sector_modes(x, i), sector_modes(y, j), block[i, j])
            if poly:
                phi.add([x, y], poly)
    if potential is not None:
        for x in map(tuple, lattice.sites):
            if callable(potential):
                v = potential(t, x) if _n_params(potential) >= 2 else potential(x)
            else:
                v = {_site_key(k): b for k, b in potential.items()}.get(x, 0.0)
            block = _as_block(v, l)
            if np.abs(block - block.conj().T).max() > tol:
                raise ValueError(f"potential at {x} is not hermitian")
            poly = LadderPoly()
            for i in range(l):
                for j in range(l):
                    if block[i, j] != 0:
                        poly = poly + LadderPoly.hop(sector_modes(x, i), sector_modes(x, j), block[i, j])
            if poly:
                phi.add([x], poly)
    if pair:
        D = lattice.distance_matrix()
        n = lattice.n_sites
        for r, v in pair.items():
            block = _as_block(v, l)
            if np.abs(block - block.conj().T).max() > tol:
                raise ValueError(f"pair interaction at distance {r} is not hermitian")
            if r < 1:
                raise ValueError("pair interaction distances start at 1")
            for a in range(n):
                for b in range(a + 1, n):
                    if D[a, b] != r:
                        continue
                    poly = LadderPoly()
                    for i in range(l):
                        for j in range(l):
                            if block[i, j] != 0:
                                ma, mb = a * l + i, b * l + j
                                poly = poly + LadderPoly.density(ma) * LadderPoly.density(mb, block[i, j])
                    if poly:
                        phi.add([a, b], poly)
    if mu != 0:
        for a in range(lattice.n_sites):
            poly = LadderPoly()
            for i in range(l):
                poly = poly + LadderPoly.density(a * l + i, -mu)
            phi.add([a], poly)
    return phi


# ----------------------------------------------------------------------------
# charged families: twists and currents


@dataclass
class ChargedTerms:
    """Monomials of an interaction tagged with charge vectors.

    ``entries`` holds ``(key, ops, coeff, charge)``; the twisted interaction at
    angles ``theta`` carries coefficients ``coeff * exp(-i theta . charge)``.
    """

    lattice: TorusLattice
    internal_dim: int
    entries: list
    n_angles: int

    def interaction(self, theta: Sequence[float]) -> Interaction:
        theta = np.asarray(theta, dtype=float)
        out = Interaction(self.lattice, self.internal_dim)
        for key, ops, c, g in self.entries:
            out.add(key, LadderPoly({ops: c * np.exp(-1j * float(theta @ g))}))
        return out

    def derivative(self, k: int, theta: Optional[Sequence[float]] = None) -> Interaction:
        """d/d theta_k of the twisted interaction."""
        theta = np.zeros(self.n_angles) if theta is None else np.asarray(theta, dtype=float)
        out = Interaction(self.lattice, self.internal_dim)
        for key, ops, c, g in self.entries:
            if g[k] != 0:
                out.add(key, LadderPoly({ops: -1j * g[k] * c * np.exp(-1j * float(theta @ g))}))
        return out

    def assemble(self, sector: FockSector) -> "PhaseSum":
        groups: dict = {}
        for key, ops, c, g in self.entries:
            gk = tuple(float(v) for v in g)
            groups.setdefault(gk, LadderPoly())
            groups[gk] = groups[gk] + LadderPoly({ops: c})
        charges = np.array(list(groups), dtype=float).reshape(-1, self.n_angles)
        mats = [sparse.csr_matrix(p.matrix(sector, force_dense=False)) for p in groups.values()]
        return PhaseSum(charges, mats, sector.dim)


class PhaseSum:
    """H(theta) = sum_g exp(-i theta . g) G_g with analytic theta-derivatives."""

    def __init__(self, charges: np.ndarray, mats: list, dim: int):
        self.charges = charges
        self.mats = mats
        self.dim = dim

    def __call__(self, theta, deriv: Sequence[int] = (), dense_out: Optional[bool] = None):
        theta = np.asarray(theta, dtype=float)
        total = sparse.csr_matrix((self.dim, self.dim), dtype=complex)
        for g, G in zip(self.charges, self.mats):
            c = np.exp(-1j * float(theta @ g))
            for k in deriv:
                c = c * (-1j * g[k])
            if c != 0:
                total = total + c * G
        return as_operator(total, self.dim, dense_out)


def _charge_alpha(phi: Interaction, key: frozenset, ops, y_index: int) -> np.ndarray:
    lat, l = phi.lattice, phi.internal_dim
    y = lat.site(y_index)
    g = np.zeros(lat.d)
    for m, cr in ops:
        q = np.asarray(lat.sub(lat.site(m // l), y), dtype=float)
        g += q if cr else -q
    return g


def twist_family(phi: Interaction, check_wrap: bool = True) -> ChargedTerms:
    """Charges of every monomial under alpha . Q_y with y in the term's support.

    Raises ``ConfigurationError`` when the charge depends on the choice of y,
    i.e. when a term wraps around the torus.
    """
    entries = []
    for key, poly in phi.items():
        ys = sorted(key)
        for ops, c in poly.terms.items():
            g = _charge_alpha(phi, key, ops, ys[0])
            if check_wrap:
                for y in ys[1:]:
                    if np.abs(_charge_alpha(phi, key, ops, y) - g).max() > 0:
                        raise ConfigurationError(
                            f"term on {phi.sites(key)} wraps around the torus; the twist depends on y"
                        )
            entries.append((key, ops, c, g))
    return ChargedTerms(phi.lattice, phi.internal_dim, entries, phi.lattice.d)


def twist(phi: Interaction, alpha: Sequence[float]) -> Interaction:
    """Twisted interaction exp(-i alpha . Q_y) Phi(X) exp(i alpha . Q_y)."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if alpha.shape != (phi.lattice.d,):
        raise ValueError("alpha needs one component per dimension")
    return twist_family(phi).interaction(alpha)


def twist_with_anchor(phi: Interaction, alpha: Sequence[float], choose_y: Callable) -> Interaction:
    """Twist with an explicit choice ``choose_y(sorted_site_indices) -> index`` of y.

    Only used to verify that the twist does not depend on the anchor.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    out = Interaction(phi.lattice, phi.internal_dim)
    for key, poly in phi.items():
        y = choose_y(sorted(key))
        for ops, c in poly.terms.items():
            g = _charge_alpha(phi, key, ops, y)
            out.add(key, LadderPoly({ops: c * np.exp(-1j * float(alpha @ g))}))
    return out


def _straddles(phi: Interaction, key: frozenset, j: int, r: int) -> bool:
    coords = phi.lattice.sites[sorted(key), j]
    inside = coords <= 0
    if inside.all() or not inside.any():
        return False
    return int(np.abs(coords).min()) <= r


def beta_family(phi: Interaction, r: Optional[int] = None) -> ChargedTerms:
    """Charges under the half-space number operators N_1, N_2.

    A term is twisted in direction j only if it meets both the half space
    {x_j <= 0} and its complement and lies within distance ``r`` of the plane
    {x_j = 0}.  ``r`` defaults to the largest support size of ``phi``.
    """
    lat, l = phi.lattice, phi.internal_dim
    if lat.d < 2:
        raise ValueError("half-space twists need d >= 2")
    r = phi.max_size if r is None else r
    entries = []
    for key, poly in phi.items():
        mask = [_straddles(phi, key, j, r) for j in range(2)]
        for ops, c in poly.terms.items():
            g = np.zeros(2)
            for j in range(2):
                if mask[j]:
                    for m, cr in ops:
                        if lat.sites[m // l, j] <= 0:
                            g[j] += 1 if cr else -1
            entries.append((key, ops, c, g))
    return ChargedTerms(lat, l, entries, 2)


def beta_twist(phi: Interaction, beta1: float, beta2: float, r: Optional[int] = None) -> Interaction:
    """Interaction twisted across the cuts {x_1 = 0} and then {x_2 = 0}."""
    return beta_family(phi, r).interaction([beta1, beta2])


def current_interaction(phi_H: Interaction) -> list:
    """Components of Phi_J(X) = i [Phi_H(X), Q_y], one interaction per direction."""
    fam = twist_family(phi_H)
    return [fam.derivative(k) for k in range(phi_H.lattice.d)]


# ----------------------------------------------------------------------------
# norms


def interaction_norm(
    phi,
    zeta: DecayFunction,
    n: int = 0,
    plane: Optional[LocalizationPlane] = None,
    times: Optional[Iterable[float]] = None,
) -> float:
    """max_{x,y} sum_{X contains x,y} |X|^n ||Phi(X)|| / F_zeta(d_L(x, y)).

    For a :class:`TimeDependentInteraction` the maximum over ``times`` is
    returned.
    """
    if isinstance(phi, TimeDependentInteraction):
        if times is None:
            raise ValueError("times are required for a time-dependent interaction")
        return max(interaction_norm(phi.at(t), zeta, n, plane) for t in times)
    lat = phi.lattice
    S = np.zeros((lat.n_sites, lat.n_sites))
    for key in phi.terms:
        w = len(key) ** n * phi.term_norm(key)
        idx = np.array(sorted(key))
        S[np.ix_(idx, idx)] += w
    if not S.any():
        return 0.0
    _, Fz = decay_weights(lat.distance_matrix(plane), lat.d, zeta)
    return float((S / Fz).max())


# ----------------------------------------------------------------------------
# time dependence


class TimeDependentInteraction:
    """t -> Interaction together with analytic time derivatives.

    Parameters
    ----------
    func : callable
        ``func(t, order)`` returning the ``order``-th time derivative of the
        interaction at ``t`` (order 0, 1, 2).
    """

    def __init__(self, func: Callable[[float, int], Interaction], lattice: TorusLattice, internal_dim: int = 1):
        self.func = func
        self.lattice = lattice
        self.internal_dim = internal_dim
        self._components = None

    @classmethod
    def from_components(cls, components: Sequence[tuple]) -> "TimeDependentInteraction":
        """Build sum_k c_k(t) Phi_k from ``(coefficient, interaction)`` pairs.

        Each coefficient is a callable ``c(t, order)``; constants are allowed.
        """
        comps = []
        for c, ph in components:
            if not callable(c):
                c = _constant(float(c))
            comps.append((c, ph))
        lat, l = comps[0][1].lattice, comps[0][1].internal_dim

        def func(t, order=0):
            out = Interaction(lat, l)
            for c, ph in comps:
                v = c(t, order)
                if v != 0:
                    out = out + ph * v
            return out

        obj = cls(func, lat, l)
        obj._components = comps
        return obj

    def at(self, t: float) -> Interaction:
        return self.func(t, 0)

    def derivative(self, t: float, order: int = 1) -> Interaction:
        return self.func(t, order)

    def path(self, sector: FockSector) -> "HamiltonianPath":
        if self._components is not None:
            mats = [assemble(ph, sector) for _, ph in self._components]
            coefs = [c for c, _ in self._components]
            return LinearPath(coefs, mats)
        return HamiltonianPath(lambda t, k: assemble(self.func(t, k), sector))


def _constant(value: float):
    def c(t, order=0):
        return value if order == 0 else 0.0

    return c


class HamiltonianPath:
    """Matrix-valued path t -> H(t) with derivatives ``func(t, order)``."""

    def __init__(self, func: Callable[[float, int], object]):
        self.func = func

    def H(self, t):
        return self.func(t, 0)

    def Hdot(self, t):
        return self.func(t, 1)

    def Hddot(self, t):
        return self.func(t, 2)

    def __call__(self, t, order: int = 0):
        return self.func(t, order)


class LinearPath(HamiltonianPath):
    """H(t) = sum_k c_k(t) A_k."""

    def __init__(self, coefs: Sequence[Callable], mats: Sequence):
        self.coefs = list(coefs)
        self.mats = list(mats)

        def func(t, order=0):
            out = 0
            for c, A in zip(self.coefs, self.mats):
                v = c(t, order)
                if v != 0:
                    out = out + v * A
            if np.isscalar(out):
                out = np.zeros_like(self.mats[0]) if not sparse.issparse(self.mats[0]) else 0 * self.mats[0]
            return out

        super().__init__(func)


class TwistPath(HamiltonianPath):
    """H(t) = H0(theta(t)) for a charged family and a twist schedule.

    ``theta(t, order)`` returns the ``order``-th derivative of the angle vector.
    """

    def __init__(self, phase_sum: PhaseSum, theta: Callable):
        self.phase_sum = phase_sum
        self.theta = theta

        def func(t, order=0):
            th = np.asarray(theta(t, 0), dtype=float)
            ps = self.phase_sum
            if order == 0:
                return ps(th)
            v = np.asarray(theta(t, 1), dtype=float)
            p = len(th)
            if order == 1:
                return sum(v[k] * ps(th, (k,)) for k in range(p) if v[k] != 0) if v.any() else 0 * ps(th)
            if order == 2:
                a = np.asarray(theta(t, 2), dtype=float)
                out = 0 * ps(th)
                for k in range(p):
                    if a[k] != 0:
                        out = out + a[k] * ps(th, (k,))
                    for q in range(p):
                        if v[k] * v[q] != 0:
                            out = out + v[k] * v[q] * ps(th, (k, q))
                return out
            raise ValueError("only derivatives up to order 2 are available")

        super().__init__(func)
