"""Fermionic Fock-space sectors and ladder-operator polynomials.

Modes are ordered lexicographically in (linear site index, internal index);
mode ``m`` is bit ``m`` of a basis-state integer.  The Jordan-Wigner sign of
acting with a_m or a*_m on a pattern is (-1)^(number of occupied modes below m).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import sparse

from .lattice import TorusLattice

DENSE_LIMIT = 4096


def _popcount(a: np.ndarray) -> np.ndarray:
    return np.bitwise_count(a).astype(np.int64)


def as_operator(mat, dim: int, force_dense: Optional[bool] = None):
    """Return ``mat`` dense for ``dim <= DENSE_LIMIT`` and CSR above."""
    dense = dim <= DENSE_LIMIT if force_dense is None else force_dense
    if dense:
        return mat.toarray() if sparse.issparse(mat) else np.asarray(mat)
    return sparse.csr_matrix(mat)


def dense(mat) -> np.ndarray:
    return mat.toarray() if sparse.issparse(mat) else np.asarray(mat)


@dataclass(frozen=True)
class FockSector:
    """Occupation-number basis of the N-particle sector.

    Parameters
    ----------
    lattice : TorusLattice
    internal_dim : int
        Number of internal states per site.
    N : int or None
        Particle number.  ``None`` gives the full Fock space, ordered by the
        integer value of the occupation pattern.
    """

    lattice: TorusLattice
    internal_dim: int = 1
    N: Optional[int] = None
    states: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.n_modes
        if self.internal_dim < 1:
            raise ValueError("internal_dim must be >= 1")
        if n > 64:
            raise ValueError(f"{n} modes exceed the 64-bit pattern limit")
        if self.N is None:
            if n > 24:
                raise ValueError("full Fock space is limited to 24 modes")
            states = np.arange(2**n, dtype=np.uint64)
        else:
            if not 0 <= self.N <= n:
                raise ValueError(f"particle number {self.N} outside [0, {n}]")
            states = np.array(
                [sum(1 << m for m in c) for c in itertools.combinations(range(n), self.N)],
                dtype=np.uint64,
            )
            states.sort()
        object.__setattr__(self, "states", states)

    @property
    def n_modes(self) -> int:
        return self.lattice.n_sites * self.internal_dim

    @property
    def dim(self) -> int:
        return len(self.states)

    def mode(self, site, internal: int = 0) -> int:
        if not 0 <= internal < self.internal_dim:
            raise ValueError(f"internal index {internal} out of range")
        return self.lattice.index(site) * self.internal_dim + internal

    def mode_site(self, m: int) -> tuple:
        return self.lattice.site(m // self.internal_dim)

    def site_modes(self, site) -> list:
        base = self.lattice.index(site) * self.internal_dim
        return list(range(base, base + self.internal_dim))

    def lookup(self, patterns: np.ndarray) -> np.ndarray:
        """Basis positions of ``patterns`` (all must belong to the sector)."""
        pos = np.searchsorted(self.states, patterns)
        return pos

    def occupations(self) -> np.ndarray:
        """Boolean array (dim, n_modes) of occupied modes."""
        bits = np.arange(self.n_modes, dtype=np.uint64)
        return ((self.states[:, None] >> bits[None, :]) & np.uint64(1)).astype(bool)

    def full_space(self) -> "FockSector":
        return FockSector(self.lattice, self.internal_dim, None)


def apply_monomial(ops: Sequence[tuple], states: np.ndarray, n_modes: int):
    """Act with a product of ladder operators on the patterns ``states``.

    ``ops`` is a sequence of ``(mode, create)`` pairs written left to right;
    the rightmost operator acts first.  Returns ``(cols, new_patterns, signs)``
    for the patterns with a nonzero image.
    """
    states = np.array(states, dtype=np.uint64)
    signs = np.ones(len(states), dtype=np.int64)
    alive = np.ones(len(states), dtype=bool)
    n = n_modes
    for m, create in reversed(tuple(ops)):
        if not 0 <= m < n:
            raise ValueError(f"mode {m} out of range [0, {n})")
        bit = np.uint64(1) << np.uint64(m)
        occ = (states & bit) != 0
        alive &= ~occ if create else occ
        below = states & (bit - np.uint64(1))
        signs = np.where(_popcount(below) % 2 == 1, -signs, signs)
        states = states ^ bit
    cols = np.nonzero(alive)[0]
    return cols, states[cols], signs[cols]


class LadderPoly:
    """Polynomial in fermionic ladder operators.

    Stored as ``{ops: coeff}`` with ``ops`` a tuple of ``(mode, create)``
    pairs (left-to-right operator product).  Equal operators may have several
    representations; no normal ordering is applied.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[Mapping] = None):
        self.terms = {}
        if terms:
            for ops, c in terms.items():
                ops = tuple((int(m), bool(cr)) for m, cr in ops)
                if c != 0:
                    self.terms[ops] = self.terms.get(ops, 0) + complex(c)

    @classmethod
    def hop(cls, m: int, n: int, c: complex = 1.0) -> "LadderPoly":
        """c a*_m a_n"""
        return cls({((m, True), (n, False)): c})

    @classmethod
    def density(cls, m: int, c: complex = 1.0) -> "LadderPoly":
        return cls.hop(m, m, c)

    @classmethod
    def identity(cls, c: complex = 1.0) -> "LadderPoly":
        return cls({(): c})

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        return f"LadderPoly({self.terms!r})"

    def copy(self) -> "LadderPoly":
        p = LadderPoly()
        p.terms = dict(self.terms)
        return p

    def __add__(self, other: "LadderPoly") -> "LadderPoly":
        out = self.copy()
        for ops, c in other.terms.items():
            out.terms[ops] = out.terms.get(ops, 0) + c
        out.terms = {k: v for k, v in out.terms.items() if v != 0}
        return out

    def __sub__(self, other):
        return self + (-1) * other

    def __neg__(self):
        return (-1) * self

    def __mul__(self, other):
        if isinstance(other, LadderPoly):
            out = {}
            for o1, c1 in self.terms.items():
                for o2, c2 in other.terms.items():
                    out[o1 + o2] = out.get(o1 + o2, 0) + c1 * c2
            return LadderPoly(out)
        return LadderPoly({k: v * other for k, v in self.terms.items()})

    __rmul__ = __mul__

    def adjoint(self) -> "LadderPoly":
        return LadderPoly(
            {tuple((m, not cr) for m, cr in reversed(ops)): np.conj(c) for ops, c in self.terms.items()}
        )

    def modes(self) -> set:
        return {m for ops in self.terms for m, _ in ops}

    def is_number_conserving(self) -> bool:
        return all(sum(1 if cr else -1 for _, cr in ops) == 0 for ops in self.terms)

    def rephase(self, phase_fn) -> "LadderPoly":
        """Multiply each monomial by ``phase_fn(created, annihilated)``."""
        out = {}
        for ops, c in self.terms.items():
            created = [m for m, cr in ops if cr]
            annihilated = [m for m, cr in ops if not cr]
            out[ops] = c * phase_fn(created, annihilated)
        return LadderPoly(out)

    def matrix(self, sector: FockSector, force_dense: Optional[bool] = None):
        """Matrix of the polynomial on a number sector (or the full space)."""
        return self._matrix(sector.states, sector.n_modes, sector.N is not None, force_dense)

    def _matrix(self, states, n_modes, fixed_n, force_dense=None):
        rows, cols, vals = [], [], []
        for ops, c in self.terms.items():
            col, new, sgn = apply_monomial(ops, states, n_modes)
            if fixed_n and col.size and sum(1 if cr else -1 for _, cr in ops) != 0:
                raise ValueError("polynomial does not conserve particle number")
            rows.append(np.searchsorted(states, new))
            cols.append(col)
            vals.append(c * sgn)
        dim = len(states)
        if rows:
            mat = sparse.coo_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
            ).tocsr()
        else:
            mat = sparse.csr_matrix((dim, dim), dtype=complex)
        mat.sum_duplicates()
        return as_operator(mat.astype(complex), dim, force_dense)

    def local_matrix(self, modes: Optional[Sequence[int]] = None) -> np.ndarray:
        """Dense matrix on the full Fock space of ``modes`` (default: own modes).

        Modes keep their relative global order, so even polynomials get the
        same matrix as on any larger space up to a tensor factor.
        """
        modes = sorted(self.modes() if modes is None else modes)
        k = len(modes)
        if k > 14:
            raise ValueError("local term acts on too many modes")
        relabel = {m: i for i, m in enumerate(modes)}
        local = LadderPoly({tuple((relabel[m], cr) for m, cr in ops): c for ops, c in self.terms.items()})
        return local._matrix(np.arange(2**k, dtype=np.uint64), k, False, force_dense=True)

    def norm(self) -> float:
        if not self.terms:
            return 0.0
        return float(np.linalg.norm(self.local_matrix(), 2))


def ladder_map(coeffs: Mapping[tuple, complex], sector: FockSector):
    """Matrix of sum_{m, n} c_{mn} a*_m a_n on ``sector``."""
    poly = LadderPoly()
    for (m, n), c in coeffs.items():
        for mode in (m, n):
            if not 0 <= mode < sector.n_modes:
                raise ValueError(f"mode {mode} out of range [0, {sector.n_modes})")
        poly = poly + LadderPoly.hop(m, n, c)
    return poly.matrix(sector)


def annihilation(m: int, sector: FockSector):
    """a_m on the full Fock space."""
    if sector.N is not None:
        raise ValueError("single ladder operators need the full Fock space (N=None)")
    return LadderPoly({((m, False),): 1.0}).matrix(sector)


def creation(m: int, sector: FockSector):
    if sector.N is not None:
        raise ValueError("single ladder operators need the full Fock space (N=None)")
    return LadderPoly({((m, True),): 1.0}).matrix(sector)


def _diag(values: np.ndarray, sector: FockSector):
    return as_operator(sparse.diags(values.astype(complex)), sector.dim)


def mode_counts(region: Iterable, sector: FockSector) -> np.ndarray:
    """Number of occupied modes inside ``region`` for every basis state."""
    mask = np.uint64(0)
    for x in region:
        for m in sector.site_modes(x):
            mask |= np.uint64(1) << np.uint64(m)
    return _popcount(sector.states & mask)


def number_operator(region: Iterable, sector: FockSector):
    """Diagonal matrix counting particles on the sites in ``region``."""
    return _diag(mode_counts(region, sector).astype(float), sector)


def half_space(lattice: TorusLattice, j: int) -> list:
    """Sites with coordinate j (zero based) <= 0."""
    return [lattice.site(i) for i in range(lattice.n_sites) if lattice.sites[i, j] <= 0]


def shifted_positions(y, sector: FockSector) -> np.ndarray:
    """Array (n_modes, d) of the components of x - y for each mode's site x."""
    lat = sector.lattice
    lat.check(y)
    rel = np.array([lat.sub(sector.mode_site(m), y) for m in range(sector.n_modes)], dtype=float)
    return rel.reshape(sector.n_modes, lat.d)


def position_twist(y, alpha: Sequence[float], sector: FockSector):
    """Shifted position operators Q_y and the twist exp(-i alpha . Q_y).

    Returns
    -------
    Q : list of d diagonal operators
    twist : diagonal unitary operator
    """
    rel = shifted_positions(y, sector)
    occ = sector.occupations().astype(float)
    q = occ @ rel  # (dim, d)
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if alpha.shape != (sector.lattice.d,):
        raise ValueError("alpha must have one component per dimension")
    Q = [_diag(q[:, k], sector) for k in range(sector.lattice.d)]
    twist = _diag(np.exp(-1j * (q @ alpha)), sector)
    return Q, twist
