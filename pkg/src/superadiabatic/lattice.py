"""Torus geometry, localization planes and decay weights.

Sites of the torus Lambda(M) are integer vectors in the centered box
{-M/2+1, ..., M/2}^d.  All arithmetic is modulo M with the result folded
back into that box.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import comb


def _fold(v: np.ndarray, M: int, lo: int) -> np.ndarray:
    return (v - lo) % M + lo


@dataclass(frozen=True)
class TorusLattice:
    """The torus Lambda(M) in d dimensions.

    Parameters
    ----------
    d : int
        Spatial dimension.
    M : int
        Side length.  Even values give the box {-M/2+1, ..., M/2}; odd
        values are accepted and use the symmetric box {-(M-1)/2, ..., (M-1)/2}.
    """

    d: int
    M: int
    sites: np.ndarray = field(init=False, repr=False, compare=False)
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension must be positive, got {self.d}")
        if self.M < 2:
            raise ValueError(f"side length must be >= 2, got {self.M}")
        rng = range(self.lo, self.hi + 1)
        sites = np.array(list(itertools.product(rng, repeat=self.d)), dtype=int)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "_index", {tuple(s): i for i, s in enumerate(sites)})

    @property
    def lo(self) -> int:
        return -((self.M - 1) // 2)

    @property
    def hi(self) -> int:
        return self.M // 2

    @property
    def n_sites(self) -> int:
        return self.M**self.d

    def __len__(self):
        return self.n_sites

    def index(self, x) -> int:
        """Row-major linear index of site ``x``."""
        try:
            return self._index[self._as_tuple(x)]
        except KeyError:
            raise ValueError(f"site {x} is outside the box [{self.lo}, {self.hi}]^{self.d}") from None

    def site(self, i: int) -> tuple:
        return tuple(int(c) for c in self.sites[i])

    def contains(self, x) -> bool:
        return self._as_tuple(x) in self._index

    def _as_tuple(self, x) -> tuple:
        x = np.atleast_1d(np.asarray(x, dtype=int))
        if x.shape != (self.d,):
            raise ValueError(f"site {x} does not have dimension {self.d}")
        return tuple(int(c) for c in x)

    def check(self, x) -> np.ndarray:
        if not self.contains(x):
            raise ValueError(f"site {tuple(np.atleast_1d(x))} is outside the box [{self.lo}, {self.hi}]^{self.d}")
        return np.atleast_1d(np.asarray(x, dtype=int))

    def add(self, x, y) -> tuple:
        v = _fold(self.check(x) + self.check(y), self.M, self.lo)
        return tuple(int(c) for c in v)

    def sub(self, x, y) -> tuple:
        v = _fold(self.check(x) - self.check(y), self.M, self.lo)
        return tuple(int(c) for c in v)

    def neg(self, x) -> tuple:
        v = _fold(-self.check(x), self.M, self.lo)
        return tuple(int(c) for c in v)

    def fold(self, v) -> tuple:
        """Fold an arbitrary integer vector onto the box."""
        v = _fold(np.atleast_1d(np.asarray(v, dtype=int)), self.M, self.lo)
        return tuple(int(c) for c in v)

    def dist(self, x, y) -> int:
        """l1 distance on the torus."""
        return int(np.abs(np.asarray(self.sub(y, x))).sum())

    def dist_to_plane(self, x, plane: "LocalizationPlane") -> int:
        diff = np.abs(np.asarray(self.sub(x, plane.anchor)))
        return int((diff * np.asarray(plane.ell)).sum())

    def dist_L(self, x, y, plane: Optional["LocalizationPlane"] = None) -> int:
        dist = self.dist(x, y)
        if plane is None:
            return dist
        return dist + self.dist_to_plane(x, plane) + self.dist_to_plane(y, plane)

    def distance_matrix(self, plane: Optional["LocalizationPlane"] = None) -> np.ndarray:
        """All pairwise ``dist_L`` values, indexed by linear site index."""
        diff = self.sites[:, None, :] - self.sites[None, :, :]
        diff = np.abs(_fold(diff, self.M, self.lo))
        D = diff.sum(axis=-1)
        if plane is not None:
            rel = np.abs(_fold(self.sites - np.asarray(plane.anchor), self.M, self.lo))
            dl = (rel * np.asarray(plane.ell)).sum(axis=-1)
            D = D + dl[:, None] + dl[None, :]
        return D


@dataclass(frozen=True)
class LocalizationPlane:
    """Plane through ``anchor`` constrained in the directions where ``ell`` is 1."""

    ell: tuple
    anchor: tuple

    def __post_init__(self):
        ell = tuple(int(b) for b in self.ell)
        if any(b not in (0, 1) for b in ell):
            raise ValueError(f"ell must be a bit vector, got {self.ell}")
        anchor = tuple(int(c) for c in np.atleast_1d(self.anchor))
        if len(anchor) != len(ell):
            raise ValueError("anchor and ell have different lengths")
        object.__setattr__(self, "ell", ell)
        object.__setattr__(self, "anchor", anchor)

    @classmethod
    def trivial(cls, d: int) -> "LocalizationPlane":
        return cls((0,) * d, (0,) * d)

    @property
    def n_constrained(self) -> int:
        return sum(self.ell)


def torus_metric(x, y, lattice: TorusLattice, plane: Optional[LocalizationPlane] = None):
    """Return ``(x + y, d(x, y), d_L(x, y))`` on the torus.

    Without a plane ``d_L`` equals the plain torus distance.
    """
    total = lattice.add(x, y)
    dist = lattice.dist(x, y)
    return total, dist, lattice.dist_L(x, y, plane)


@dataclass(frozen=True)
class DecayFunction:
    """Decay function zeta on {0, 1, 2, ...}.

    Use :meth:`exponential` for zeta(r) = exp(-a r) or :meth:`tabulated` for a
    finite table extended by its last value.
    """

    kind: str
    rate: float = 1.0
    table: tuple = ()

    @classmethod
    def exponential(cls, a: float) -> "DecayFunction":
        if a <= 0:
            raise ValueError("decay rate must be positive")
        return cls("exponential", rate=float(a))

    @classmethod
    def tabulated(cls, values: Sequence[float]) -> "DecayFunction":
        values = tuple(float(v) for v in values)
        if not values or any(v <= 0 for v in values):
            raise ValueError("tabulated decay values must be positive")
        return cls("tabulated", table=values)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "exponential":
            return np.exp(-self.rate * r)
        tab = np.asarray(self.table)
        idx = np.clip(np.asarray(r, dtype=int), 0, len(tab) - 1)
        return tab[idx]

    def check(self, rmax: int = 64, nmax: int = 6, tol: float = 1e-12) -> dict:
        """Sampled check of the defining properties; returns a dict of booleans."""
        r = np.arange(rmax + 1)
        z = self(r)
        R, S = np.meshgrid(r, r, indexing="ij")
        mask = R + S <= rmax
        supermult = np.all(self(R + S)[mask] >= self(R)[mask] * self(S)[mask] - tol)
        rr = np.arange(rmax + 1, 50 * rmax, dtype=float)
        poly = all(rr[-1] ** n * self(rr[-1]) < max(1.0, (rr**n * self(rr)).max()) for n in range(nmax + 1))
        return {
            "bounded": bool(np.all(z <= 1 + tol)),
            "non_increasing": bool(np.all(np.diff(z) <= tol)),
            "supermultiplicative": bool(supermult),
            "polynomial_decay": bool(poly),
        }


def decay_weights(r, d: int, zeta: Optional[DecayFunction] = None):
    """Return ``(F(r), F_zeta(r))`` with F(r) = (1 + r)^-(d+1)."""
    r = np.asarray(r, dtype=float)
    F = 1.0 / (1.0 + r) ** (d + 1)
    if zeta is None:
        return F, F
    return F, zeta(r) * F


def norm_F_Gamma(d: int, cutoff: int = 10**6, return_tail: bool = False):
    """Truncated lattice sum sum_{y in Z^d} F(|y|_1) and an upper tail bound.

    A sphere of l1 radius r holds sum_k 2^k C(d,k) C(r-1,k-1) points, at most
    C r^(d-1), so the neglected tail is bounded by C / cutoff.
    """
    r = np.arange(cutoff + 1, dtype=float)
    shells = np.zeros_like(r)
    shells[0] = 1.0
    for k in range(1, d + 1):
        shells[1:] += 2**k * math.comb(d, k) * comb(r[1:] - 1, k - 1)
    terms = shells / (1.0 + r) ** (d + 1)
    # sum small terms first
    total = float(np.sum(terms[::-1]))
    lead = 2**d / math.factorial(d - 1)
    tail = lead / (1.0 + cutoff)
    if return_tail:
        return total, tail
    return total


def lattice_sum(f: Callable[[np.ndarray], np.ndarray], lattice: TorusLattice, x) -> float:
    """sum_y f(d(x, y)) over the torus."""
    D = lattice.distance_matrix()[lattice.index(x)]
    return float(np.sum(f(D)))
