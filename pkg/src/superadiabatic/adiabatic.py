"""Kato generator, superadiabatic coefficients to second order and the defect.

Sign convention.  With L_H(A) = -i[H, A] and I the inverse Liouvillian,
K_1 = -L_H(A_1) has off-diagonal part equal to Kato's generator
i[Pdot, P] only for A_1 = +I(I(Hdot)); the opposite sign reproduces
-K_par.  We use A_1 = I(I(Hdot)), whose P(.)P-perp block equals
P Pdot R + R Pdot P = -(R^2 Hdot_OD + Hdot_OD R^2).

The block P A_1 P vanishes at every time, but P (dA_1/dt) P does not: it
equals -2 P Pdot R Pdot P.  Consequently P K_2 P = -P Pdot R Pdot P, and the
first-order parallel transport that reproduces the adiabatic evolution on
ran P is generated by K_par - eps Pdot R Pdot.  For a non-degenerate level the
sign only changes a phase that drops out of P(.)P expectations.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .fock import dense
from .spectral import (
    SpectralData,
    eig_cluster,
    inverse_liouvillian,
    liouvillian,
    projection_derivative,
    reduced_resolvent,
)


def kato_generator(P, Pdot) -> np.ndarray:
    """K_par = i [Pdot, P]."""
    P, Pdot = dense(P), dense(Pdot)
    return 1j * (Pdot @ P - P @ Pdot)


def first_order_blocks(sd: SpectralData, Pdot):
    """Return ``(A1_tilde, K2_tilde)`` for a single-eigenvalue cluster.

    A1_tilde = P Pdot R + R Pdot P and K2_tilde = P Pdot R Pdot P with R the
    reduced resolvent.
    """
    if sd.width > sd.eta:
        raise ValueError("first-order blocks need a single (possibly degenerate) eigenvalue")
    P = sd.P
    R = reduced_resolvent(sd)
    Pdot = dense(Pdot)
    A1t = P @ Pdot @ R + R @ Pdot @ P
    K2t = P @ Pdot @ R @ Pdot @ P
    return A1t, K2t


def _comm(A, B):
    return A @ B - B @ A


@dataclass
class PointData:
    """Instantaneous spectral data of a Hamiltonian path at time ``t``."""

    t: float
    H: np.ndarray
    Hdot: np.ndarray
    sd: SpectralData
    Pdot: np.ndarray

    @property
    def P(self) -> np.ndarray:
        return self.sd.P

    @property
    def Kpar(self) -> np.ndarray:
        return kato_generator(self.P, self.Pdot)


def point_data(path, t: float, selector="ground", eig_kw: Optional[dict] = None) -> PointData:
    H = dense(path(t, 0))
    Hdot = dense(path(t, 1))
    sd = eig_cluster(H, selector, t=t, **(eig_kw or {}))
    return PointData(t, H, Hdot, sd, projection_derivative(sd, Hdot))


@dataclass
class ExpansionOrder2:
    """Superadiabatic coefficients A_1, A_2, K_1, K_2 at one time."""

    A1: np.ndarray
    A2: np.ndarray
    K1: np.ndarray
    K2: np.ndarray
    mode: str
    zeroed: dict = field(default_factory=dict)

    def S(self, eps: float) -> np.ndarray:
        return self.A1 + eps * self.A2

    def K(self, eps: float) -> np.ndarray:
        return self.K1 + eps * self.K2


def a1_coefficient(sd: SpectralData, Hdot, mode: str = "exact", **inv_kw) -> np.ndarray:
    """A_1 = I(I(Hdot))."""
    return inverse_liouvillian(sd, inverse_liouvillian(sd, Hdot, mode, **inv_kw), mode, **inv_kw)


def _a1_at(path, t, selector, mode, eig_kw, inv_kw):
    d = point_data(path, t, selector, eig_kw)
    return a1_coefficient(d.sd, d.Hdot, mode, **inv_kw)


def a1_time_derivative(path, t: float, h: float = 1e-3, selector="ground", mode="exact", eig_kw=None, inv_kw=None):
    """Centered difference of A_1 in t with one Richardson step.

    A_1 is a spectral multiplier with energy-only weights, hence
    independent of the eigenvector gauge; no frame alignment is needed.
    """
    inv_kw = inv_kw or {}
    f = lambda s: _a1_at(path, s, selector, mode, eig_kw, inv_kw)
    d_h = (f(t + h) - f(t - h)) / (2 * h)
    d_h2 = (f(t + h / 2) - f(t - h / 2)) / h
    return (4 * d_h2 - d_h) / 3


def expansion_order2(
    path,
    t: float,
    selector="ground",
    mode: str = "exact",
    h: float = 1e-3,
    eig_kw: Optional[dict] = None,
    inv_kw: Optional[dict] = None,
    A1dot: Optional[np.ndarray] = None,
    data: Optional[PointData] = None,
) -> ExpansionOrder2:
    """Coefficients of S = A_1 + eps A_2 and K = K_1 + eps K_2 at time ``t``.

    A_1 = I(I(Hdot)), K_1 = -L_H(A_1), L_2 = -1/2 [A_1, [A_1, H]],
    Q_2 = -dA_1/dt, A_2 = I(L_2 - Q_2), K_2 = L_2 - Q_2 - L_H(A_2).

    Parameters
    ----------
    path : HamiltonianPath or callable ``(t, order) -> matrix``
    h : float
        Step for the time derivative of A_1 (ignored if ``A1dot`` is given).
    """
    inv_kw = inv_kw or {}
    d = data if data is not None else point_data(path, t, selector, eig_kw)
    H, sd = d.H, d.sd
    A1 = a1_coefficient(sd, d.Hdot, mode, **inv_kw)
    K1 = -liouvillian(H, A1)
    zeroed = {"A1": False, "A2": False, "K1": False, "K2": False}
    if A1dot is None:
        A1dot = a1_time_derivative(path, t, h, selector, mode, eig_kw, inv_kw)
    L2 = -0.5 * _comm(A1, _comm(A1, H))
    Q2 = -A1dot
    A2 = inverse_liouvillian(sd, L2 - Q2, mode, **inv_kw)
    K2 = L2 - Q2 - liouvillian(H, A2)
    out = []
    for name, X in (("A1", A1), ("A2", A2), ("K1", K1), ("K2", K2)):
        X = 0.5 * (X + X.conj().T)
        if not np.any(X):
            zeroed[name] = True
        out.append(X)
    return ExpansionOrder2(*out, mode=mode, zeroed=zeroed)


def superadiabatic_frame(S, eps: float, P_star):
    """V = exp(i eps S) and P_sa = V P_* V^*."""
    S = dense(S)
    w, v = np.linalg.eigh(0.5 * (S + S.conj().T))
    V = (v * np.exp(1j * eps * w)) @ v.conj().T
    P = dense(P_star)
    return V, V @ P @ V.conj().T


class _LRU(OrderedDict):
    def __init__(self, maxsize: int):
        super().__init__()
        self.maxsize = maxsize

    def get_or(self, key, make):
        if key in self:
            self.move_to_end(key)
            return self[key]
        value = make()
        self[key] = value
        if len(self) > self.maxsize:
            self.popitem(last=False)
        return value


class AdiabaticFamily:
    """Point data and expansions along a Hamiltonian path, cached per time."""

    def __init__(
        self,
        path,
        selector="ground",
        mode: str = "exact",
        h: float = 1e-3,
        eig_kw=None,
        inv_kw=None,
        cache_size: int = 4096,
    ):
        self.path = path
        self.selector = selector
        self.mode = mode
        self.h = h
        self.eig_kw = eig_kw or {}
        self.inv_kw = inv_kw or {}
        self._data = _LRU(cache_size)
        self._exp = _LRU(cache_size)

    def data(self, t: float) -> PointData:
        key = float(t)
        return self._data.get_or(key, lambda: point_data(self.path, key, self.selector, self.eig_kw))

    def expansion(self, t: float) -> ExpansionOrder2:
        key = float(t)
        return self._exp.get_or(
            key,
            lambda: expansion_order2(
                self.path, key, self.selector, self.mode, self.h, self.eig_kw, self.inv_kw, data=self.data(key)
            ),
        )

    def V(self, t: float, eps: float) -> np.ndarray:
        return superadiabatic_frame(self.expansion(t).S(eps), eps, self.data(t).P)[0]

    def P_sa(self, t: float, eps: float) -> np.ndarray:
        return superadiabatic_frame(self.expansion(t).S(eps), eps, self.data(t).P)[1]

    def K_par(self, t: float) -> np.ndarray:
        return self.data(t).Kpar

    def K_par1(self, t: float, eps: float, sign: float = -1.0) -> np.ndarray:
        """K_par + sign * eps Pdot R Pdot (``sign=-1`` equals K_par + eps P K_2 P)."""
        d = self.data(t)
        R = reduced_resolvent(d.sd)
        return d.Kpar + sign * eps * d.Pdot @ R @ d.Pdot

    def H_a(self, t: float, eps: float) -> np.ndarray:
        return self.data(t).H + eps * self.expansion(t).K(eps)


def defect(family: AdiabaticFamily, eps: float, t_grid: Sequence[float], h: Optional[float] = None) -> np.ndarray:
    """Norm of R~(t) = V (i eps V^* Vdot + H - V^* H V + eps K) V^* on ``t_grid``.

    Vdot is a centered difference of V with one Richardson step.
    """
    h = family.h if h is None else h
    out = []
    for t in t_grid:
        Vd_h = (family.V(t + h, eps) - family.V(t - h, eps)) / (2 * h)
        Vd_h2 = (family.V(t + h / 2, eps) - family.V(t - h / 2, eps)) / h
        Vdot = (4 * Vd_h2 - Vd_h) / 3
        V = family.V(t, eps)
        H = family.data(t).H
        K = family.expansion(t).K(eps)
        inner = 1j * eps * V.conj().T @ Vdot + H - V.conj().T @ H @ V + eps * K
        out.append(np.linalg.norm(V @ inner @ V.conj().T, 2))
    return np.array(out)
