"""Adiabatic currents, Berry curvature over twist tori and Chern numbers.

Twisted Hamiltonians are handled through :class:`TwistedFamily`, a sum of
time coefficients times charged families exp(-i theta . g) G_g.  Derivatives
in the twist angles are therefore exact, and projection derivatives in the
angles follow from first-order perturbation theory.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .adiabatic import AdiabaticFamily
from .errors import GridRefinementError, TwistStepError
from .fock import FockSector, dense
from .interaction import (
    Interaction,
    LinearPath,
    TimeDependentInteraction,
    _constant,
    beta_family,
    twist_family,
)
from .propagate import Schedule, composite_evolutions, evolve, schedule_eval
from .spectral import SpectralData, eig_cluster, projection_derivative, reduced_resolvent

# ----------------------------------------------------------------------------
# twisted families


class TwistedFamily:
    """H(t, theta) = sum_k c_k(t) H_k(theta) with H_k(theta) a charged sum.

    Parameters
    ----------
    coefs : list of callables ``c(t, order)``
    phase_sums : list of :class:`~superadiabatic.interaction.PhaseSum`
    n_angles : int
    volume : int
        Number of lattice sites (used to normalize current densities).
    """

    def __init__(self, coefs, phase_sums, n_angles: int, volume: int):
        self.coefs = list(coefs)
        self.phase_sums = list(phase_sums)
        self.n_angles = n_angles
        self.volume = volume

    @classmethod
    def from_interaction(cls, phi, sector: FockSector, kind: str = "alpha", r: Optional[int] = None):
        """Build from an :class:`Interaction` or a component-based time-dependent one.

        ``kind="alpha"`` twists with the shifted position operators,
        ``kind="beta"`` with the half-space number operators.
        """
        if isinstance(phi, Interaction):
            comps = [(_constant(1.0), phi)]
        elif isinstance(phi, TimeDependentInteraction) and phi._components is not None:
            comps = phi._components
        else:
            raise TypeError("need an Interaction or a TimeDependentInteraction built from components")
        if kind == "alpha":
            fams = [twist_family(p) for _, p in comps]
        elif kind == "beta":
            fams = [beta_family(p, r) for _, p in comps]
        else:
            raise ValueError(f"unknown twist kind {kind!r}")
        lat = comps[0][1].lattice
        return cls([c for c, _ in comps], [f.assemble(sector) for f in fams], fams[0].n_angles, lat.n_sites)

    def H(self, t: float, theta, order: int = 0) -> np.ndarray:
        """order-th time derivative of H(t, theta)."""
        out = 0
        for c, ps in zip(self.coefs, self.phase_sums):
            v = c(t, order)
            if v != 0:
                out = out + v * dense(ps(theta))
        return out if not np.isscalar(out) else np.zeros((self.phase_sums[0].dim,) * 2, dtype=complex)

    def dtheta(self, t: float, theta, k: int) -> np.ndarray:
        """dH/dtheta_k at (t, theta)."""
        out = np.zeros((self.phase_sums[0].dim,) * 2, dtype=complex)
        for c, ps in zip(self.coefs, self.phase_sums):
            v = c(t, 0)
            if v != 0:
                out = out + v * dense(ps(theta, (k,)))
        return out

    def currents(self, t: float, theta=None) -> list:
        """Current operators J_k(t) = dH/dtheta_k, by default at theta = 0."""
        theta = np.zeros(self.n_angles) if theta is None else theta
        return [self.dtheta(t, theta, k) for k in range(self.n_angles)]

    def path(self, theta=None) -> LinearPath:
        """The untwisted (or fixed-angle) path t -> H(t, theta)."""
        theta = np.zeros(self.n_angles) if theta is None else theta
        return LinearPath(self.coefs, [dense(ps(theta)) for ps in self.phase_sums])

    def static(self, t: float = 0.0) -> Callable:
        """theta -> H(t, theta)."""
        return lambda theta: self.H(t, theta)


# ----------------------------------------------------------------------------
# currents and response formulas


def current_density(rho, J: Sequence, eps: float = 1.0, volume: float = 1.0, tol: float = 1e-10) -> np.ndarray:
    """tr(rho J_k) / (eps |Lambda|) for every component.

    Raises ``ValueError`` if a component of ``J`` is not Hermitian or the
    trace has an imaginary part above ``tol`` (relative to ||rho|| ||J||).
    """
    rho = dense(rho)
    out = []
    for Jk in J:
        Jk = dense(Jk)
        scale = max(np.abs(Jk).max(), 1.0)
        if np.abs(Jk - Jk.conj().T).max() > 1e-12 * scale:
            raise ValueError("current operator is not Hermitian")
        v = np.trace(rho @ Jk)
        if abs(v.imag) > tol * scale * max(1.0, np.abs(rho).sum()):
            raise ValueError(f"current expectation has imaginary part {v.imag:.3e}")
        out.append(v.real / (eps * volume))
    return np.array(out)


def response_formulas(sd: SpectralData, Pdot, J: Sequence, rho_par, dP_dalpha: Sequence, volume: float = 1.0):
    """Leading-order adiabatic current density in two equivalent forms.

    f1_k = (i/|Lambda|) tr(rho_par (J_k R Pdot - Pdot R J_k)) and
    f2_k = (i/|Lambda|) tr(rho_par [Pdot, dP/dalpha_k]).

    Returns
    -------
    (f1, f2) : real arrays of length ``len(J)``
    """
    R = reduced_resolvent(sd)
    Pdot, rho = dense(Pdot), dense(rho_par)
    f1, f2 = [], []
    for Jk, dPk in zip(J, dP_dalpha):
        Jk, dPk = dense(Jk), dense(dPk)
        a = 1j * np.trace(rho @ (Jk @ R @ Pdot - Pdot @ R @ Jk)) / volume
        b = 1j * np.trace(rho @ (Pdot @ dPk - dPk @ Pdot)) / volume
        f1.append(a.real)
        f2.append(b.real)
    return np.array(f1), np.array(f2)


def eigensum_current(sd: SpectralData, Pdot, J: Sequence, volume: float = 1.0, state: Optional[np.ndarray] = None):
    """-(2/|Lambda|) Im sum_{n outside} <phi_n, d_t phi_0><phi_0, J phi_n>/(E_n - E_0).

    ``state`` is the vector phi_0 in ran P (default: first cluster
    eigenvector).  In the parallel gauge d_t phi_0 = Pdot phi_0.
    """
    phi0 = sd.frame[:, 0] if state is None else np.asarray(state)
    E0 = sd.E_star
    dphi = dense(Pdot) @ phi0
    outside = np.nonzero(~sd.in_cluster)[0]
    V = sd.evecs[:, outside]
    dE = sd.evals[outside] - E0
    a = V.conj().T @ dphi  # <phi_n, d_t phi_0>
    out = []
    for Jk in J:
        b = phi0.conj() @ dense(Jk) @ V  # <phi_0, J phi_n>
        out.append(-2.0 / volume * np.imag(np.sum(a * b / dE)))
    return np.array(out)


def aligned_state(H, selector="ground", reference: Optional[np.ndarray] = None, **eig_kw) -> np.ndarray:
    """Ground frame of ``H`` rotated to be closest to ``reference``."""
    from .spectral import align_frame

    F = eig_cluster(H, selector, **eig_kw).frame
    return F if reference is None else align_frame(reference, F)


def state_derivative(Hfun: Callable[[float], object], p: float, step: float = 1e-4, selector="ground", **eig_kw):
    """Gauge-aligned centered difference of the ground frame with one Richardson step.

    The frames at p +- h are aligned to the frame at p by polar factors of
    the overlaps, so the result is the derivative in the parallel gauge.
    """
    F0 = eig_cluster(Hfun(p), selector, **eig_kw).frame
    kappa = F0.shape[1]

    def frame(q):
        F = eig_cluster(Hfun(q), selector, **eig_kw).frame
        if F.shape[1] != kappa:
            raise TwistStepError(f"cluster size changed from {kappa} to {F.shape[1]} within step {step}")
        s = np.linalg.svd(F.conj().T @ F0, compute_uv=False)
        if s.min() < 0.5:
            raise TwistStepError(f"overlap matrix nearly singular (smallest singular value {s.min():.2e})")
        return aligned_state(Hfun(q), selector, F0, **eig_kw)

    d1 = (frame(p + step) - frame(p - step)) / (2 * step)
    d2 = (frame(p + step / 2) - frame(p - step / 2)) / step
    return F0, (4 * d2 - d1) / 3


def berry_current(family: TwistedFamily, t: float, step: float = 1e-4, selector="ground", **eig_kw) -> np.ndarray:
    """-(2/|Lambda|) Im <d_t phi_0, d_alpha_k phi_0> from gauge-aligned differences (kappa = 1)."""
    zero = np.zeros(family.n_angles)
    phi, dt = state_derivative(lambda s: family.H(s, zero), t, step, selector, **eig_kw)
    if phi.shape[1] != 1:
        raise ValueError("the Berry form needs a non-degenerate cluster")
    out = []
    for k in range(family.n_angles):
        def Hk(a, k=k):
            th = zero.copy()
            th[k] = a
            return family.H(t, th)

        phi_a, da = state_derivative(Hk, 0.0, step, selector, **eig_kw)
        # both frames are aligned to the same eigenvector up to a phase
        ph = np.vdot(phi_a[:, 0], phi[:, 0])
        ph = ph / abs(ph)
        out.append(-2.0 / family.volume * np.imag(np.vdot(dt[:, 0], da[:, 0] * ph)))
    return np.array(out)


def projection_twist_derivatives(
    family: TwistedFamily,
    t: float,
    sd: Optional[SpectralData] = None,
    theta=None,
    method: str = "analytic",
    step: float = 1e-4,
    selector="ground",
    eig_kw: Optional[dict] = None,
) -> list:
    """dP/dtheta_k at (t, theta) for all k.

    ``method="analytic"`` uses the exact dH/dtheta in first-order perturbation
    theory; ``method="fd"`` uses a centered difference of projections with one
    Richardson step and raises :class:`TwistStepError` if the cluster changes.
    """
    eig_kw = eig_kw or {}
    theta = np.zeros(family.n_angles) if theta is None else np.asarray(theta, dtype=float)
    if sd is None:
        sd = eig_cluster(family.H(t, theta), selector, **eig_kw)
    if method == "analytic":
        return [projection_derivative(sd, family.dtheta(t, theta, k)) for k in range(family.n_angles)]
    if method != "fd":
        raise ValueError(f"unknown method {method!r}")
    kappa = len(sd.cluster)

    def P_at(th):
        try:
            s = eig_cluster(family.H(t, th), selector, **eig_kw)
        except Exception as exc:  # gap closed inside the stencil
            raise TwistStepError(f"twist step {step} leaves the gapped region: {exc}") from exc
        if len(s.cluster) != kappa:
            raise TwistStepError(f"cluster size changed from {kappa} to {len(s.cluster)} within step {step}")
        return s.P

    out = []
    for k in range(family.n_angles):
        e = np.zeros(family.n_angles)
        e[k] = 1.0
        d1 = (P_at(theta + step * e) - P_at(theta - step * e)) / (2 * step)
        d2 = (P_at(theta + step / 2 * e) - P_at(theta - step / 2 * e)) / step
        out.append((4 * d2 - d1) / 3)
    return out


@dataclass
class ResponseRecord:
    """Current density and its leading-order predictions at one time."""

    t: float
    current: np.ndarray
    relative: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    eps: float
    M: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def discrepancy(self) -> float:
        """max_k |relative_k - f1_k|."""
        return float(np.max(np.abs(self.relative - self.f1)))


def persistent_current(family: TwistedFamily, times: Sequence[float], selector="ground", eig_kw=None) -> float:
    """max over t and ground states G of |tr(G J(t))|.

    The maximum over density matrices supported in ran P equals the largest
    absolute eigenvalue of the compressed current F^* J F.
    """
    eig_kw = eig_kw or {}
    worst = 0.0
    for t in times:
        F = eig_cluster(family.H(t, np.zeros(family.n_angles)), selector, **eig_kw).frame
        for Jk in family.currents(t):
            w = np.linalg.eigvalsh(F.conj().T @ Jk @ F)
            worst = max(worst, float(np.abs(w).max()))
    return worst


def response_series(
    family: TwistedFamily,
    eps: float,
    t_grid: Sequence[float],
    tol: float = 1e-9,
    method: str = "cfm4",
    selector="ground",
    eig_kw: Optional[dict] = None,
    M: Optional[int] = None,
) -> list:
    """Measured current density from full propagation versus the response formulas.

    The initial state is rho_0 = P(t_0)/kappa.  At each grid time the record
    holds the measured tr(rho J)/(eps |Lambda|), the same quantity relative
    to the stationary current, tr((rho - rho_par) J)/(eps |Lambda|), and f1,
    f2 with rho_par = P U_par rho_0 U_par^* P.  Without persistent currents the
    two measured values coincide.  The eigensum form is in ``diagnostics``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    adf = AdiabaticFamily(family.path(), selector, eig_kw=eig_kw)
    props = composite_evolutions(adf, eps, t_grid, tol, method, which=("U", "U_par"))
    d0 = adf.data(t_grid[0])
    rho0 = d0.P / len(d0.sd.cluster)
    records = []
    for k, t in enumerate(t_grid):
        d = adf.data(t)
        U, Up = props["U"].U[k], props["U_par"].U[k]
        rho = U @ rho0 @ U.conj().T
        # rho_par lies in ran P(t); compressing removes the integration error
        rho_par = d.P @ Up @ rho0 @ Up.conj().T @ d.P
        J = family.currents(t)
        dP = projection_twist_derivatives(family, t, d.sd)
        measured = current_density(rho, J, eps, family.volume)
        relative = measured - current_density(rho_par, J, eps, family.volume)
        f1, f2 = response_formulas(d.sd, d.Pdot, J, rho_par, dP, family.volume)
        diag = {"gap": d.sd.gap}
        if len(d.sd.cluster) == 1:
            diag["eigensum"] = eigensum_current(d.sd, d.Pdot, J, family.volume)
        records.append(ResponseRecord(float(t), measured, relative, f1, f2, eps, M or family.volume, diag))
    return records


# ----------------------------------------------------------------------------
# Berry curvature and Chern numbers


def berry_curvature(sd: SpectralData, dP1, dP2) -> float:
    """2 Im tr(P dP1 dP2), i.e. 2 Im <d_1 phi, d_2 phi> summed over the cluster."""
    return float(2.0 * np.imag(np.trace(sd.P @ dense(dP1) @ dense(dP2))))


@dataclass
class TwistGrid:
    """Ground frames on an n_g x n_g grid over the twist torus [0, 2 pi)^2."""

    n_g: int
    frames: np.ndarray  # (n_g, n_g, dim, kappa)
    offset: tuple = (0.0, 0.0)
    gaps: Optional[np.ndarray] = None

    @classmethod
    def build(cls, H_of_theta: Callable, n_g: int, selector="ground", offset=(0.0, 0.0), eig_kw=None) -> "TwistGrid":
        """Diagonalize ``H_of_theta(theta)`` at theta = offset + 2 pi (i, j)/n_g."""
        eig_kw = eig_kw or {}
        frames, gaps = None, np.zeros((n_g, n_g))
        kappa = None
        for i in range(n_g):
            for j in range(n_g):
                th = np.array(offset, dtype=float) + 2 * np.pi * np.array([i, j]) / n_g
                sd = eig_cluster(H_of_theta(th), selector, **eig_kw)
                if kappa is None:
                    kappa = len(sd.cluster)
                    frames = np.zeros((n_g, n_g, sd.dim, kappa), dtype=complex)
                elif len(sd.cluster) != kappa:
                    raise GridRefinementError(f"cluster size changes over the torus at node {(i, j)}")
                frames[i, j] = sd.frame
                gaps[i, j] = sd.gap
        return cls(n_g, frames, tuple(offset), gaps)

    @property
    def kappa(self) -> int:
        return self.frames.shape[-1]


def _link(Fa: np.ndarray, Fb: np.ndarray, tol: float) -> complex:
    d = np.linalg.det(Fa.conj().T @ Fb)
    if abs(d) < tol:
        raise GridRefinementError(f"link overlap determinant {abs(d):.2e} below {tol:.1e}; refine the grid")
    return d / abs(d)


def chern_number(grid: TwistGrid, link_tol: float = 1e-6):
    """Lattice field-strength Chern number of the ground bundle.

    Per plaquette the flux is arg(U_1(n) U_2(n + e_1) / (U_1(n + e_2) U_2(n)))
    with U_mu(n) = det(F(n)^* F(n + e_mu)) normalized to the unit circle.
    C = sum of fluxes / (2 pi); the sign is such that C agrees with
    (1/2 pi) times the integral of 2 Im <d_1 phi, d_2 phi>.

    Returns
    -------
    (C, fluxes) with ``fluxes`` of shape (n_g, n_g).
    """
    n = grid.n_g
    F = grid.frames
    U1 = np.empty((n, n), dtype=complex)
    U2 = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            U1[i, j] = _link(F[i, j], F[(i + 1) % n, j], link_tol)
            U2[i, j] = _link(F[i, j], F[i, (j + 1) % n], link_tol)
    W = U1 * np.roll(U2, -1, axis=0) * np.conj(np.roll(U1, -1, axis=1)) * np.conj(U2)
    fluxes = np.angle(W)
    return float(fluxes.sum() / (2 * np.pi)), fluxes


# ----------------------------------------------------------------------------
# Hall experiments


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def twist_ramp(s0: float = 1.0, schedule: Schedule = Schedule("flat")) -> Callable:
    """theta(s) = int_0^s f(u/s0) du: starts flat, then grows at unit rate.

    The integral uses 64-point Gauss-Legendre on [0, min(s, s0)], which
    matches adaptive quadrature to ~1e-16 for the preset schedules.
    """

    def integral(x):
        u = 0.5 * x * (_GL_NODES + 1.0)
        return 0.5 * x * float(np.dot(_GL_WEIGHTS, schedule_eval(u, schedule)[0]))

    full = s0 * integral(1.0)

    def value(s):
        if s <= 0:
            return 0.0
        if s >= s0:
            return full + (s - s0)
        return s0 * integral(s / s0)

    def ramp(s, order=0):
        if order == 0:
            return value(s)
        f, f1, _ = schedule_eval(s / s0, schedule)
        return float(f) if order == 1 else float(f1) / s0

    return ramp


@dataclass
class HallResult:
    """Measured Hall response along a twist ramp and its Berry-curvature prediction."""

    kind: str
    rate: float
    s: np.ndarray
    measured: np.ndarray
    relative: np.ndarray
    predicted: np.ndarray
    persistent: np.ndarray
    chern: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def discrepancy(self) -> float:
        return float(np.max(np.abs(self.relative - self.predicted)))


def hall_experiment(
    phi: Interaction,
    sector: FockSector,
    kind: str = "conductivity",
    rate: float = 0.1,
    s_grid: Sequence[float] = (1.0, 1.5, 2.0),
    s0: float = 1.0,
    tol: float = 1e-9,
    method: str = "cfm4",
    selector="ground",
    eig_kw: Optional[dict] = None,
    n_chern: Optional[int] = None,
    r: Optional[int] = None,
) -> HallResult:
    """Drive theta_2 along a ramp at slow rate ``rate`` and measure the 1-current.

    ``kind="conductivity"`` uses alpha twists and normalizes by |Lambda|;
    ``kind="conductance"`` uses beta twists without normalization.  In slow
    time s = rate * t the evolution is i rate dU/ds = H(theta(s)) U.

    ``measured`` is tr(rho I_1)/(rate * norm); ``relative`` subtracts the
    instantaneous ground-state current tr(P I_1); ``predicted`` is
    2 Im <d_1 phi, d_2 phi> theta'(s) / norm.  With ``n_chern`` the Chern
    number of the full twist torus is attached.
    """
    eig_kw = eig_kw or {}
    twist_kind = {"conductivity": "alpha", "conductance": "beta"}.get(kind)
    if twist_kind is None:
        raise ValueError(f"unknown Hall experiment {kind!r}")
    fam = TwistedFamily.from_interaction(phi, sector, twist_kind, r)
    if fam.n_angles != 2:
        raise ValueError("Hall experiments need a two-dimensional lattice")
    norm = fam.volume if kind == "conductivity" else 1.0
    ramp = twist_ramp(s0)
    theta = lambda s: np.array([0.0, ramp(s)])
    s_grid = np.concatenate([[0.0], np.asarray(s_grid, dtype=float)])
    prop = evolve(lambda s: fam.H(0.0, theta(s)), s_grid, rate, tol=tol, method=method, tag="physical")
    sd0 = eig_cluster(fam.H(0.0, theta(0.0)), selector, **eig_kw)
    rho0 = sd0.P / len(sd0.cluster)
    measured, relative, predicted, persistent = [], [], [], []
    for k, s in enumerate(s_grid[1:], start=1):
        th = theta(s)
        sd = eig_cluster(fam.H(0.0, th), selector, **eig_kw)
        I1 = fam.dtheta(0.0, th, 0)
        U = prop.U[k]
        rho = U @ rho0 @ U.conj().T
        cur = np.trace(rho @ I1).real
        stat = np.trace(sd.P @ I1).real / len(sd.cluster)
        dP = [projection_derivative(sd, fam.dtheta(0.0, th, j)) for j in range(2)]
        curv = berry_curvature(sd, dP[0], dP[1])
        measured.append(cur / (rate * norm))
        relative.append((cur - stat) / (rate * norm))
        predicted.append(curv * ramp(s, 1) / norm)
        persistent.append(stat)
    chern = None
    if n_chern:
        C, _ = chern_number(TwistGrid.build(fam.static(0.0), n_chern, selector, eig_kw=eig_kw))
        chern = C
    return HallResult(
        kind,
        rate,
        s_grid[1:],
        np.array(measured),
        np.array(relative),
        np.array(predicted),
        np.array(persistent),
        chern,
        {"substeps": prop.substeps, "error_estimate": prop.error_estimate},
    )
