"""Spectral clusters, projections, resolvents and the inverse Liouvillian.

Every map here is a spectral multiplier: in the eigenbasis of H an operator A
with entries A_nm is sent to w(E_n, E_m) A_nm.  Because the weights depend
only on energies (and on cluster membership, which never splits degenerate
levels) the results do not depend on the choice of eigenvectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import linalg as sla

from .errors import GapClosedError
from .fock import dense

Selector = Union[str, tuple, Sequence[int], np.ndarray]


@dataclass
class SpectralData:
    """Eigendecomposition of a Hermitian matrix with a flagged cluster.

    Attributes
    ----------
    evals : ndarray
        Ascending eigenvalues.
    evecs : ndarray
        Orthonormal eigenvectors (columns).
    cluster : ndarray
        Sorted indices of the cluster sigma_*.
    gap : float
        Distance from the cluster to the rest of the spectrum (inf if none).
    width : float
        Diameter of the cluster.
    eta : float
        Degeneracy tolerance used for grouping.
    t : float or None
        Parameter value the data belongs to (diagnostics only).
    """

    evals: np.ndarray
    evecs: np.ndarray
    cluster: np.ndarray
    gap: float
    width: float
    eta: float
    t: Optional[float] = None

    def __post_init__(self):
        mask = np.zeros(len(self.evals), dtype=bool)
        mask[self.cluster] = True
        self.in_cluster = mask

    @property
    def dim(self) -> int:
        return len(self.evals)

    @property
    def E_min(self) -> float:
        return float(self.evals[self.cluster].min())

    @property
    def E_max(self) -> float:
        return float(self.evals[self.cluster].max())

    @property
    def E_star(self) -> float:
        """Mean cluster energy (the eigenvalue itself when the width is zero)."""
        return float(self.evals[self.cluster].mean())

    @property
    def frame(self) -> np.ndarray:
        """Orthonormal basis of ran P_* (columns)."""
        return self.evecs[:, self.cluster]

    @property
    def P(self) -> np.ndarray:
        F = self.frame
        return F @ F.conj().T

    def to_eig(self, A) -> np.ndarray:
        V = self.evecs
        return V.conj().T @ dense(A) @ V

    def from_eig(self, A) -> np.ndarray:
        V = self.evecs
        return V @ A @ V.conj().T

    def multiplier(self, weights: np.ndarray, A) -> np.ndarray:
        """V (weights * V^* A V) V^*."""
        return self.from_eig(weights * self.to_eig(A))

    def cross_mask(self) -> np.ndarray:
        """True where exactly one of n, m lies in the cluster."""
        c = self.in_cluster
        return c[:, None] != c[None, :]


def _groups(evals: np.ndarray, eta: float) -> np.ndarray:
    """Label of the near-degenerate group of each sorted eigenvalue."""
    jumps = np.diff(evals) > eta
    return np.concatenate([[0], np.cumsum(jumps)])


def eig_cluster(
    H,
    selector: Selector = "ground",
    eta: Optional[float] = None,
    g_min: float = 1e-8,
    t: Optional[float] = None,
) -> SpectralData:
    """Diagonalize ``H`` and select a spectral cluster.

    Parameters
    ----------
    H : Hermitian matrix (dense or sparse)
    selector : {"ground"}, ("window", f_minus, f_plus) or index sequence
        Eigenvalues within ``eta`` of each other are kept together: a
        selection touching a near-degenerate group is extended to all of it.
    eta : float, optional
        Degeneracy tolerance, default ``1e-8 * max|E|``.
    g_min : float
        Smallest acceptable gap; below it :class:`GapClosedError` is raised.
    t : float, optional
        Recorded in the result and in errors.
    """
    A = dense(H)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("H must be a square matrix")
    evals, evecs = np.linalg.eigh(A)
    scale = max(float(np.abs(evals).max()), 1e-300)
    eta = 1e-8 * scale if eta is None else float(eta)
    labels = _groups(evals, eta)

    if isinstance(selector, str):
        if selector != "ground":
            raise ValueError(f"unknown selector {selector!r}")
        chosen = labels == 0
    elif isinstance(selector, tuple) and len(selector) == 3 and selector[0] == "window":
        lo, hi = float(selector[1]), float(selector[2])
        chosen = (evals >= lo) & (evals <= hi)
    else:
        idx = np.asarray(selector, dtype=int).ravel()
        if idx.size and (idx.min() < 0 or idx.max() >= len(evals)):
            raise ValueError("cluster index out of range")
        chosen = np.zeros(len(evals), dtype=bool)
        chosen[idx] = True
    if not chosen.any():
        raise ValueError("selector picked an empty cluster")
    chosen = np.isin(labels, np.unique(labels[chosen]))
    cluster = np.nonzero(chosen)[0]
    inside = evals[cluster]
    outside = evals[~chosen]
    if outside.size:
        gap = float(np.min(np.abs(outside[:, None] - inside[None, :])))
        between = (outside > inside.min()) & (outside < inside.max())
        if between.any():
            raise ValueError("cluster is not a contiguous patch of the spectrum")
    else:
        gap = np.inf
    width = float(inside.max() - inside.min())
    if gap < g_min:
        raise GapClosedError(f"spectral gap {gap:.3e} below threshold {g_min:.3e}", t=t, spectrum=evals[: len(cluster) + 4])
    return SpectralData(evals, evecs, cluster, gap, width, eta, t)


def split_od(A, P):
    """Return ``(A_D, A_OD)`` with respect to the projection ``P``."""
    A = dense(A)
    P = dense(P)
    Q = np.eye(P.shape[0]) - P
    diag = P @ A @ P + Q @ A @ Q
    return diag, A - diag


def liouvillian(H, A) -> np.ndarray:
    """-i [H, A]."""
    H, A = dense(H), dense(A)
    return -1j * (H @ A - A @ H)


def reduced_resolvent(sd: SpectralData, E: Optional[float] = None) -> np.ndarray:
    """sum over m outside the cluster of P_m / (E_m - E)."""
    if E is None:
        if sd.width > sd.eta:
            raise ValueError("cluster has nonzero width; supply a reference energy")
        E = sd.E_star
    d = np.zeros(sd.dim)
    out = ~sd.in_cluster
    d[out] = 1.0 / (sd.evals[out] - E)
    V = sd.evecs
    return (V * d) @ V.conj().T


def smoothstep5(x):
    """Quintic smoothstep on [0, 1], clamped outside."""
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10 - 15 * x + 6 * x**2)


def filter_weight(omega, g: float, delta_tilde: float) -> np.ndarray:
    """sqrt(2 pi) times the filter's Fourier transform at ``omega``.

    Equals -i/omega for |omega| >= g and vanishes for |omega| <= delta_tilde.
    """
    omega = np.asarray(omega, dtype=float)
    c = smoothstep5((np.abs(omega) - delta_tilde) / (g - delta_tilde))
    out = np.zeros(omega.shape, dtype=complex)
    nz = c > 0
    out[nz] = -1j * c[nz] / omega[nz]
    return out


def inverse_liouvillian_weights(
    sd: SpectralData,
    mode: str = "exact",
    g: Optional[float] = None,
    delta_tilde: Optional[float] = None,
) -> np.ndarray:
    E = sd.evals
    diff = E[:, None] - E[None, :]  # E_n - E_m
    if mode == "exact":
        w = np.zeros((sd.dim, sd.dim), dtype=complex)
        mask = sd.cross_mask()
        w[mask] = 1j / diff[mask]
        return w
    if mode == "filter":
        g = sd.gap if g is None else float(g)
        if g > sd.gap * (1 + 1e-12):
            raise ValueError(f"requested gap {g} exceeds the spectral gap {sd.gap}")
        if delta_tilde is None:
            delta_tilde = 0.5 * (sd.width + g)
        if not sd.width <= delta_tilde < g:
            raise ValueError("need width <= delta_tilde < g")
        return filter_weight(-diff, g, delta_tilde)
    raise ValueError(f"unknown inverse Liouvillian mode {mode!r}")


def inverse_liouvillian(
    sd: SpectralData,
    A,
    mode: str = "exact",
    g: Optional[float] = None,
    delta_tilde: Optional[float] = None,
) -> np.ndarray:
    """Spectral inverse of the Liouvillian, I(A) = sum w(n, m) P_n A P_m.

    ``mode="exact"`` uses i/(E_n - E_m) on pairs straddling the cluster and
    zero elsewhere.  ``mode="filter"`` uses the smooth filter with the given
    ``g`` (default: the gap) and ``delta_tilde`` (default: midway between the
    width and ``g``).
    """
    return sd.multiplier(inverse_liouvillian_weights(sd, mode, g, delta_tilde), A)


def projection_derivative(sd: SpectralData, Hdot) -> np.ndarray:
    """First-order change of P_* under H -> H + s Hdot."""
    E = sd.evals
    c = sd.in_cluster
    w = np.zeros((sd.dim, sd.dim))
    rows = c[:, None] & ~c[None, :]
    cols = ~c[:, None] & c[None, :]
    diff = E[:, None] - E[None, :]
    w[rows] = 1.0 / diff[rows]
    w[cols] = -1.0 / diff[cols]
    return sd.multiplier(w, Hdot)


def align_frame(reference: np.ndarray, frame: np.ndarray) -> np.ndarray:
    """Rotate ``frame`` by the unitary polar factor of its overlap with ``reference``.

    The result spans the same subspace and is as close as possible to
    ``reference`` in Frobenius norm.
    """
    overlap = frame.conj().T @ reference
    u, _ = sla.polar(overlap)
    return frame @ u


def cluster_projection(H, selector: Selector = "ground", **kw) -> np.ndarray:
    return eig_cluster(H, selector, **kw).P
