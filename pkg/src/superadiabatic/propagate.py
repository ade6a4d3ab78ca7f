"""Switching schedules and unitary propagators.

All integrators multiply exact matrix exponentials of Hermitian matrices, so
every step is unitary up to rounding.  Accuracy is controlled by step
doubling: the number of substeps per output interval is doubled until two
successive solutions agree to ``tol`` at every output time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConvergenceError
from .fock import dense

# ----------------------------------------------------------------------------
# schedules


def _g(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def _g_derivs(s):
    """g, g', g'' of g(s) = exp(-1/s) (zero for s <= 0)."""
    s = np.asarray(s, dtype=float)
    g = _g(s)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), 0.0)
    g1 = g * inv**2
    g2 = g * (inv**4 - 2 * inv**3)
    return g, g1, g2


def _flat(s):
    a, a1, a2 = _g_derivs(s)
    b, b1, b2 = _g_derivs(1.0 - s)
    b1 = -b1
    n = a + b
    f = a / n
    f1 = (a1 * b - a * b1) / n**2
    f2 = ((a2 * b - a * b2) * n - 2 * (a1 * b - a * b1) * (a1 + b1)) / n**3
    return f, f1, f2


def _poly(coeffs):
    c = np.polynomial.Polynomial(coeffs)
    d1, d2 = c.deriv(1), c.deriv(2)
    return lambda s: (c(s), d1(s), d2(s))


_PRESETS = {
    "flat": (_flat, math.inf),
    "linear": (_poly([0, 1]), 0),
    "cubic": (_poly([0, 0, 3, -2]), 1),
    "quintic": (_poly([0, 0, 0, 10, -15, 6]), 2),
}


@dataclass(frozen=True)
class Schedule:
    """Switching function f on [0, 1] with f(0) = 0 and f(1) = 1.

    Presets: ``flat`` (all derivatives vanish at both ends), ``linear``,
    ``cubic`` and ``quintic`` smoothsteps.  Outside [0, 1] the value is
    clamped and the derivatives are zero.
    """

    name: str = "flat"

    def __post_init__(self):
        if self.name not in _PRESETS:
            raise ValueError(f"unknown schedule {self.name!r}; choose from {sorted(_PRESETS)}")

    @property
    def flatness(self) -> float:
        """Number of derivatives vanishing at both endpoints."""
        return _PRESETS[self.name][1]

    def __call__(self, s, order: int = 0):
        return schedule_eval(s, self)[order]

    def coefficient(self, amplitude: float = 1.0, offset: float = 0.0, t0: float = 0.0, duration: float = 1.0):
        """Time coefficient c(t) = offset + amplitude f((t - t0)/duration) as ``c(t, order)``."""

        def c(t, order=0):
            v = schedule_eval((t - t0) / duration, self)[order]
            if order == 0:
                return offset + amplitude * float(v)
            return amplitude * float(v) / duration**order

        return c


def schedule_eval(s, schedule: Schedule = Schedule()):
    """Return ``(f(s), f'(s), f''(s))`` of the schedule."""
    func = _PRESETS[schedule.name][0]
    s_arr = np.asarray(s, dtype=float)
    inside = (s_arr > 0) & (s_arr < 1)
    f = np.where(s_arr >= 1, 1.0, 0.0)
    f1 = np.zeros_like(s_arr)
    f2 = np.zeros_like(s_arr)
    if np.any(inside):
        v, v1, v2 = func(np.where(inside, s_arr, 0.5))
        f = np.where(inside, v, f)
        f1 = np.where(inside, v1, 0.0)
        f2 = np.where(inside, v2, 0.0)
    if np.ndim(s) == 0:
        return float(f), float(f1), float(f2)
    return f, f1, f2


# ----------------------------------------------------------------------------
# propagators


@dataclass
class PropagatorResult:
    """Propagators U(t_k, t_0) on an output grid."""

    times: np.ndarray
    U: list
    tag: str
    eps: float
    error_estimate: float
    substeps: int
    unitarity_error: float = 0.0

    def at(self, k: int) -> np.ndarray:
        return self.U[k]

    def heisenberg(self, B, k: int) -> np.ndarray:
        """U(t_k, t_0)^* B U(t_k, t_0)."""
        U = self.U[k]
        return U.conj().T @ dense(B) @ U


def expm_hermitian(G: np.ndarray, tau: float) -> np.ndarray:
    """exp(-i tau G) for Hermitian G via its eigendecomposition."""
    w, v = np.linalg.eigh(G)
    return (v * np.exp(-1j * tau * w)) @ v.conj().T


_GAUSS = (0.5 - math.sqrt(3) / 6, 0.5 + math.sqrt(3) / 6)
_CF_A = ((3 - 2 * math.sqrt(3)) / 12, (3 + 2 * math.sqrt(3)) / 12)


def _step(generator, t: float, h: float, sigma: float, method: str) -> np.ndarray:
    if method == "midpoint":
        return expm_hermitian(dense(generator(t + 0.5 * h)), h / sigma)
    if method == "cfm4":
        G1 = dense(generator(t + _GAUSS[0] * h))
        G2 = dense(generator(t + _GAUSS[1] * h))
        a1, a2 = _CF_A
        first = expm_hermitian(a2 * G1 + a1 * G2, h / sigma)
        second = expm_hermitian(a1 * G1 + a2 * G2, h / sigma)
        return second @ first
    raise ValueError(f"unknown method {method!r}")


_ORDER = {"midpoint": 2, "cfm4": 4}


def _solve(generator, times, n_sub, sigma, method, dim):
    U = np.eye(dim, dtype=complex)
    out = [U.copy()]
    for a, b in zip(times[:-1], times[1:]):
        h = (b - a) / n_sub
        for j in range(n_sub):
            U = _step(generator, a + j * h, h, sigma, method) @ U
        out.append(U.copy())
    return out


def _polish(U: np.ndarray) -> np.ndarray:
    """Nearest unitary (polar factor) to remove accumulated rounding."""
    u, _, vh = np.linalg.svd(U)
    return u @ vh


def evolve(
    generator: Callable[[float], object],
    times: Sequence[float],
    eps: float = 1.0,
    tol: float = 1e-8,
    method: str = "midpoint",
    n_sub: Optional[int] = None,
    norm_bound: Optional[float] = None,
    max_substeps: int = 2**16,
    tag: str = "physical",
) -> PropagatorResult:
    """Solve i eps dU/dt = G(t) U, U(t_0) = 1 on the output grid ``times``.

    Parameters
    ----------
    generator : callable
        ``t -> G(t)`` Hermitian.
    times : sequence
        Output grid; ``times[0]`` is the initial time.
    eps : float
        Scaling; 1 gives the macroscopic equation i dU/dt = G U.
    tol : float
        Target agreement between successive step-doubled solutions.
    method : {"midpoint", "cfm4"}
        Exponential midpoint (order 2) or a fourth-order commutator-free
        Magnus scheme.  Both are exactly unitary.
    n_sub : int, optional
        Initial number of substeps per output interval.  By default chosen
        so that h <= eps / (8 max||G||) on the grid (eps / max||G|| for cfm4,
        whose local error is fifth order).
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 1:
        raise ValueError("times must be a non-empty 1d grid")
    G0 = dense(generator(times[0]))
    dim = G0.shape[0]
    if len(times) == 1:
        return PropagatorResult(times, [np.eye(dim, dtype=complex)], tag, eps, 0.0, 0)
    if n_sub is None:
        if norm_bound is None:
            samples = np.linspace(times[0], times[-1], 9)
            norm_bound = max(np.linalg.norm(dense(generator(s)), 2) for s in samples)
        dt = float(np.max(np.diff(times)))
        h = eps / ((1 if method == "cfm4" else 8) * max(norm_bound, 1e-12))
        n_sub = max(1, int(math.ceil(dt / h)))
    p = _ORDER[method]
    prev = _solve(generator, times, n_sub, eps, method, dim)
    history = []
    while True:
        n_sub *= 2
        if n_sub > max_substeps:
            raise ConvergenceError(
                f"step doubling did not reach tol={tol:g} within {max_substeps} substeps",
                diagnostics={"history": history, "tag": tag, "eps": eps},
            )
        cur = _solve(generator, times, n_sub, eps, method, dim)
        diff = max(np.linalg.norm(a - b, 2) for a, b in zip(cur, prev))
        history.append((n_sub, diff))
        if diff < tol:
            break
        prev = cur
    uerr = 0.0
    out = []
    for U in cur:
        e = np.abs(U.conj().T @ U - np.eye(dim)).max()
        if e > 1e-13:
            U = _polish(U)
            e = np.abs(U.conj().T @ U - np.eye(dim)).max()
        uerr = max(uerr, e)
        out.append(U)
    return PropagatorResult(times, out, tag, eps, diff / (2**p - 1), n_sub, uerr)


# ----------------------------------------------------------------------------
# composite evolutions


def composite_evolutions(
    family,
    eps: float,
    t_grid: Sequence[float],
    tol: float = 1e-8,
    method: str = "midpoint",
    which: Sequence[str] = ("U", "U_par", "U_par1", "U_a", "U_sa"),
) -> dict:
    """Physical, parallel, first-order parallel, adiabatic and superadiabatic propagators.

    Parameters
    ----------
    family : AdiabaticFamily
        Supplies H(t), K_par(t), K_par1(t, eps), H_a(t, eps) and V(t, eps).
    which : sequence of str
        Subset of ``U, U_par, U_par1, U_a, U_sa`` to compute.  ``U_sa`` needs
        ``U_a`` and is assembled as V(t) U_a(t, 0) V(0)^* without a new solve.

    Returns
    -------
    dict mapping names to :class:`PropagatorResult`.
    """
    want = set(which)
    unknown = want - {"U", "U_par", "U_par1", "U_a", "U_sa"}
    if unknown:
        raise ValueError(f"unknown propagators {sorted(unknown)}")
    t_grid = np.asarray(t_grid, dtype=float)
    kw = dict(tol=tol, method=method)
    out = {}
    if "U" in want:
        out["U"] = evolve(lambda t: family.data(t).H, t_grid, eps, tag="physical", **kw)
    if "U_par" in want:
        out["U_par"] = evolve(family.K_par, t_grid, 1.0, tag="parallel", **kw)
    if "U_par1" in want:
        out["U_par1"] = evolve(lambda t: family.K_par1(t, eps), t_grid, 1.0, tag="parallel1", **kw)
    if want & {"U_a", "U_sa"}:
        Ua = evolve(lambda t: family.H_a(t, eps), t_grid, eps, tag="adiabatic", **kw)
        if "U_a" in want:
            out["U_a"] = Ua
        if "U_sa" in want:
            V0h = family.V(t_grid[0], eps).conj().T
            Usa = [family.V(t, eps) @ U @ V0h for t, U in zip(t_grid, Ua.U)]
            out["U_sa"] = PropagatorResult(
                Ua.times, Usa, "superadiabatic", eps, Ua.error_estimate, Ua.substeps, Ua.unitarity_error
            )
    return out


def intertwining_error(result: PropagatorResult, projections: Sequence) -> float:
    """max_k ||U(t_k, t_0) P(t_0) - P(t_k) U(t_k, t_0)||."""
    P0 = dense(projections[0])
    return max(
        float(np.linalg.norm(U @ P0 - dense(P) @ U, 2)) for U, P in zip(result.U, projections)
    )


def adiabatic_errors(family, B, eps: float, t_grid: Sequence[float], tol: float = 1e-8, method: str = "cfm4", props=None):
    """Errors of the leading and first-order adiabatic approximations of U^* B U.

    err0(t) = ||P(0) (U^* B U - U_par^* B U_par) P(0)|| and
    err1(t) = ||P(0) (U^* B U - B_par1(t)) P(0)|| with
    B_par1 = U_par1^* B U_par1 + i eps U_par^* (B R Pdot - Pdot R B) U_par.

    Returns ``(err0, err1)`` arrays over ``t_grid``.
    """
    from .spectral import reduced_resolvent

    B = dense(B)
    if props is None:
        props = composite_evolutions(family, eps, t_grid, tol, method, which=("U", "U_par", "U_par1"))
    P0 = family.data(t_grid[0]).P
    err0, err1 = [], []
    for k, t in enumerate(t_grid):
        U, Up, Up1 = props["U"].U[k], props["U_par"].U[k], props["U_par1"].U[k]
        d = family.data(t)
        R = reduced_resolvent(d.sd)
        exact = U.conj().T @ B @ U
        lead = Up.conj().T @ B @ Up
        corr = 1j * eps * Up.conj().T @ (B @ R @ d.Pdot - d.Pdot @ R @ B) @ Up
        first = Up1.conj().T @ B @ Up1 + corr
        err0.append(np.linalg.norm(P0 @ (exact - lead) @ P0, 2))
        err1.append(np.linalg.norm(P0 @ (exact - first) @ P0, 2))
    return np.array(err0), np.array(err1)
