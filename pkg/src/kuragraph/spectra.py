"""Kernel-operator spectra, transition points and the eigenvalue of the
linearised operator T[Z] = i*omega*Z + (K/2) P[Z].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import frequency as freq_mod
from .errors import AssumptionsNotMet, InvalidArgument, UnsupportedOperation
from .graphon import Graphon

DEFAULT_KMAX = 64
_ZERO_TOL = 1e-10


@dataclass(frozen=True)
class KernelSpectrum:
    """Eigenvalues in ascending order, with multiplicity.

    ``zeta_max`` is None when there is no positive eigenvalue (the ``0+``
    sentinel) and ``zeta_min`` is None when there is no negative one.
    ``modes`` holds (k, zeta_k) Fourier pairs for analytic convolution kernels.
    """

    eigenvalues: np.ndarray
    zeta_max: Optional[float]
    zeta_min: Optional[float]
    source: str
    modes: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class TransitionPoints:
    kc_plus: float
    kc_minus: float

    def classify(self, K: float) -> str:
        if K > self.kc_plus:
            return "unstable_positive_branch"
        if K < self.kc_minus:
            return "unstable_negative_branch"
        return "stable"


def _from_eigenvalues(vals, source, modes=()):
    vals = np.sort(np.asarray(vals, dtype=float))
    scale = float(np.max(np.abs(vals))) if vals.size else 0.0
    tol = _ZERO_TOL * scale
    pos = vals[vals > tol]
    neg = vals[vals < -tol]
    return KernelSpectrum(vals, float(pos.max()) if pos.size else None,
                          float(neg.min()) if neg.size else None, source, tuple(modes))


def fourier_modes(graphon: Graphon, k_max: int = DEFAULT_KMAX):
    """(k, zeta_k) for k = 0..k_max of a builtin ring kernel."""
    k = np.arange(k_max + 1)
    if graphon.kind in ("small_world", "ring_indicator"):
        p, r = (graphon.params if graphon.kind == "small_world" else (0.0, graphon.params[0]))
        zeta = np.empty(k_max + 1)
        zeta[0] = 2 * r + p - 4 * r * p
        kk = k[1:]
        zeta[1:] = (1 - 2 * p) * np.sin(2 * np.pi * kk * r) / (np.pi * kk)
    elif graphon.kind == "ring_exp":
        kappa = graphon.params[0]
        sign = np.where(k % 2 == 0, -1.0, 1.0)
        zeta = 2 * kappa / (kappa**2 + 4 * np.pi**2 * k**2) * (1 + sign * math.exp(-kappa / 2))
    else:
        raise UnsupportedOperation(f"no Fourier spectrum for graphon kind {graphon.kind!r}")
    return list(zip(k.tolist(), zeta.tolist()))


def analytic_spectrum(graphon: Graphon, k_max: int = DEFAULT_KMAX) -> KernelSpectrum:
    """Closed-form spectrum; Fourier modes k >= 1 appear twice (e^{+-2 pi i k x}).

    zeta_min is only the minimum over |k| <= k_max.
    """
    if k_max < 0:
        raise InvalidArgument("k_max must be nonnegative")
    if graphon.kind == "constant":
        p = graphon.params[0]
        return _from_eigenvalues([p] if p != 0 else [], "analytic", [(0, p)])
    modes = fourier_modes(graphon, k_max)
    vals = [modes[0][1]] + [z for _, z in modes[1:] for _ in (0, 1)]
    return _from_eigenvalues(vals, "analytic", modes)


def midpoint_grid(m: int) -> np.ndarray:
    return (np.arange(1, m + 1) - 0.5) / m


def kernel_matrix(graphon: Graphon, m: int, rule: str = "auto") -> np.ndarray:
    """(1/m) * W on the midpoint grid.

    With ``rule="auto"``, piecewise-constant ring graphons use exact cell
    averages instead of point values: with m*r an integer the grid offsets
    land exactly on the jump, and point values then bias every eigenvalue by
    up to (1-2p)/m.  ``rule="point"`` forces plain point evaluation.
    """
    x = midpoint_grid(m)
    if rule not in ("auto", "point"):
        raise InvalidArgument(f"unknown kernel rule {rule!r}")
    if rule == "auto" and graphon.step is not None:
        vals = graphon.cell_average(x[:, None], x[None, :], 1.0 / m)
    else:
        vals = graphon(x[:, None], x[None, :])
    vals = 0.5 * (vals + vals.T)
    return vals / m


def nystrom_spectrum(graphon: Graphon, m: int, rule: str = "auto") -> KernelSpectrum:
    if m < 8:
        raise InvalidArgument(f"Nystrom discretisation needs m >= 8, got {m}")
    vals = np.linalg.eigvalsh(kernel_matrix(graphon, m, rule))
    return _from_eigenvalues(vals, f"nystrom({m})")


def spectrum_for(graphon: Graphon, k_max: int = DEFAULT_KMAX, m: int = 512) -> KernelSpectrum:
    """Analytic spectrum when one exists, Nystrom otherwise."""
    try:
        return analytic_spectrum(graphon, k_max)
    except UnsupportedOperation:
        return nystrom_spectrum(graphon, m)


def match_eigenvalues(reference, candidates):
    """Greedy nearest matching of each reference eigenvalue to an unused
    candidate; returns the matched candidates in reference order."""
    pool = list(np.asarray(candidates, dtype=float))
    out = []
    for z in reference:
        i = int(np.argmin([abs(c - z) for c in pool]))
        out.append(pool.pop(i))
    return np.array(out)


def transition_points(spectrum: KernelSpectrum, dist) -> TransitionPoints:
    if not dist.assumptions_met:
        raise AssumptionsNotMet(
            "frequency density is not even/unimodal: the transition-point formula "
            "relies on the eigenvalue of T being real and unique")
    c = 2.0 / (math.pi * dist.g0)
    kp = math.inf if spectrum.zeta_max is None else c / spectrum.zeta_max
    km = -math.inf if spectrum.zeta_min is None else c / spectrum.zeta_min
    return TransitionPoints(kp, km)


def K_of_zeta(zeta: float, dist) -> float:
    """Onset coupling 2 / (pi g(0) |zeta|) of the eigenvalue branch of zeta."""
    if zeta == 0:
        raise InvalidArgument("zeta = 0 carries no eigenvalue branch")
    return 2.0 / (math.pi * dist.g0 * abs(zeta))


def D_lambda(dist, lam: complex) -> complex:
    """D(lambda) = int g(omega) / (lambda - i omega) d omega, Re lambda != 0.

    The Cauchy-type kernel peaks at omega = Im(lambda) with width |Re lambda|,
    so a sinh-graded trapezoid rule centred there is used.
    """
    lam = complex(lam)
    x, y = lam.real, lam.imag
    if x == 0.0:
        raise InvalidArgument("D(lambda) is singular on the imaginary axis")
    a = min(abs(x), dist.scale)
    # poles of g sit ~scale/|y| from the real t-axis once the rule is shifted to y
    dt = 0.1 * min(1.0, dist.scale / (abs(y) + dist.scale))
    m = freq_mod.graded_step_count(dist, a, centre=y, dt=dt)
    nodes, weights = freq_mod.quadrature(dist, m, "graded", scale=a, centre=y)
    # split real and imaginary parts to keep the real-axis value exactly real
    dy = y - nodes
    denom = x * x + dy * dy
    re = float(np.sum(weights * x / denom))
    im = float(np.sum(weights * (-dy) / denom)) if y != 0.0 else 0.0
    return complex(re, im)


def solve_eigenvalue(dist, zeta: float, K: float, xtol: float = 1e-13) -> Optional[float]:
    """Real eigenvalue lambda(zeta, K) of T, or None when K <= K(zeta).

    Solves int x/(x^2+omega^2) g d omega = 2/(zeta K) for x by bisection;
    the left side decreases from pi g(0) to 0 on x > 0.
    """
    if zeta == 0:
        raise InvalidArgument("zeta = 0 is not an eigenvalue of T")
    if not K > 0:
        raise InvalidArgument("solve_eigenvalue covers K > 0 only")
    if K <= K_of_zeta(zeta, dist):
        return None
    target = 2.0 / (abs(zeta) * K)

    def f(x):
        return D_lambda(dist, x).real - target

    lo, hi = 1e-12, 1.0
    if f(lo) <= 0:
        return None  # K within rounding of K(zeta)
    while f(hi) > 0:
        lo, hi = hi, 2.0 * hi
    while hi - lo > xtol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    return math.copysign(x, zeta)


def discretized_T_blocks(graphon: Graphon, dist, K: float, m_omega: int, m_x: int,
                         scheme: str = "standard"):
    """Decoupled blocks of the lattice matrix for T.

    On the lattice omega_j x x_l the operator is
    i*Omega (x) I + (K/2) (1 w^T) (x) Wx with Wx the kernel matrix.
    Rotating x by the eigenvectors of Wx splits it into blocks
    i*Omega + (K/2) zeta_l 1 w^T, one per kernel eigenvalue zeta_l.
    """
    nodes, weights = freq_mod.quadrature(dist, m_omega, scheme)
    zetas = np.linalg.eigvalsh(kernel_matrix(graphon, m_x))
    base = np.diag(1j * nodes)
    return [(z, base + 0.5 * K * z * np.outer(np.ones(m_omega), weights)) for z in zetas]


def discretized_T_matrix(graphon: Graphon, dist, K: float, m_omega: int, m_x: int,
                         scheme: str = "standard") -> np.ndarray:
    """Full (m_omega*m_x) square matrix, index j*m_x + l.  Used as a check on
    the block route."""
    nodes, weights = freq_mod.quadrature(dist, m_omega, scheme)
    wx = kernel_matrix(graphon, m_x)
    return (np.kron(np.diag(1j * nodes), np.eye(m_x))
            + 0.5 * K * np.kron(np.outer(np.ones(m_omega), weights), wx))


def discretized_T_abscissa(graphon: Graphon, dist, K: float, m_omega: int = 200, m_x: int = 64,
                           scheme: str = "standard") -> float:
    """Largest real part of the eigenvalues of the lattice discretisation of T."""
    if m_omega < 8 or m_x < 4:
        raise InvalidArgument("lattice too coarse")
    if K == 0:
        return 0.0
    blocks = discretized_T_blocks(graphon, dist, K, m_omega, m_x, scheme)
    tol = _ZERO_TOL * max(abs(z) for z, _ in blocks)
    best = -math.inf
    for z, block in blocks:
        if abs(z) <= tol:
            best = max(best, 0.0)  # block is i*Omega: purely imaginary
        else:
            best = max(best, float(np.max(np.linalg.eigvals(block).real)))
    return best


def zeta_l1_bound(graphon: Graphon) -> float:
    """int int W dx dy, a lower bound on zeta_max for nonnegative W."""
    probe = np.linspace(0.0, 1.0, 257)
    if np.any(graphon(probe[:, None], probe[None, :]) < 0):
        raise InvalidArgument("the L1 lower bound needs a nonnegative graphon")
    if graphon.kind == "constant":
        return graphon.params[0]
    x, w = np.polynomial.legendre.leggauss(20)
    if graphon.profile is not None:
        edges = {0.0, 0.5}
        if graphon.step is not None:
            edges.add(graphon.step[0])
        if graphon.kind == "mollified":
            r, delta = graphon.base.step[0], graphon.params[1]
            edges.update((r - delta / 2, r + delta / 2))
        edges = sorted(edges)
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            d = 0.5 * (a + b) + 0.5 * (b - a) * x
            total += 0.5 * (b - a) * float(np.sum(w * graphon.profile(d)))
        return 2.0 * total
    panels = 32
    edges = np.linspace(0.0, 1.0, panels + 1)
    pts = (0.5 * (edges[1:] + edges[:-1])[:, None] + 0.5 / panels * x).ravel()
    wts = np.broadcast_to(0.5 / panels * w, (panels, len(w))).ravel()
    return float(wts @ graphon(pts[:, None], pts[None, :]) @ wts)
