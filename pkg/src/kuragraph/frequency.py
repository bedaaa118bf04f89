"""Intrinsic-frequency distributions: density, sampling and quadrature.

Two quadrature schemes are provided:

``"standard"``
    Cauchy: omega = delta * tan(u) maps g(omega) d omega to du / pi on
    (-pi/2, pi/2), integrated with composite Gauss-Legendre.
    Gaussian: Gauss-Hermite, reweighted to the plain density.
    These spread nodes roughly evenly over the bulk of g and are what the
    mean-field lattice uses.

``"graded"``
    omega = centre + a*sinh(t) with the trapezoid rule in t.  Nodes cluster
    within ~a of ``centre`` while still reaching far into the tails, which is
    what resolving the Poisson kernel x/(x^2 + omega^2) at small x needs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import roots_hermite

from .errors import InvalidArgument, UnsupportedOperation

FREQ_KINDS = ("cauchy", "gaussian")


@dataclass(frozen=True)
class FrequencyDistribution:
    kind: str
    param: float
    scale: float
    g0: float
    assumptions_met: bool
    pdf: Callable = field(repr=False, compare=False)
    sampler: Optional[Callable] = field(default=None, repr=False, compare=False)
    custom_quadrature: Optional[Callable] = field(default=None, repr=False, compare=False)

    @property
    def spec(self) -> str:
        return f"{self.kind}:{self.param!r}" if self.kind in FREQ_KINDS else self.kind

    def density(self, omega):
        return self.pdf(np.asarray(omega, dtype=float))

    def sample(self, n: int, seed) -> np.ndarray:
        return sample(self, n, seed)

    def quadrature(self, m: int, scheme: str = "standard", **kw):
        return quadrature(self, m, scheme, **kw)


def cauchy(delta: float) -> FrequencyDistribution:
    if not delta > 0:
        raise InvalidArgument(f"cauchy needs delta > 0, got {delta}")
    delta = float(delta)

    def pdf(w):
        return delta / (math.pi * (w * w + delta * delta))

    def sampler(rng, n):
        return delta * rng.standard_cauchy(n)

    return FrequencyDistribution("cauchy", delta, delta, 1.0 / (math.pi * delta), True, pdf, sampler)


def gaussian(sigma: float) -> FrequencyDistribution:
    if not sigma > 0:
        raise InvalidArgument(f"gaussian needs sigma > 0, got {sigma}")
    sigma = float(sigma)
    c = 1.0 / (math.sqrt(2.0 * math.pi) * sigma)

    def pdf(w):
        return c * np.exp(-0.5 * (w / sigma) ** 2)

    def sampler(rng, n):
        return rng.normal(0.0, sigma, n)

    return FrequencyDistribution("gaussian", sigma, sigma, c, True, pdf, sampler)


def custom(density: Callable, sampler: Optional[Callable] = None, *, scale: float = 1.0,
           quadrature: Optional[Callable] = None, name: str = "custom") -> FrequencyDistribution:
    """User density.  ``sampler(rng, n)`` is optional; so is
    ``quadrature(m) -> (nodes, weights)``.  The evenness/monotonicity probe
    decides ``assumptions_met``."""
    ok = _probe_assumptions(density, scale)
    g0 = float(density(np.asarray(0.0)))
    return FrequencyDistribution(name, float("nan"), float(scale), g0, ok, density, sampler, quadrature)


def _probe_assumptions(density, scale, points=2001) -> bool:
    w = np.linspace(0.0, 20.0 * scale, points)
    g_pos = np.asarray(density(w), dtype=float)
    g_neg = np.asarray(density(-w), dtype=float)
    if not np.all(np.isfinite(g_pos)) or np.any(g_pos < 0):
        return False
    tol = 1e-12 * max(1.0, float(np.max(g_pos)))
    if np.any(np.abs(g_pos - g_neg) > tol):
        return False
    return bool(np.all(np.diff(g_pos) <= tol))


def parse_frequency(text: str) -> FrequencyDistribution:
    parts = [s.strip() for s in text.strip().split(":")]
    if parts[0] not in FREQ_KINDS:
        raise InvalidArgument(f"unknown frequency kind {parts[0]!r}; accepted kinds: {', '.join(FREQ_KINDS)}")
    if len(parts) != 2:
        raise InvalidArgument(f"frequency spec {text!r} must be kind:parameter")
    try:
        val = float(parts[1])
    except ValueError:
        raise InvalidArgument(f"non-numeric frequency parameter in {text!r}") from None
    return cauchy(val) if parts[0] == "cauchy" else gaussian(val)


def density(dist: FrequencyDistribution, omega):
    out = dist.density(omega)
    return float(out) if np.ndim(out) == 0 else out


def sample(dist: FrequencyDistribution, n: int, seed) -> np.ndarray:
    if n < 1:
        raise InvalidArgument(f"sample size must be positive, got {n}")
    if dist.sampler is None:
        raise UnsupportedOperation(f"distribution {dist.kind!r} has no sampler")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return np.asarray(dist.sampler(rng, n), dtype=float)


def quadrature(dist: FrequencyDistribution, m: int, scheme: str = "standard", *,
               scale: Optional[float] = None, centre: float = 0.0):
    """Nodes and weights with sum_j w_j f(omega_j) ~ int f(omega) g(omega) d omega."""
    if m < 2:
        raise InvalidArgument(f"quadrature needs m >= 2 nodes, got {m}")
    if scheme == "graded":
        return _graded(dist, m, dist.scale if scale is None else scale, centre)
    if scheme != "standard":
        raise InvalidArgument(f"unknown quadrature scheme {scheme!r}")
    if dist.kind == "cauchy":
        u, wu = _composite_legendre(m, -0.5 * math.pi, 0.5 * math.pi)
        nodes, weights = dist.param * np.tan(u), wu / math.pi
    elif dist.kind == "gaussian":
        x, w = roots_hermite(m)  # numpy's hermgauss overflows past m ~ 360
        nodes, weights = math.sqrt(2.0) * dist.param * x, w / math.sqrt(math.pi)
    elif dist.custom_quadrature is not None:
        return dist.custom_quadrature(m)
    else:
        return _graded(dist, m, dist.scale, 0.0)
    return _symmetrize(nodes, weights)


def _composite_legendre(m, a, b, per_panel=40):
    panels = 1
    for p in range(m // per_panel, 0, -1):
        if m % p == 0:
            panels = p
            break
    q = m // panels
    x, w = np.polynomial.legendre.leggauss(q)
    edges = np.linspace(a, b, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    return (mid + half * x).ravel(), (half * w).ravel()


def _symmetrize(nodes, weights):
    # exact mirror symmetry so odd moments cancel to rounding
    order = np.argsort(nodes)
    nodes, weights = nodes[order], weights[order]
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    return nodes, weights


def _tail_cutoff(dist) -> float:
    if dist.kind == "cauchy":
        return dist.param * 1e14  # neglected mass ~ 2/(pi*1e14)
    if dist.kind == "gaussian":
        return 40.0 * dist.param
    return 1e3 * dist.scale


def _graded(dist, m, a, centre):
    if not a > 0:
        raise InvalidArgument(f"graded quadrature needs a positive scale, got {a}")
    cut = _tail_cutoff(dist) + abs(centre)
    t0 = math.asinh((-cut - centre) / a)
    t1 = math.asinh((cut - centre) / a)
    t = np.linspace(t0, t1, m)
    dt = t[1] - t[0]
    nodes = centre + a * np.sinh(t)
    weights = dist.density(nodes) * a * np.cosh(t) * dt
    weights[0] *= 0.5
    weights[-1] *= 0.5
    return nodes, weights


def graded_step_count(dist, a, centre=0.0, dt=0.1) -> int:
    """Trapezoid node count giving step ``dt`` in the sinh variable."""
    cut = _tail_cutoff(dist) + abs(centre)
    span = math.asinh((cut - centre) / a) - math.asinh((-cut - centre) / a)
    return int(math.ceil(span / dt)) + 1
