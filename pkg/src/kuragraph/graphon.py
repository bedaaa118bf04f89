"""Graphons, node grids and the graphs built from them.

A graphon is a symmetric kernel W: [0,1]^2 -> [0,1].  The builtin kinds are
all functions of the circle distance d(x, y) = min(|x-y|, 1-|x-y|), which is
what makes their kernel operators convolutions with closed-form spectra.

Weight and adjacency matrices are plain dense ``numpy`` arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidArgument

GRAPHON_KINDS = ("constant", "small_world", "ring_indicator", "ring_exp")

_BLOCK_ROWS = 512


def circle_distance(x, y):
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    return np.minimum(d, 1.0 - d)


@dataclass(frozen=True)
class Graphon:
    """Symmetric kernel on the unit square.

    ``profile`` is set for ring-type kinds and maps circle distance to value.
    Piecewise-constant ring kinds also carry ``step = (r, inside, outside)``:
    value ``inside`` for d <= r and ``outside`` otherwise.  ``lipschitz`` is
    ``math.inf`` for discontinuous kinds.
    """

    kind: str
    params: tuple
    lipschitz: float
    func: Callable = field(repr=False, compare=False)
    profile: Optional[Callable] = field(default=None, repr=False, compare=False)
    step: Optional[tuple] = None
    base: Optional["Graphon"] = None

    def __call__(self, x, y):
        return self.func(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    @property
    def piecewise_constant(self) -> bool:
        return self.step is not None or self.kind == "constant"

    @property
    def spec(self) -> str:
        """Config-string form (``kind:param[:param]``) for builtin kinds."""
        if self.kind in GRAPHON_KINDS:
            return ":".join([self.kind] + [repr(float(p)) for p in self.params])
        if self.kind == "mollified":
            return f"mollified({self.base.spec}, eps={self.params[0]!r})"
        return self.kind

    def sup_norm(self) -> float:
        if self.kind == "constant":
            return abs(self.params[0])
        if self.step is not None:
            return max(abs(self.step[1]), abs(self.step[2]))
        if self.kind == "ring_exp":
            return 1.0
        if self.kind == "mollified":
            return self.base.sup_norm()
        g = np.linspace(0.0, 1.0, 257)
        return float(np.max(np.abs(self(g[:, None], g[None, :]))))

    def cell_average(self, x, y, h):
        """Exact average of a piecewise-constant ring graphon over the square
        cells of side ``h`` centred at (x, y)."""
        if self.kind == "constant":
            return np.full(np.broadcast(x, y).shape, float(self.params[0]))
        if self.step is None:
            raise InvalidArgument(f"cell averages are only available for piecewise-constant kinds, not {self.kind}")
        r, inside, outside = self.step
        delta = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        # x - y over the cell pair has a triangular density on [delta-h, delta+h]
        prob = np.zeros_like(delta)
        for shift in (-1.0, 0.0, 1.0):
            prob += _tri_cdf(shift + r, delta, h) - _tri_cdf(shift - r, delta, h)
        return outside + (inside - outside) * prob


def _tri_cdf(t, centre, h):
    s = np.clip((t - centre) / h, -1.0, 1.0)
    return np.where(s <= 0.0, 0.5 * (1.0 + s) ** 2, 1.0 - 0.5 * (1.0 - s) ** 2)


def _ring(kind, params, profile, lipschitz, step=None):
    def func(x, y):
        return profile(circle_distance(x, y))

    return Graphon(kind, tuple(params), lipschitz, func, profile, step)


def constant(p: float) -> Graphon:
    if not 0.0 <= p <= 1.0:
        raise InvalidArgument(f"constant graphon needs p in [0, 1], got {p}")
    p = float(p)

    def func(x, y):
        return np.full(np.broadcast(x, y).shape, p)

    return Graphon("constant", (p,), 0.0, func)


def small_world(p: float, r: float) -> Graphon:
    """W_{p,r}: 1-p within circle distance r, p elsewhere (closed at d = r)."""
    if not (0.0 < p < 0.5 and 0.0 < r < 0.5):
        raise InvalidArgument(f"small_world needs p, r in (0, 1/2), got p={p}, r={r}")
    p, r = float(p), float(r)

    def profile(d):
        return np.where(d <= r, 1.0 - p, p)

    return _ring("small_world", (p, r), profile, math.inf, step=(r, 1.0 - p, p))


def ring_indicator(r: float) -> Graphon:
    """k-nearest-neighbour ring kernel G_r (the p = 0 small-world limit)."""
    if not 0.0 < r < 0.5:
        raise InvalidArgument(f"ring_indicator needs r in (0, 1/2), got {r}")
    r = float(r)

    def profile(d):
        return np.where(d <= r, 1.0, 0.0)

    return _ring("ring_indicator", (r,), profile, math.inf, step=(r, 1.0, 0.0))


def ring_exponential(kappa: float) -> Graphon:
    if not kappa > 0.0:
        raise InvalidArgument(f"ring_exp needs kappa > 0, got {kappa}")
    kappa = float(kappa)

    def profile(d):
        return np.exp(-kappa * d)

    # |d(x1,y1) - d(x2,y2)| <= |dx| + |dy| <= sqrt(2) * euclidean
    return _ring("ring_exp", (kappa,), profile, math.sqrt(2.0) * kappa)


def custom(func: Callable, lipschitz: float = math.inf, name: str = "custom") -> Graphon:
    """Wrap a vectorised symmetric evaluator ``func(x, y)``."""
    return Graphon(name if name else "custom", (), float(lipschitz), func)


def mollify(graphon: Graphon, eps: float) -> Graphon:
    """Lipschitz approximation of a piecewise-constant ring graphon.

    The jump at circle distance r is replaced by a linear ramp of width
    ``delta = eps**2 / (8 * jump)`` centred on r, which keeps the L2 error
    below eps.
    """
    if not eps > 0.0:
        raise InvalidArgument(f"eps must be positive, got {eps}")
    if graphon.kind == "constant":
        return graphon
    if graphon.step is None:
        raise InvalidArgument(f"mollify expects a piecewise-constant ring graphon, got {graphon.kind}")
    r, inside, outside = graphon.step
    jump = abs(inside - outside)
    delta = eps**2 / (8.0 * jump)
    delta = min(delta, r, 1.0 - 2.0 * r)  # ramp must stay inside (0, 1/2)
    lo, hi = r - delta / 2.0, r + delta / 2.0

    def profile(d):
        d = np.asarray(d, dtype=float)
        ramp = inside + (outside - inside) * ((d - lo) / delta)
        return np.where(d <= lo, inside, np.where(d >= hi, outside, ramp))

    def func(x, y):
        return profile(circle_distance(x, y))

    lip = math.sqrt(2.0) * jump / delta
    out = Graphon("mollified", (float(eps), delta), lip, func, profile, None, graphon)
    err = l2_distance(out, graphon)
    if not err < eps:
        raise InvalidArgument(f"mollification failed its L2 check: {err} >= {eps}")
    return out


def l2_distance(a: Graphon, b: Graphon, nodes: int = 20000) -> float:
    """||a - b||_{L2([0,1]^2)}.

    Ring kinds reduce to a 1-D integral over the circle offset; anything else
    falls back to a tensor Gauss-Legendre rule.
    """
    if a.profile is not None and b.profile is not None:
        # integrate over d in [0, 1/2] (offset u and 1-u give the same d)
        edges = {0.0, 0.5}
        for g in (a, b):
            if g.step is not None:
                edges.add(g.step[0])
            if g.kind == "mollified":
                edges.update((g.base.step[0] - g.params[1] / 2, g.base.step[0] + g.params[1] / 2))
        edges = sorted(e for e in edges if 0.0 <= e <= 0.5)
        x, w = np.polynomial.legendre.leggauss(16)
        total = 0.0
        for e0, e1 in zip(edges[:-1], edges[1:]):
            panels = max(1, int(math.ceil((e1 - e0) * nodes / 16)))
            bounds = np.linspace(e0, e1, panels + 1)
            mid = 0.5 * (bounds[1:] + bounds[:-1])[:, None]
            half = 0.5 * (bounds[1:] - bounds[:-1])[:, None]
            d = mid + half * x[None, :]
            diff = a.profile(d) - b.profile(d)
            total += float(np.sum(half * w[None, :] * diff**2))
        return math.sqrt(2.0 * total)
    x, w = _gauss_grid(512)
    diff = a(x[:, None], x[None, :]) - b(x[:, None], x[None, :])
    return math.sqrt(float(w @ diff**2 @ w))


def _gauss_grid(m, panels=64):
    q = m // panels
    x, w = np.polynomial.legendre.leggauss(q)
    edges = np.linspace(0.0, 1.0, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 / panels
    return (mid + half * x).ravel(), np.broadcast_to(half * w, (panels, q)).ravel()


def evaluate(graphon: Graphon, x, y):
    """Range-checked evaluation of W(x, y)."""
    xa, ya = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if np.any((xa < 0) | (xa > 1)) or np.any((ya < 0) | (ya > 1)):
        raise InvalidArgument("graphon arguments must lie in [0, 1]")
    out = graphon(xa, ya)
    return float(out) if np.ndim(out) == 0 else out


def parse_graphon(text: str) -> Graphon:
    """Parse ``constant:p``, ``small_world:p:r``, ``ring_indicator:r`` or ``ring_exp:kappa``."""
    parts = [s.strip() for s in text.strip().split(":")]
    kind, args = parts[0], parts[1:]
    arity = {"constant": 1, "small_world": 2, "ring_indicator": 1, "ring_exp": 1}
    if kind not in arity:
        raise InvalidArgument(f"unknown graphon kind {kind!r}; accepted kinds: {', '.join(GRAPHON_KINDS)}")
    if len(args) != arity[kind]:
        raise InvalidArgument(f"graphon {kind} takes {arity[kind]} parameter(s), got {len(args)}")
    try:
        vals = [float(a) for a in args]
    except ValueError:
        raise InvalidArgument(f"non-numeric graphon parameter in {text!r}") from None
    return {"constant": constant, "small_world": small_world,
            "ring_indicator": ring_indicator, "ring_exp": ring_exponential}[kind](*vals)


# --- node grids and graphs ---------------------------------------------------

@dataclass(frozen=True)
class NodeGrid:
    points: np.ndarray
    scheme: str = "uniform"
    seed: Optional[int] = None

    @property
    def n(self) -> int:
        return len(self.points)


def make_grid(n: int, scheme: str = "uniform", seed: Optional[int] = None) -> NodeGrid:
    if n < 1:
        raise InvalidArgument(f"grid size must be positive, got {n}")
    if scheme == "uniform":
        if seed is not None:
            raise InvalidArgument("uniform grids take no seed")
        pts = np.arange(1, n + 1, dtype=float) / n
    elif scheme == "iid_uniform":
        if seed is None:
            raise InvalidArgument("iid_uniform grids need a seed")
        pts = np.sort(np.random.default_rng(seed).uniform(0.0, 1.0, n))
    else:
        raise InvalidArgument(f"unknown grid scheme {scheme!r}; accepted: uniform, iid_uniform")
    pts.setflags(write=False)
    return NodeGrid(pts, scheme, seed)


def build_weighted_graph(graphon: Graphon, grid: NodeGrid) -> np.ndarray:
    """W_nij = W(xi_i, xi_j), diagonal included."""
    x = grid.points
    out = np.empty((len(x), len(x)))
    for s in range(0, len(x), _BLOCK_ROWS):
        out[s:s + _BLOCK_ROWS] = graphon(x[s:s + _BLOCK_ROWS, None], x[None, :])
    return out


def sample_random_graph(graphon: Graphon, grid: NodeGrid, seed: int) -> np.ndarray:
    """W-random graph: independent Bernoulli(W(xi_i, xi_j)) edges for i < j,
    symmetric, zero diagonal.  Returned as a float 0/1 matrix."""
    x = grid.points
    n = len(x)
    rng = np.random.default_rng(seed)
    adj = np.zeros((n, n))
    for s in range(0, n, _BLOCK_ROWS):
        rows = slice(s, min(n, s + _BLOCK_ROWS))
        prob = graphon(x[rows, None], x[None, :])
        if np.any((prob < 0.0) | (prob > 1.0)):
            raise InvalidArgument("graphon values must lie in [0, 1] to be edge probabilities")
        u = rng.random(prob.shape)
        adj[rows] = u < prob
    adj = np.triu(adj, 1)
    adj += adj.T
    return adj


def norm_2n(a) -> float:
    """sqrt(n^-2 sum_ij A_ij^2)."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        raise InvalidArgument("empty matrix")
    n = a.shape[0]
    return math.sqrt(float(np.sum(a * a))) / n


def norm_1n(v) -> float:
    """sqrt(n^-1 sum_i v_i^2)."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise InvalidArgument("empty vector")
    return math.sqrt(float(np.mean(v * v)))
