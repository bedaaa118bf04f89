"""Finite-n Kuramoto dynamics on weighted and sampled graphs.

    dtheta_i/dt = omega_i + (K/n) sum_j W_ij sin(theta_j - theta_i)

Phases may be a vector of length n or an (n, B) array holding B independent
systems that share the coupling matrix (B couplings K, B frequency columns).
The batched form turns the O(n^2) force evaluation into one matrix-matrix
product, which is how parameter sweeps stay affordable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidArgument, NumericalFailure
from .graphon import Graphon, NodeGrid, build_weighted_graph, norm_1n, norm_2n

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class UniformCoupling:
    """Coupling matrix with every entry equal to ``value`` (diagonal included).

    The product with a vector collapses to a column sum, so the force costs
    O(n).  Only the constant-graphon weighted graph has this form.
    """

    n: int
    value: float = 1.0

    @property
    def shape(self):
        return (self.n, self.n)

    def dense(self) -> np.ndarray:
        return np.full((self.n, self.n), self.value)


def coupling_product(coupling, x: np.ndarray) -> np.ndarray:
    if isinstance(coupling, UniformCoupling):
        return np.broadcast_to(coupling.value * x.sum(axis=0), x.shape)
    return coupling @ x


def as_dense(coupling) -> np.ndarray:
    return coupling.dense() if isinstance(coupling, UniformCoupling) else np.asarray(coupling, dtype=float)


@dataclass
class OscillatorState:
    phases: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.phases = np.mod(np.asarray(self.phases, dtype=float), TWO_PI)


@dataclass(frozen=True)
class SimConfig:
    K: float
    dt: float = 0.01
    T: float = 10.0
    record_stride: int = 1
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.dt <= 0.1):
            raise InvalidArgument(f"dt must lie in (0, 0.1], got {self.dt}")
        if not self.T > 0:
            raise InvalidArgument(f"T must be positive, got {self.T}")
        if self.record_stride < 1:
            raise InvalidArgument("record_stride must be at least 1")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass(frozen=True)
class InitialCondition:
    """Conditional phase density given (omega, xi).

    ``wrapped_gaussian`` is the wrapped normal with variance 1/concentration
    about ``mean``; concentration = inf is a point mass.  ``custom`` takes a
    vectorised ``density(theta, omega, xi)``.
    """

    kind: str = "incoherent"
    concentration: float = 0.0
    mean: float = 0.0
    density: Optional[Callable] = field(default=None, repr=False, compare=False)

    @staticmethod
    def incoherent() -> "InitialCondition":
        return InitialCondition("incoherent")

    @staticmethod
    def wrapped_gaussian(concentration: float, mean: float = 0.0) -> "InitialCondition":
        if not concentration > 0:
            raise InvalidArgument("concentration must be positive")
        return InitialCondition("wrapped_gaussian", float(concentration), float(mean))

    @staticmethod
    def custom(density: Callable) -> "InitialCondition":
        return InitialCondition("custom", density=density)

    def harmonics(self, M: int, omega: np.ndarray, x: np.ndarray, grid_points: int = 256) -> np.ndarray:
        """rho_k(omega_j, x_l) = (1/2pi) int rho e^{ik theta} d theta for k = 0..M,
        shape (M+1, len(omega), len(x))."""
        shape = (M + 1, len(omega), len(x))
        k = np.arange(M + 1)
        if self.kind == "incoherent":
            out = np.zeros(shape, dtype=complex)
        elif self.kind == "wrapped_gaussian":
            var = 0.0 if math.isinf(self.concentration) else 1.0 / self.concentration
            c = np.exp(1j * k * self.mean - 0.5 * k * k * var)
            out = np.broadcast_to(c[:, None, None], shape).astype(complex)
        elif self.kind == "custom":
            check_normalised(self.density, omega, x)
            g = max(grid_points, 2 * M + 2)
            th = np.arange(g) * TWO_PI / g
            vals = self.density(th[:, None, None], omega[None, :, None], x[None, None, :])
            vals = np.broadcast_to(vals, (g, len(omega), len(x)))
            # (1/2pi) int rho e^{ik th} = mean over the periodic grid of rho e^{ik th}
            out = np.fft.ifft(vals, axis=0)[: M + 1].astype(complex)
            out[0] = 1.0 / TWO_PI
            return out
        else:
            raise InvalidArgument(f"unknown initial-condition kind {self.kind!r}")
        out = out / TWO_PI
        out[0] = 1.0 / TWO_PI
        return out


def check_normalised(density, omega=None, xi=None, tol=1e-6, grid_points=512):
    """Probe int_S density(theta, omega, xi) d theta = 1 on a few (omega, xi)."""
    om = np.array([-2.0, -0.5, 0.0, 0.7, 3.0]) if omega is None else np.asarray(omega, dtype=float)
    xs = np.array([0.0, 0.3, 0.5, 1.0]) if xi is None else np.asarray(xi, dtype=float)
    om, xs = om[:: max(1, len(om) // 8)], xs[:: max(1, len(xs) // 8)]
    th = np.arange(grid_points) * TWO_PI / grid_points
    vals = density(th[:, None, None], om[None, :, None], xs[None, None, :])
    vals = np.broadcast_to(vals, (grid_points, len(om), len(xs)))
    if np.any(vals < 0):
        raise InvalidArgument("initial phase density takes negative values")
    mass = vals.mean(axis=0) * TWO_PI
    if np.max(np.abs(mass - 1.0)) > tol:
        raise InvalidArgument(f"initial phase density is not normalised (mass range {mass.min():.6g}..{mass.max():.6g})")


def sample_initial(n: int, ic: InitialCondition, freqs, grid: NodeGrid, seed) -> OscillatorState:
    freqs = np.asarray(freqs, dtype=float)
    if len(freqs) != n or grid.n != n:
        raise InvalidArgument("frequencies and grid must both have length n")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if ic.kind == "incoherent":
        phases = rng.uniform(0.0, TWO_PI, n)
    elif ic.kind == "wrapped_gaussian":
        if math.isinf(ic.concentration):
            phases = np.full(n, ic.mean)
        else:
            phases = ic.mean + rng.normal(0.0, 1.0 / math.sqrt(ic.concentration), n)
    elif ic.kind == "custom":
        check_normalised(ic.density)
        phases = _inverse_cdf_draw(ic.density, freqs, grid.points, rng)
    else:
        raise InvalidArgument(f"unknown initial-condition kind {ic.kind!r}")
    return OscillatorState(phases, 0.0)


def _inverse_cdf_draw(density, freqs, xi, rng, grid_points=512, block=2048):
    edges = np.linspace(0.0, TWO_PI, grid_points + 1)
    mids = 0.5 * (edges[1:] + edges[:-1])
    u = rng.random(len(freqs))
    out = np.empty(len(freqs))
    for s in range(0, len(freqs), block):
        sl = slice(s, s + block)
        pdf = np.broadcast_to(density(mids[None, :], freqs[sl, None], xi[sl, None]),
                              (len(freqs[sl]), grid_points))
        cdf = np.concatenate([np.zeros((pdf.shape[0], 1)), np.cumsum(pdf, axis=1)], axis=1)
        cdf /= cdf[:, -1:]
        for i, row in enumerate(cdf):
            out[s + i] = np.interp(u[s + i], row, edges)
    return out


def rhs(theta, freqs, coupling, K, method: str = "matvec") -> np.ndarray:
    """Phase velocities.  ``method="matvec"`` expands
    sin(t_j - t_i) = sin t_j cos t_i - cos t_j sin t_i so the full weighted sum
    becomes W @ [cos, sin]; ``method="pairwise"`` forms every sine explicitly."""
    theta = np.asarray(theta, dtype=float)
    n = theta.shape[0]
    if coupling.shape != (n, n):
        raise InvalidArgument(f"coupling shape {coupling.shape} does not match {n} phases")
    K = np.asarray(K, dtype=float)
    if method == "matvec":
        c, s = np.cos(theta), np.sin(theta)
        if theta.ndim == 1:
            prod = coupling_product(coupling, np.column_stack([c, s]))
            force = c * prod[:, 1] - s * prod[:, 0]
        else:
            b = theta.shape[1]
            prod = coupling_product(coupling, np.concatenate([c, s], axis=1))
            force = c * prod[:, b:] - s * prod[:, :b]
    elif method == "pairwise":
        w = as_dense(coupling)
        if theta.ndim == 1:
            force = np.sum(w * np.sin(theta[None, :] - theta[:, None]), axis=1)
        else:
            force = np.column_stack([np.sum(w * np.sin(col[None, :] - col[:, None]), axis=1)
                                     for col in theta.T])
    else:
        raise InvalidArgument(f"unknown force method {method!r}")
    return freqs + (K / n) * force


def order_parameter(phases):
    """(r, psi) of n^-1 sum_j exp(i theta_j); psi = 0 when r < 1e-14.
    Works column-wise on (n, B) input."""
    z = np.mean(np.exp(1j * np.asarray(phases, dtype=float)), axis=0)
    r = np.abs(z)
    psi = np.where(r < 1e-14, 0.0, np.mod(np.angle(z), TWO_PI))
    if np.ndim(r) == 0:
        return float(r), float(psi)
    return r, psi


@dataclass
class Trajectory:
    times: np.ndarray
    r: np.ndarray
    psi: np.ndarray
    final: OscillatorState
    phases: Optional[np.ndarray] = None

    def steady_state_r(self, fraction: float = 0.2):
        return steady_state_r(self.times, self.r, fraction)


def steady_state_r(times, r, fraction: float = 0.2):
    """Mean of r over the final ``fraction`` of the horizon."""
    times = np.asarray(times)
    cut = times[-1] - fraction * (times[-1] - times[0])
    return np.mean(np.asarray(r)[times >= cut - 1e-12], axis=0)


def _rk4_step(theta, freqs, coupling, K, dt, method):
    k1 = rhs(theta, freqs, coupling, K, method)
    k2 = rhs(theta + 0.5 * dt * k1, freqs, coupling, K, method)
    k3 = rhs(theta + 0.5 * dt * k2, freqs, coupling, K, method)
    k4 = rhs(theta + dt * k3, freqs, coupling, K, method)
    return theta + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(state: OscillatorState, freqs, coupling, config: SimConfig, *,
              keep_phases: bool = False, method: str = "matvec", wrap: bool = True,
              K=None) -> Trajectory:
    """Fixed-step RK4.  Records (t, r, psi) at step 0 and every
    ``record_stride`` steps.  ``K`` overrides ``config.K`` (a length-B array
    for batched phases)."""
    theta = np.array(state.phases, dtype=float)
    freqs = np.asarray(freqs, dtype=float)
    if freqs.shape[0] != theta.shape[0]:
        raise InvalidArgument("frequency vector length does not match the state")
    K = config.K if K is None else K
    dt, steps, stride = config.dt, config.steps, config.record_stride
    times, rs, psis, snaps = [], [], [], []

    def record(step):
        r, psi = order_parameter(theta)
        times.append(state.time + step * dt)
        rs.append(r)
        psis.append(psi)
        if keep_phases:
            snaps.append(theta.copy())

    record(0)
    for step in range(1, steps + 1):
        theta = _rk4_step(theta, freqs, coupling, K, dt, method)
        if wrap:
            theta = np.mod(theta, TWO_PI)
        if not np.all(np.isfinite(theta)):
            raise NumericalFailure(f"non-finite phases at t = {state.time + step * dt:.6g}")
        if step % stride == 0 or step == steps:
            record(step)
    final = OscillatorState(theta, state.time + steps * dt)
    if not wrap:
        final.phases = theta
    return Trajectory(np.array(times), np.array(rs), np.array(psis), final,
                      np.array(snaps) if keep_phases else None)


def phase_distance(a, b) -> float:
    """||a - b||_{1,n} on plain real differences."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InvalidArgument("phase vectors differ in length")
    return norm_1n(a - b)


@dataclass
class CouplingComparison:
    sup_distance: float
    coupling_gap: float
    times: np.ndarray
    distances: np.ndarray

    @property
    def ratio(self) -> float:
        return self.sup_distance / self.coupling_gap if self.coupling_gap > 0 else math.nan


def _coupling_on(c, grid):
    if isinstance(c, Graphon):
        return build_weighted_graph(c, grid)
    return c


def compare_couplings(a, b, grid: NodeGrid, freqs, ic: InitialCondition, config: SimConfig,
                      method: str = "matvec") -> CouplingComparison:
    """Run the systems with couplings ``a`` and ``b`` (graphons or matrices)
    from the same initial phases and frequencies; report
    sup_t ||theta_a(t) - theta_b(t)||_{1,n} and ||A - B||_{2,n}."""
    wa, wb = _coupling_on(a, grid), _coupling_on(b, grid)
    if wa.shape != wb.shape or wa.shape[0] != grid.n:
        raise InvalidArgument("coupling matrices must both be n x n on the given grid")
    freqs = np.asarray(freqs, dtype=float)
    theta0 = sample_initial(grid.n, ic, freqs, grid, config.seed).phases
    ta, tb = theta0.copy(), theta0.copy()
    times, dists = [0.0], [0.0]
    for step in range(1, config.steps + 1):
        ta = _rk4_step(ta, freqs, wa, config.K, config.dt, method)
        tb = _rk4_step(tb, freqs, wb, config.K, config.dt, method)
        if step % config.record_stride == 0 or step == config.steps:
            times.append(step * config.dt)
            dists.append(phase_distance(ta, tb))
    if not (np.all(np.isfinite(ta)) and np.all(np.isfinite(tb))):
        raise NumericalFailure("non-finite phases in coupling comparison")
    dists = np.array(dists)
    gap = norm_2n(as_dense(wa) - as_dense(wb))
    return CouplingComparison(float(dists.max()), gap, np.array(times), dists)
