"""Mean-field (Vlasov) equation by Fourier-Galerkin truncation in the phase.

The conditional phase density rho(t, theta | omega, x) is stored through its
harmonics

    rho_k = (1/2pi) int rho e^{ik theta} d theta,   k = 0..M,
    rho   = rho_0 + sum_{k>=1} (rho_k e^{-ik theta} + c.c.),

on a lattice of frequency-quadrature nodes omega_j and midpoint x_l.  With
the order field h(x) = int int W(x, y) e^{i phi} rho g d phi d lambda dy the
transport equation becomes

    d rho_k/dt = ik omega rho_k + (kK/2) (h rho_{k-1} - conj(h) rho_{k+1}),

closed by rho_{M+1} = 0.  The rotation term is integrated exactly
(integrating-factor RK4), so K = 0 is a pure phase rotation to rounding and
high harmonics at large |omega| impose no stiffness limit.

The coupling terms still limit the step: once locked oscillators sharpen,
the harmonics up to M all carry O(1) amplitude and the coupling block has
spectral radius ~ M |K| sup|W|.  ``evolve`` therefore splits each requested
step into equal substeps of at most STEP_LIMIT / (M |K| sup|W|).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import frequency as freq_mod
from .dynamics import InitialCondition
from .errors import AssumptionsNotMet, InvalidArgument, NumericalFailure
from .graphon import Graphon
from .spectra import kernel_matrix, midpoint_grid, spectrum_for, transition_points

TWO_PI = 2.0 * math.pi
BLOWUP = 1e3
STEP_LIMIT = 0.5
CHECKPOINT_MAGIC = "kuragraph-meanfield-v1"


@dataclass
class MeanFieldState:
    coeffs: np.ndarray  # (M+1, m_omega, m_x) complex
    time: float
    omega: np.ndarray
    weights: np.ndarray
    x: np.ndarray
    freq_spec: str = ""
    scheme: str = "standard"

    @property
    def M(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def m_omega(self) -> int:
        return self.coeffs.shape[1]

    @property
    def m_x(self) -> int:
        return self.coeffs.shape[2]

    def copy(self) -> "MeanFieldState":
        return MeanFieldState(self.coeffs.copy(), self.time, self.omega, self.weights, self.x,
                              self.freq_spec, self.scheme)

    def order_parameter(self):
        """(r, psi) of int int int e^{i theta} rho g."""
        z = TWO_PI * np.sum(self.weights[:, None] * self.coeffs[1]) / self.m_x
        r = abs(z)
        return r, (math.atan2(z.imag, z.real) % TWO_PI if r >= 1e-14 else 0.0)

    def density(self, theta) -> np.ndarray:
        """rho(theta | omega_j, x_l), shape (len(theta), m_omega, m_x)."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        k = np.arange(1, self.M + 1)
        phase = np.exp(-1j * np.outer(theta, k))
        tail = np.tensordot(phase, self.coeffs[1:], axes=(1, 0))
        return self.coeffs[0].real[None] + 2.0 * tail.real


def init_meanfield(ic: InitialCondition, dist, graphon: Optional[Graphon], M: int = 64,
                   m_omega: int = 200, m_x: int = 64, scheme: str = "standard") -> MeanFieldState:
    """Lattice state for the initial conditional density.  ``graphon`` is not
    needed to build the state and is accepted for call symmetry."""
    if M < 2:
        raise InvalidArgument(f"need M >= 2 harmonics, got {M}")
    if m_omega < 8 or m_x < 8:
        raise InvalidArgument("lattice sizes must be at least 8")
    omega, weights = freq_mod.quadrature(dist, m_omega, scheme)
    x = midpoint_grid(m_x)
    coeffs = ic.harmonics(M, omega, x)
    return MeanFieldState(np.ascontiguousarray(coeffs), 0.0, omega, weights, x, dist.spec, scheme)


def order_field(coeffs1: np.ndarray, weights: np.ndarray, wx: np.ndarray) -> np.ndarray:
    """h(x_l) from the first harmonic; ``wx`` is the kernel matrix (W/m_x)."""
    return wx @ (TWO_PI * (weights @ coeffs1))


@dataclass
class MeanFieldRun:
    state: MeanFieldState
    times: np.ndarray
    r: np.ndarray
    psi: np.ndarray
    local: Optional[np.ndarray] = field(default=None)  # |h(x_l)| / int W(x_l, y) dy


def _nonlinear(y, kfac, weights, wx):
    h = order_field(y[1], weights, wx)[None, None, :]
    out = np.zeros_like(y)
    out[1:-1] = kfac[1:-1] * (h * y[:-2] - np.conj(h) * y[2:])
    out[-1] = kfac[-1] * h[0] * y[-2]
    return out


def evolve(state: MeanFieldState, dist, graphon: Graphon, K: float, dt: float = 0.01, T: float = 10.0,
           record_stride: int = 1, local: bool = False) -> MeanFieldRun:
    """Integrating-factor RK4 on the Galerkin system.  rho_0 is never touched."""
    if not (0.0 < dt <= 0.01):
        raise InvalidArgument(f"mean-field dt must lie in (0, 0.01], got {dt}")
    if not T > 0:
        raise InvalidArgument("T must be positive")
    if dist is not None and state.freq_spec and dist.spec != state.freq_spec:
        raise InvalidArgument(f"state was built for {state.freq_spec}, not {dist.spec}")
    M = state.M
    wx = kernel_matrix(graphon, state.m_x)
    row_mass = wx.sum(axis=1)
    k = np.arange(M + 1)
    kfac = (0.5 * K * k)[:, None, None]
    sub = substeps(dt, M, K, graphon)
    h = dt / sub
    e_half = np.exp(0.5j * h * k[:, None] * state.omega[None, :])[:, :, None]
    e_full = e_half * e_half
    w = state.weights

    y = state.coeffs.copy()
    steps = int(round(T / dt))
    times, rs, psis, locs = [], [], [], []

    def record(s, yy):
        st = MeanFieldState(yy, state.time + s * dt, state.omega, w, state.x)
        r, psi = st.order_parameter()
        times.append(st.time)
        rs.append(r)
        psis.append(psi)
        if local:
            hx = order_field(yy[1], w, wx)
            locs.append(np.abs(hx) / np.where(row_mass > 0, row_mass, 1.0))

    record(0, y)
    for s in range(1, steps + 1):
        for _ in range(sub):
            a = _nonlinear(y, kfac, w, wx)
            ey = e_half * y
            b = _nonlinear(ey + 0.5 * h * e_half * a, kfac, w, wx)
            c = _nonlinear(ey + 0.5 * h * b, kfac, w, wx)
            d = _nonlinear(e_full * y + h * e_half * c, kfac, w, wx)
            y = e_full * y + (h / 6.0) * (e_full * a + 2.0 * e_half * (b + c) + d)
        if s % record_stride == 0 or s == steps:
            peak = np.max(np.abs(y))
            if not np.isfinite(peak) or peak > BLOWUP:
                raise NumericalFailure(
                    f"Galerkin coefficients blew up (max |rho_k| = {peak:.3g}) at t = {state.time + s * dt:.6g}; "
                    f"increase M (currently {M}) or reduce K")
            record(s, y)
    final = MeanFieldState(y, state.time + steps * dt, state.omega, w, state.x, state.freq_spec, state.scheme)
    return MeanFieldRun(final, np.array(times), np.array(rs), np.array(psis),
                        np.array(locs) if local else None)


def substeps(dt: float, M: int, K: float, graphon: Graphon) -> int:
    """Substeps per requested step keeping M |K| sup|W| h <= STEP_LIMIT."""
    rate = M * abs(K) * graphon.sup_norm()
    return max(1, math.ceil(dt * rate / STEP_LIMIT - 1e-12))


def _weighted_norm(z, weights, m_x):
    return math.sqrt(float(np.sum(weights[:, None] * np.abs(z) ** 2)) / m_x)


@dataclass
class GrowthEstimate:
    rate: float
    times: np.ndarray
    log_norm: np.ndarray


def linearized_evolve(z0: np.ndarray, dist, graphon: Graphon, K: float, dt: float = 0.01, T: float = 40.0,
                      m_omega: int = 200, scheme: str = "standard", record_stride: int = 10) -> GrowthEstimate:
    """Integrate dZ/dt = i omega Z + (K/2) P[Z] on the (omega_j, x_l) lattice,
    P[Z](x) = int W(x, y) int Z(lambda, y) g d lambda dy.

    ``z0`` has shape (m_omega, m_x).  The rate is the least-squares slope of
    log ||Z(t)|| (g-weighted L2 on the lattice) over the final half of [0, T].
    The norm is renormalised as it goes so long horizons do not overflow.
    """
    z = np.array(z0, dtype=complex)
    if z.ndim != 2 or z.shape[0] != m_omega:
        raise InvalidArgument(f"initial field must have shape (m_omega={m_omega}, m_x)")
    omega, weights = freq_mod.quadrature(dist, m_omega, scheme)
    m_x = z.shape[1]
    norm0 = _weighted_norm(z, weights, m_x)
    if norm0 == 0.0:
        raise InvalidArgument("initial field is identically zero")
    wx = kernel_matrix(graphon, m_x)

    def N(v):
        return (0.5 * K) * (wx @ (weights @ v))[None, :]

    e_half = np.exp(0.5j * dt * omega)[:, None]
    e_full = e_half * e_half
    steps = int(round(T / dt))
    log_scale = math.log(norm0)
    z = z / norm0
    times, logs = [0.0], [log_scale]
    for s in range(1, steps + 1):
        a = N(z)
        ez = e_half * z
        b = N(ez + 0.5 * dt * e_half * a)
        c = N(ez + 0.5 * dt * b)
        d = N(e_full * z + dt * e_half * c)
        z = e_full * z + (dt / 6.0) * (e_full * a + 2.0 * e_half * (b + c) + d)
        if s % record_stride == 0 or s == steps:
            nz = _weighted_norm(z, weights, m_x)
            if not np.isfinite(nz) or nz == 0.0:
                raise NumericalFailure(f"linearised field degenerated at t = {s * dt:.6g}")
            log_scale += math.log(nz)
            z = z / nz
            times.append(s * dt)
            logs.append(log_scale)
    times, logs = np.array(times), np.array(logs)
    late = times >= 0.5 * times[-1]
    rate = float(np.polyfit(times[late], logs[late], 1)[0])
    return GrowthEstimate(rate, times, logs)


def stability_classify(graphon: Graphon, dist, K: float) -> str:
    if not dist.assumptions_met:
        raise AssumptionsNotMet(f"{dist.spec} is not even and unimodal; the stability criterion does not apply")
    return transition_points(spectrum_for(graphon), dist).classify(K)


# bounded-Lipschitz dictionary: each entry is ((u, v, w), Lipschitz constants)
_U = [(0, None, 0.0), (1, "cos", 0.5), (1, "sin", 0.5), (2, "cos", 1.0), (2, "sin", 1.0)]
_V = [(False, 0.0), (True, 0.5)]
_W = [(False, 0.0), (True, 1.0)]


def _u_empirical(theta, k, trig):
    if trig is None:
        return np.ones_like(theta)
    f = np.cos if trig == "cos" else np.sin
    return 0.5 * (1.0 + f(k * theta))


def _u_continuum(coeffs, k, trig):
    # int (1 + cos k th)/2 rho d th = (1 + Re 2pi rho_k)/2; sin picks Im
    if trig is None:
        return np.ones(coeffs.shape[1:])
    m = TWO_PI * coeffs[k]
    return 0.5 * (1.0 + (m.real if trig == "cos" else m.imag))


def bl_distance_proxy(theta, omega, xi, state: MeanFieldState, dist=None) -> float:
    """Lower bound on the bounded-Lipschitz distance between the empirical
    measure of (theta_i, omega_i, xi_i) and the lattice continuum measure.

    Dictionary: u(theta) v(omega) w(x) with u in {1, (1+cos k theta)/2,
    (1+sin k theta)/2 : k = 1, 2}, v in {1, (1+tanh omega)/2}, w in {1, x}.
    Each product has range in [0, 1] and Lipschitz constant at most the sum of
    its factors' constants L; dividing by max(1, L) keeps it in the test class.
    This is a proxy: the supremum over the full class is not computed.
    """
    theta, omega, xi = (np.asarray(a, dtype=float) for a in (theta, omega, xi))
    if theta.size == 0:
        raise InvalidArgument("no samples")
    if not (theta.shape == omega.shape == xi.shape):
        raise InvalidArgument("theta, omega and xi must have equal lengths")
    if state.M < 2:
        raise InvalidArgument("the dictionary needs M >= 2")
    cell = state.weights[:, None] / state.m_x
    v_nodes = 0.5 * (1.0 + np.tanh(state.omega))[:, None]
    best = 0.0
    for k, trig, lu in _U:
        ue = _u_empirical(theta, k, trig)
        uc = _u_continuum(state.coeffs, k, trig)
        for use_v, lv in _V:
            ve = 0.5 * (1.0 + np.tanh(omega)) if use_v else 1.0
            vc = v_nodes if use_v else 1.0
            for use_w, lw in _W:
                we = xi if use_w else 1.0
                wc = state.x[None, :] if use_w else 1.0
                scale = max(1.0, lu + lv + lw)
                emp = np.mean(ue * ve * we)
                cont = float(np.sum(cell * uc * vc * wc))
                best = max(best, abs(emp - cont) / scale)
    return best


def bl_distance_proxy_empirical(a, b) -> float:
    """Same dictionary between two empirical measures, each given as a
    (theta, omega, xi) triple of equal-length arrays."""
    (ta, oa, xa), (tb, ob, xb) = ([np.asarray(v, dtype=float) for v in s] for s in (a, b))
    if ta.size == 0 or tb.size == 0:
        raise InvalidArgument("no samples")
    best = 0.0
    for k, trig, lu in _U:
        ua, ub = _u_empirical(ta, k, trig), _u_empirical(tb, k, trig)
        for use_v, lv in _V:
            va = 0.5 * (1.0 + np.tanh(oa)) if use_v else 1.0
            vb = 0.5 * (1.0 + np.tanh(ob)) if use_v else 1.0
            for use_w, lw in _W:
                wa, wb = (xa, xb) if use_w else (1.0, 1.0)
                diff = np.mean(ua * va * wa) - np.mean(ub * vb * wb)
                best = max(best, abs(diff) / max(1.0, lu + lv + lw))
    return best


def write_checkpoint(path, state: MeanFieldState) -> Path:
    """One text header line, then little-endian complex128 coefficients
    (C order, shape (M+1, m_omega, m_x)), float64 omega nodes, weights, x."""
    path = Path(path)
    header = (f"{CHECKPOINT_MAGIC} M={state.M} m_omega={state.m_omega} m_x={state.m_x} "
              f"time={state.time!r} scheme={state.scheme} freq={state.freq_spec or '-'}\n")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(state.coeffs, dtype="<c16").tobytes())
        for arr in (state.omega, state.weights, state.x):
            fh.write(np.asarray(arr, dtype="<f8").tobytes())
    return path


def read_checkpoint(path) -> MeanFieldState:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    fields = raw[:nl].decode("ascii").split()
    if not fields or fields[0] != CHECKPOINT_MAGIC:
        raise InvalidArgument(f"{path} is not a mean-field checkpoint")
    meta = dict(f.split("=", 1) for f in fields[1:])
    M, mo, mx = int(meta["M"]), int(meta["m_omega"]), int(meta["m_x"])
    body = raw[nl + 1:]
    nc = (M + 1) * mo * mx * 16
    expected = nc + 8 * (2 * mo + mx)
    if len(body) != expected:
        raise InvalidArgument(f"checkpoint body has {len(body)} bytes, expected {expected}")
    coeffs = np.frombuffer(body[:nc], dtype="<c16").reshape(M + 1, mo, mx).astype(complex)
    rest = np.frombuffer(body[nc:], dtype="<f8").astype(float)
    freq = meta.get("freq", "-")
    return MeanFieldState(coeffs, float(meta["time"]), rest[:mo], rest[mo:2 * mo], rest[2 * mo:],
                          "" if freq == "-" else freq, meta.get("scheme", "standard"))
