"""Experiment drivers: single runs, K sweeps with transition detection,
mean-field runs and particle-vs-continuum comparisons."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import dynamics as dyn
from . import meanfield as mf
from .config import ExperimentConfig
from .errors import InvalidArgument, NumericalFailure, UnsupportedOperation
from .graphon import build_weighted_graph, make_grid, sample_random_graph
from .io import write_csv
from .spectra import spectrum_for, transition_points

# SeedSequence entropy layout: [base, replica, domain, index] with domain 0
# for structure (index 0 grid, 1 graph) and domain 1 for the frequencies and
# initial phases of K index ``index``.
_STRUCTURE, _DRAWS = 0, 1
_GRID, _GRAPH = 0, 1


def _seq(*key) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(k) for k in key])


def _rng(*key) -> np.random.Generator:
    return np.random.default_rng(_seq(*key))


def theory_kc_plus(cfg: ExperimentConfig) -> float:
    dist = cfg.freq_obj()
    if not dist.assumptions_met:
        return math.nan
    return transition_points(spectrum_for(cfg.graphon_obj(), cfg.kmax, cfg.nystrom), dist).kc_plus


def _grid_for(cfg, n, replica):
    if cfg.grid == "uniform":
        return make_grid(n)
    return make_grid(n, "iid_uniform", int(_seq(cfg.seed, replica, _STRUCTURE, _GRID).generate_state(1)[0]))


def build_coupling(cfg: ExperimentConfig, grid, replica: int):
    """Weighted W(xi_i, xi_j), a W-random graph, or the rank-one fast path."""
    graphon = cfg.graphon_obj()
    if cfg.coupling == "sampled":
        seed = int(_seq(cfg.seed, replica, _STRUCTURE, _GRAPH).generate_state(1)[0])
        return sample_random_graph(graphon, grid, seed)
    if cfg.fast_path and graphon.kind == "constant":
        return dyn.UniformCoupling(grid.n, graphon.params[0])
    return build_weighted_graph(graphon, grid)


def _draw(cfg, grid, replica, k_index):
    """Frequencies then initial phases, from one per-(replica, K) stream."""
    rng = _rng(cfg.seed, replica, _DRAWS, k_index)
    freqs = cfg.freq_obj().sample(grid.n, rng)
    phases = dyn.sample_initial(grid.n, cfg.initial_condition(), freqs, grid, rng).phases
    return freqs, phases


def simulate(cfg: ExperimentConfig, K: Optional[float] = None, replica: int = 0, keep_phases: bool = False):
    K = cfg.K_values[0] if K is None else K
    grid = _grid_for(cfg, cfg.n, replica)
    coupling = build_coupling(cfg, grid, replica)
    freqs, phases = _draw(cfg, grid, replica, 0)
    sim = dyn.SimConfig(K=K, dt=cfg.dt, T=cfg.T, record_stride=cfg.record_stride, seed=cfg.seed)
    return dyn.integrate(dyn.OscillatorState(phases), freqs, coupling, sim, keep_phases=keep_phases)


# --- sweeps ------------------------------------------------------------------

@dataclass
class SweepResult:
    K: np.ndarray
    r_mean: np.ndarray
    r_std: np.ndarray
    n: int
    seeds: int
    r_all: np.ndarray  # (len(K), seeds)
    kc_hat: float
    bracketed: bool
    kc_plus: float
    floor: float
    meta: dict = field(default_factory=dict)

    def rows(self):
        return [(k, m, s, self.n) for k, m, s in zip(self.K, self.r_mean, self.r_std)]


def estimate_transition(K, r_mean, n: int, c: float = 5.0):
    """First K whose mean r exceeds c/sqrt(n), refined by linear interpolation
    of r^2 between the bracketing grid points.  Returns (K_hat, bracketed);
    K_hat is nan when no bracket exists."""
    K, r = np.asarray(K, dtype=float), np.asarray(r_mean, dtype=float)
    floor = c / math.sqrt(n)
    above = np.nonzero(r > floor)[0]
    if above.size == 0 or above[0] == 0:
        return math.nan, False
    i = above[0]
    y0, y1 = r[i - 1] ** 2, r[i] ** 2
    t = (floor ** 2 - y0) / (y1 - y0)
    return float(K[i - 1] + t * (K[i] - K[i - 1])), True


def _sweep_replica(cfg: ExperimentConfig, replica: int) -> np.ndarray:
    """All K values of one replica as columns of one batched run; the
    coupling (and node grid) are shared, frequencies and phases are drawn
    per (replica, K)."""
    Ks = np.array(cfg.K_values)
    grid = _grid_for(cfg, cfg.n, replica)
    coupling = build_coupling(cfg, grid, replica)
    draws = [_draw(cfg, grid, replica, j) for j in range(len(Ks))]
    freqs = np.column_stack([d[0] for d in draws])
    phases = np.column_stack([d[1] for d in draws])
    sim = dyn.SimConfig(K=float(Ks[0]), dt=cfg.dt, T=cfg.T, record_stride=cfg.record_stride, seed=cfg.seed)
    try:
        traj = dyn.integrate(dyn.OscillatorState(phases), freqs, coupling, sim, K=Ks)
    except NumericalFailure as exc:
        raise NumericalFailure(f"sweep replica {replica} (K = {list(Ks)}): {exc}") from exc
    return dyn.steady_state_r(traj.times, traj.r, cfg.r_fraction)


def _workers(threads: int) -> int:
    return (os.cpu_count() or 1) if threads == 0 else max(1, threads)


def run_sweep(cfg: ExperimentConfig, threads: int = 1) -> SweepResult:
    replicas = range(cfg.seeds)
    workers = min(_workers(threads), cfg.seeds)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            per = list(pool.map(_sweep_replica, [cfg] * cfg.seeds, replicas))
    else:
        per = [_sweep_replica(cfg, r) for r in replicas]
    r_all = np.column_stack(per)
    Ks = np.array(cfg.K_values)
    r_mean = r_all.mean(axis=1)
    r_std = r_all.std(axis=1, ddof=1) if cfg.seeds > 1 else np.zeros_like(r_mean)
    kc_hat, ok = estimate_transition(Ks, r_mean, cfg.n, cfg.floor_c)
    kc_plus = theory_kc_plus(cfg)
    meta = {
        "kuragraph_version": __version__,
        "config_hash": cfg.source_hash or "-",
        "graphon": cfg.graphon, "freq": cfg.freq, "coupling": cfg.coupling, "grid": cfg.grid,
        "n": cfg.n, "T": cfg.T, "dt": cfg.dt, "seeds": cfg.seeds, "seed_base": cfg.seed,
        "r_inf_estimator": f"mean of r over final {cfg.r_fraction:g} of horizon",
        "transition_protocol": f"first K with mean r > {cfg.floor_c:g}/sqrt(n), linear in r^2 between brackets",
        "finite_size_floor": cfg.floor_c / math.sqrt(cfg.n),
        "theory_kc_plus": kc_plus,
        "kc_hat": kc_hat if ok else "not bracketed",
    }
    return SweepResult(Ks, r_mean, r_std, cfg.n, cfg.seeds, r_all, kc_hat, ok, kc_plus,
                       cfg.floor_c / math.sqrt(cfg.n), meta)


def write_sweep(result: SweepResult, path) -> Path:
    return write_csv(path, ["K", "r_inf_mean", "r_inf_std", "n"], result.rows(), result.meta)


def emit_plot_script(result: SweepResult, script_path, csv_name: str) -> Path:
    """gnuplot script plotting r_inf against K with the kc_plus line.  The
    CSV is referenced by ``csv_name`` relative to the script's directory."""
    if result is None or len(result.K) == 0:
        raise InvalidArgument("cannot plot an empty sweep")
    kc = result.kc_plus
    lines = [
        "# r_inf against K; run gnuplot from the directory holding this script",
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key top left",
        "set xlabel 'K'",
        "set ylabel 'r_inf'",
        f"set xrange [{float(result.K.min())!r}:{float(result.K.max())!r}]",
        "set yrange [0:1]",
    ]
    if math.isfinite(kc):
        lines.append(f"set arrow from {kc!r}, graph 0 to {kc!r}, graph 1 nohead dashtype 2")
        lines.append(f"set label 'theory K_c+ = {kc:.6g}' at {kc!r}, graph 0.95 offset 1,0")
    lines.append(f"plot '{csv_name}' using 1:2:3 skip 1 with yerrorlines title 'r_inf (mean +- sd)'")
    path = Path(script_path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# --- mean field ----------------------------------------------------------------

def run_meanfield(cfg: ExperimentConfig, K: Optional[float] = None, T: Optional[float] = None,
                  checkpoints=()):
    """Returns (run, states) with ``states`` the lattice states at each
    checkpoint time (rounded to the mean-field step)."""
    K = cfg.K_values[0] if K is None else K
    T = cfg.T if T is None else T
    dist, graphon = cfg.freq_obj(), cfg.graphon_obj()
    state = mf.init_meanfield(cfg.initial_condition(), dist, graphon, cfg.M, cfg.m_omega, cfg.m_x, cfg.quadrature)
    stride = max(1, int(round(cfg.dt * cfg.record_stride / cfg.dt_meanfield)))
    stops = sorted({float(t) for t in checkpoints if 0 < t < T} | {T})
    times, rs, psis, locs, states = [np.array([0.0])], [], [], [], {}
    r0, psi0 = state.order_parameter()
    rs.append(np.array([r0]))
    psis.append(np.array([psi0]))
    t_prev = 0.0
    if 0.0 in {float(t) for t in checkpoints}:
        states[0.0] = state
    for stop in stops:
        run = mf.evolve(state, dist, graphon, K, cfg.dt_meanfield, stop - t_prev, stride, cfg.local_order)
        times.append(run.times[1:])
        rs.append(run.r[1:])
        psis.append(run.psi[1:])
        if cfg.local_order:
            locs.append(run.local if not locs else run.local[1:])
        state, t_prev = run.state, stop
        states[stop] = state
    out = mf.MeanFieldRun(state, np.concatenate(times), np.concatenate(rs), np.concatenate(psis),
                          np.concatenate(locs) if locs else None)
    return out, states


# --- particle vs continuum ------------------------------------------------------

@dataclass
class CompareReport:
    n_ladder: tuple
    seeds: int
    checkpoints: tuple
    sup_dr: np.ndarray  # (len(n_ladder), seeds)
    bl: np.ndarray  # (len(n_ladder), seeds, len(checkpoints))
    meta: dict = field(default_factory=dict)

    def median_sup_dr(self) -> np.ndarray:
        return np.median(self.sup_dr, axis=1)

    def median_bl(self) -> np.ndarray:
        return np.median(self.bl, axis=1)

    def rows(self):
        out = []
        for a, n in enumerate(self.n_ladder):
            for s in range(self.seeds):
                out.append((n, s, self.sup_dr[a, s], *self.bl[a, s]))
        return out


def _particle_segments(cfg, grid, coupling, freqs, phases, K, stops):
    """Integrate through ``stops``; returns times, r as (records, B) and the
    phases at each stop."""
    state = dyn.OscillatorState(phases)
    times = [np.array([0.0])]
    rs = [np.reshape(dyn.order_parameter(phases)[0], (1, -1))]
    snaps, t_prev = {}, 0.0
    for stop in stops:
        sim = dyn.SimConfig(K=K, dt=cfg.dt, T=stop - t_prev, record_stride=cfg.record_stride)
        traj = dyn.integrate(state, freqs, coupling, sim)
        times.append(traj.times[1:])
        rs.append(np.reshape(traj.r, (len(traj.times), -1))[1:])
        state, t_prev = traj.final, stop
        snaps[stop] = state.phases.copy()
    return np.concatenate(times), np.concatenate(rs), snaps


def _aligned(a, b, tol=1e-9) -> bool:
    idx = np.clip(np.searchsorted(b, a), 1, len(b) - 1)
    gap = np.minimum(np.abs(b[idx] - a), np.abs(b[idx - 1] - a))
    return bool(np.all(gap <= tol))


def run_compare(cfg: ExperimentConfig, K: Optional[float] = None) -> CompareReport:
    """Particles at each n of the ladder (``cfg.seeds`` replicas) against one
    mean-field run from the same initial condition.  Reports
    sup_t |r_particle - r_meanfield| and the bounded-Lipschitz proxy at the
    checkpoint times."""
    K = cfg.K_values[0] if K is None else K
    dist, graphon = cfg.freq_obj(), cfg.graphon_obj()
    if dist.sampler is None:
        raise UnsupportedOperation("particle runs need a frequency sampler")
    checkpoints = tuple(sorted(set(cfg.checkpoints) | {cfg.T}))
    mfr, states = run_meanfield(cfg, K, cfg.T, checkpoints)
    sup_dr = np.zeros((len(cfg.n_ladder), cfg.seeds))
    bl = np.zeros((len(cfg.n_ladder), cfg.seeds, len(checkpoints)))
    for a, n in enumerate(cfg.n_ladder):
        batched = cfg.coupling == "weighted" and cfg.grid == "uniform"
        groups = [list(range(cfg.seeds))] if batched else [[s] for s in range(cfg.seeds)]
        for group in groups:
            grid = _grid_for(cfg, n, group[0])
            coupling = build_coupling(cfg, grid, group[0])
            draws = [_draw(cfg, grid, s, 0) for s in group]
            freqs = np.column_stack([d[0] for d in draws])
            phases = np.column_stack([d[1] for d in draws])
            times, r, snaps = _particle_segments(cfg, grid, coupling, freqs, phases, K, checkpoints)
            if not _aligned(times, mfr.times):
                raise NumericalFailure("particle and mean-field record times do not align")
            r_mf = np.interp(times, mfr.times, mfr.r)
            for c, s in enumerate(group):
                sup_dr[a, s] = np.max(np.abs(r[:, c] - r_mf))
                for b, t in enumerate(checkpoints):
                    bl[a, s, b] = mf.bl_distance_proxy(snaps[t][:, c], freqs[:, c], grid.points, states[t])
    meta = {
        "kuragraph_version": __version__,
        "config_hash": cfg.source_hash or "-",
        "graphon": cfg.graphon, "freq": cfg.freq, "K": K, "T": cfg.T, "dt": cfg.dt,
        "dt_meanfield": cfg.dt_meanfield, "M": cfg.M, "m_omega": cfg.m_omega, "m_x": cfg.m_x,
        "ic": cfg.ic, "seeds": cfg.seeds, "seed_base": cfg.seed,
        "bl_note": "bounded-Lipschitz values are dictionary lower bounds (proxy), not the exact distance",
    }
    return CompareReport(tuple(cfg.n_ladder), cfg.seeds, checkpoints, sup_dr, bl, meta)


def write_compare(report: CompareReport, path) -> Path:
    cols = ["n", "seed", "sup_abs_dr"] + [f"bl_proxy_t{t:g}" for t in report.checkpoints]
    med = report.median_sup_dr()
    footer = {f"median_sup_abs_dr_n{n}": v for n, v in zip(report.n_ladder, med)}
    for n, row in zip(report.n_ladder, report.median_bl()):
        for t, v in zip(report.checkpoints, row):
            footer[f"median_bl_proxy_n{n}_t{t:g}"] = v
    return write_csv(path, cols, report.rows(), report.meta, footer)
