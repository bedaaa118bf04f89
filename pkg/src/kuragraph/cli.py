"""Command-line entry point: ``kuragraph <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import experiments as ex
from . import meanfield as mf
from .config import ExperimentConfig, parse_config
from .errors import AssumptionsNotMet, ConfigError, InvalidArgument, NumericalFailure, UnsupportedOperation
from .frequency import parse_frequency
from .graphon import parse_graphon
from .io import write_csv, write_phase_sidecar
from .spectra import analytic_spectrum, match_eigenvalues, nystrom_spectrum, transition_points

log = logging.getLogger("kuragraph")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _load_config(args) -> ExperimentConfig:
    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            raise ConfigError(f"{args.config}: not UTF-8 ({exc})") from None
    cfg = parse_config(text)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    for key in ("graphon", "freq", "kmax", "nystrom"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    return cfg.with_(**overrides) if overrides else cfg


def _meta(cfg: ExperimentConfig, **extra) -> dict:
    out = {"kuragraph_version": __version__, "config_hash": cfg.source_hash or "-"}
    out.update(extra)
    return out


def cmd_spectra(cfg: ExperimentConfig, out: Path, threads: int) -> None:
    graphon, dist = parse_graphon(cfg.graphon), parse_frequency(cfg.freq)
    nys = nystrom_spectrum(graphon, cfg.nystrom)
    try:
        ana = analytic_spectrum(graphon, cfg.kmax)
    except UnsupportedOperation:
        ana = None
    if ana is not None:
        ref = ana.eigenvalues[np.argsort(-np.abs(ana.eigenvalues), kind="stable")]
        matched = match_eigenvalues(ref, nys.eigenvalues)
        rows = [(k, a, b) for k, (a, b) in enumerate(zip(ref, matched))]
        spec = ana
    else:
        ref = nys.eigenvalues[np.argsort(-np.abs(nys.eigenvalues), kind="stable")][: 2 * cfg.kmax + 1]
        rows = [(k, math.nan, b) for k, b in enumerate(ref)]
        spec = nys
    try:
        tp = transition_points(spec, dist)
        footer = {"kc_plus": tp.kc_plus, "kc_minus": tp.kc_minus}
    except AssumptionsNotMet as exc:
        footer = {"kc_plus": "undefined", "kc_minus": "undefined", "note": str(exc)}
    footer.update({"zeta_max": spec.zeta_max, "zeta_min": spec.zeta_min})
    path = write_csv(out / "spectra.csv", ["k", "zeta_analytic", "zeta_nystrom"], rows,
                     _meta(cfg, graphon=cfg.graphon, freq=cfg.freq, kmax=cfg.kmax, nystrom_m=cfg.nystrom), footer)
    log.info("wrote %s", path)


def cmd_simulate(cfg: ExperimentConfig, out: Path, threads: int) -> None:
    traj = ex.simulate(cfg, keep_phases=cfg.save_phases)
    K = cfg.K_values[0]
    path = write_csv(out / "trajectory.csv", ["t", "r", "psi"], zip(traj.times, traj.r, traj.psi),
                     _meta(cfg, graphon=cfg.graphon, freq=cfg.freq, coupling=cfg.coupling, n=cfg.n, K=K,
                           dt=cfg.dt, T=cfg.T, seed=cfg.seed, r_inf=traj.steady_state_r(cfg.r_fraction)))
    if cfg.save_phases:
        write_phase_sidecar(out / "phases.bin", traj.phases)
    log.info("wrote %s", path)


def cmd_sweep(cfg: ExperimentConfig, out: Path, threads: int) -> None:
    result = ex.run_sweep(cfg, threads)
    ex.write_sweep(result, out / "sweep.csv")
    ex.emit_plot_script(result, out / "sweep.gp", "sweep.csv")
    log.info("K_hat = %s (theory kc_plus = %.6g)",
             f"{result.kc_hat:.6g}" if result.bracketed else "not bracketed", result.kc_plus)


def cmd_meanfield(cfg: ExperimentConfig, out: Path, threads: int) -> None:
    run, _ = ex.run_meanfield(cfg)
    cols = ["t", "r_global"]
    rows = [list(v) for v in zip(run.times, run.r)]
    if run.local is not None:
        cols += [f"r_local_x{l}" for l in range(run.local.shape[1])]
        rows = [row + list(loc) for row, loc in zip(rows, run.local)]
    write_csv(out / "meanfield.csv", cols, rows,
              _meta(cfg, graphon=cfg.graphon, freq=cfg.freq, K=cfg.K_values[0], M=cfg.M, m_omega=cfg.m_omega,
                    m_x=cfg.m_x, dt=cfg.dt_meanfield, ic=cfg.ic,
                    local_order="|h(x)| divided by int W(x, y) dy" if run.local is not None else "off"))
    mf.write_checkpoint(out / "meanfield_state.bin", run.state)


def cmd_compare(cfg: ExperimentConfig, out: Path, threads: int) -> None:
    report = ex.run_compare(cfg)
    ex.write_compare(report, out / "compare.csv")
    for n, v in zip(report.n_ladder, report.median_sup_dr()):
        log.info("n = %d: median sup |dr| = %.4g", n, v)


COMMANDS = {
    "spectra": cmd_spectra,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "meanfield": cmd_meanfield,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kuragraph", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"kuragraph {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--out", default=".", help="output directory (created if missing)")
        p.add_argument("--seed", type=int, help="base seed, overrides the config")
        p.add_argument("--threads", type=int, default=1, help="worker processes, 0 = all cores")
        if name == "spectra":
            p.add_argument("--graphon")
            p.add_argument("--freq")
            p.add_argument("--kmax", type=int)
            p.add_argument("--nystrom", type=int, help="Nystrom grid size")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        if args.threads < 0:
            raise ConfigError("--threads must be >= 0")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out, args.threads)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidArgument, AssumptionsNotMet, UnsupportedOperation) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
