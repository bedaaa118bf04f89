"""Experiment configuration: line-based ``key = value`` text.

Blank lines and ``#`` comments are ignored.  Unknown keys are errors.  Every
problem found is reported at once, with its line number when it has one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import ConfigError, InvalidArgument
from .frequency import parse_frequency
from .graphon import parse_graphon
from .io import config_hash


def _parse_bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _parse_floats(s: str) -> tuple:
    return tuple(float(v) for v in s.split(",") if v.strip())


def _parse_ints(s: str) -> tuple:
    return tuple(int(v) for v in s.split(",") if v.strip())


# key -> (converter, default)
FIELDS = {
    "graphon": (str, "constant:1"),
    "freq": (str, "cauchy:0.5"),
    "n": (int, 1000),
    "grid": (str, "uniform"),
    "coupling": (str, "weighted"),
    "K": (str, "1.0"),
    "T": (float, 200.0),
    "dt": (float, 0.01),
    "dt_meanfield": (float, 0.01),
    "record_stride": (int, 10),
    "seeds": (int, 1),
    "seed": (int, 0),
    "ic": (str, "incoherent"),
    "M": (int, 64),
    "m_omega": (int, 200),
    "m_x": (int, 64),
    "quadrature": (str, "standard"),
    "n_ladder": (_parse_ints, (500, 2000, 8000)),
    "checkpoints": (_parse_floats, ()),
    "fast_path": (_parse_bool, False),
    "save_phases": (_parse_bool, False),
    "local_order": (_parse_bool, False),
    "kmax": (int, 64),
    "nystrom": (int, 512),
    "r_fraction": (float, 0.2),
    "floor_c": (float, 5.0),
}


@dataclass(frozen=True)
class ExperimentConfig:
    graphon: str = "constant:1"
    freq: str = "cauchy:0.5"
    n: int = 1000
    grid: str = "uniform"
    coupling: str = "weighted"
    K: str = "1.0"
    T: float = 200.0
    dt: float = 0.01
    dt_meanfield: float = 0.01
    record_stride: int = 10
    seeds: int = 1
    seed: int = 0
    ic: str = "incoherent"
    M: int = 64
    m_omega: int = 200
    m_x: int = 64
    quadrature: str = "standard"
    n_ladder: tuple = (500, 2000, 8000)
    checkpoints: tuple = ()
    fast_path: bool = False
    save_phases: bool = False
    local_order: bool = False
    kmax: int = 64
    nystrom: int = 512
    r_fraction: float = 0.2
    floor_c: float = 5.0
    source_hash: str = field(default="", compare=False)

    @property
    def K_values(self) -> tuple:
        return parse_K(self.K)

    @property
    def is_range(self) -> bool:
        return ":" in self.K

    def graphon_obj(self):
        return parse_graphon(self.graphon)

    def freq_obj(self):
        return parse_frequency(self.freq)

    def initial_condition(self):
        from .dynamics import InitialCondition

        kind, _, arg = self.ic.partition(":")
        if kind == "incoherent" and not arg:
            return InitialCondition.incoherent()
        if kind == "wrapped_gaussian":
            c = float(arg)
            mean = 0.0
            return InitialCondition.wrapped_gaussian(c, mean)
        raise InvalidArgument(f"unknown initial condition {self.ic!r}; accepted: incoherent, wrapped_gaussian:c")

    def with_(self, **kw) -> "ExperimentConfig":
        out = replace(self, **kw)
        problems = validate(out)
        if problems:
            raise ConfigError(problems)
        return out

    def as_text(self) -> str:
        lines = []
        for key in FIELDS:
            val = getattr(self, key)
            if isinstance(val, tuple):
                val = ",".join(repr(v) for v in val)
            lines.append(f"{key} = {val}")
        return "\n".join(lines) + "\n"


def parse_K(text: str) -> tuple:
    """Scalar, or ``min:max:step`` inclusive of max (to 1e-9 relative)."""
    parts = text.split(":")
    if len(parts) == 1:
        return (float(parts[0]),)
    if len(parts) != 3:
        raise InvalidArgument(f"K must be a number or min:max:step, got {text!r}")
    lo, hi, step = (float(p) for p in parts)
    if not step > 0:
        raise InvalidArgument(f"K step must be positive, got {step}")
    if hi < lo:
        raise InvalidArgument(f"K range {text!r} is empty")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return tuple(round(lo + i * step, 12) for i in range(count))


def validate(cfg: ExperimentConfig) -> list:
    problems = []

    def check(ok, msg):
        if not ok:
            problems.append(msg)

    for name, parse in (("graphon", parse_graphon), ("freq", parse_frequency), ("K", parse_K)):
        try:
            parse(getattr(cfg, name))
        except (InvalidArgument, ValueError) as exc:
            problems.append(f"{name}: {exc}")
    try:
        cfg.initial_condition()
    except (InvalidArgument, ValueError) as exc:
        problems.append(f"ic: {exc}")
    check(cfg.n >= 1, "n must be at least 1")
    check(cfg.grid in ("uniform", "iid_uniform"), f"grid must be uniform or iid_uniform, got {cfg.grid!r}")
    check(cfg.coupling in ("weighted", "sampled"), f"coupling must be weighted or sampled, got {cfg.coupling!r}")
    check(cfg.T > 0, "T must be positive")
    check(0 < cfg.dt <= 0.1, "dt must lie in (0, 0.1]")
    check(0 < cfg.dt_meanfield <= 0.01, "dt_meanfield must lie in (0, 0.01]")
    check(cfg.record_stride >= 1, "record_stride must be at least 1")
    check(cfg.seeds >= 1, "seeds must be at least 1")
    check(cfg.M >= 2, "M must be at least 2")
    check(cfg.m_omega >= 8 and cfg.m_x >= 8, "m_omega and m_x must be at least 8")
    check(cfg.quadrature in ("standard", "graded"), "quadrature must be standard or graded")
    check(len(cfg.n_ladder) >= 1 and all(v >= 1 for v in cfg.n_ladder), "n_ladder needs positive sizes")
    check(all(0 <= t <= cfg.T for t in cfg.checkpoints), "checkpoints must lie in [0, T]")
    check(cfg.kmax >= 0 and cfg.nystrom >= 8, "kmax must be >= 0 and nystrom >= 8")
    check(0 < cfg.r_fraction <= 1, "r_fraction must lie in (0, 1]")
    check(cfg.floor_c > 0, "floor_c must be positive")
    return problems


def parse_config(text: str, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    values, problems, seen = {}, [], {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, _, val = (s.strip() for s in line.partition("="))
        if key not in FIELDS:
            problems.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in seen:
            problems.append(f"line {lineno}: duplicate key {key!r} (first set on line {seen[key]})")
            continue
        seen[key] = lineno
        conv = FIELDS[key][0]
        try:
            values[key] = conv(val)
        except ValueError as exc:
            problems.append(f"line {lineno}: bad value for {key}: {exc}")
    if problems:
        raise ConfigError(problems)
    cfg = replace(base or ExperimentConfig(), **values, source_hash=config_hash(text))
    problems = validate(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg
