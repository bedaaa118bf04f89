"""File formats: metadata-headed CSVs, phase sidecars and plain matrices."""
from __future__ import annotations

import csv
import hashlib
import struct
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidArgument


def fmt(x) -> str:
    if isinstance(x, (str, bool)) or x is None:
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], meta: Mapping | None = None,
              footer: Mapping | None = None) -> Path:
    """CSV with a ``# key: value`` metadata block, a header row and
    17-significant-digit floats.  ``footer`` adds trailing comment lines."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for k, v in (meta or {}).items():
            fh.write(f"# {k}: {fmt(v)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
        for k, v in (footer or {}).items():
            fh.write(f"# {k}: {fmt(v)}\n")
    return path


def read_csv(path):
    """Returns (meta, columns, float array of rows).  Comment lines anywhere
    are gathered into ``meta``."""
    meta, body = {}, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                meta[key.strip()] = val.strip()
            elif line.strip():
                body.append(line)
    reader = csv.reader(body)
    columns = next(reader)
    data = np.array([[float(v) for v in row] for row in reader], dtype=float)
    return meta, columns, data.reshape(-1, len(columns))


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def write_phase_sidecar(path, snapshots) -> Path:
    """8-byte little-endian record count, then n float64 LE values per record."""
    snaps = np.asarray(snapshots, dtype="<f8")
    if snaps.ndim != 2:
        raise InvalidArgument("phase snapshots must be a (records, n) array")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", snaps.shape[0]))
        fh.write(snaps.tobytes())
    return path


def read_phase_sidecar(path, n: int) -> np.ndarray:
    raw = Path(path).read_bytes()
    (count,) = struct.unpack("<Q", raw[:8])
    data = np.frombuffer(raw[8:], dtype="<f8")
    if data.size != count * n:
        raise InvalidArgument(f"sidecar holds {data.size} values, expected {count} x {n}")
    return data.reshape(count, n).astype(float)


def write_matrix(path, a) -> Path:
    """First line n, then one whitespace-separated row per line."""
    a = np.asarray(a, dtype=float)
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{a.shape[0]}\n")
        for row in a:
            fh.write(" ".join(fmt(v) for v in row) + "\n")
    return path


def read_matrix(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        n = int(fh.readline())
        a = np.loadtxt(fh, ndmin=2)
    if a.shape != (n, n):
        raise InvalidArgument(f"matrix file declares n={n} but holds shape {a.shape}")
    return a


def write_grid(path, points) -> Path:
    path = Path(path)
    path.write_text("".join(fmt(v) + "\n" for v in np.asarray(points, dtype=float)), encoding="utf-8")
    return path


def read_grid(path) -> np.ndarray:
    return np.loadtxt(path, ndmin=1)
