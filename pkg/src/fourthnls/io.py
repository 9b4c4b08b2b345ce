"""Files: UTF-8 CSV tables, JSON documents and binary coefficient dumps.

Binary layout (all little endian)::

    16 bytes  magic  b"4NLS-COEFFS\\0\\0\\0\\0\\0"
     1 byte   format version
     1 byte   ndim
     8*ndim   shape as uint64
     rest     complex128 payload, C order
"""

from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from .dynamics import Trajectory
from .errors import FourthNLSError, InvalidArgument
from .hum import ControlOperator
from .profiles import CutoffProfile, DampingProfile
from .torus import TorusGrid

MAGIC = b"4NLS-COEFFS".ljust(16, b"\0")
FORMAT_VERSION = 1


class FormatError(FourthNLSError, ValueError):
    """A file does not follow the expected layout."""


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        # JSON has no inf/nan; keep them readable and round-trippable
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_csv(path, rows, fieldnames) -> Path:
    """Rows are dicts; floats are written with ``repr`` so they round-trip exactly."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fieldnames))
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for k, v in row.items()})
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def trajectory_rows(traj: Trajectory):
    masses = traj.masses()
    h1 = traj.sobolev_norms(1.0)
    for t, m, h in zip(traj.times, masses, h1):
        yield {"time": float(t), "mass": float(m), "h1_norm": float(h)}


def write_trajectory_csv(path, traj: Trajectory) -> Path:
    return write_csv(path, trajectory_rows(traj), ["time", "mass", "h1_norm"])


def dump_coeffs(path, array) -> Path:
    a = np.ascontiguousarray(array, dtype="<c16")
    if a.ndim > 255:
        raise InvalidArgument("too many dimensions")
    header = MAGIC + struct.pack("<BB", FORMAT_VERSION, a.ndim) + struct.pack(f"<{a.ndim}Q", *a.shape)
    path = Path(path)
    path.write_bytes(header + a.tobytes())
    return path


def load_coeffs(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 18 or data[:16] != MAGIC:
        raise FormatError(f"{path}: not a coefficient dump")
    version, ndim = struct.unpack_from("<BB", data, 16)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    shape = struct.unpack_from(f"<{ndim}Q", data, 18)
    offset = 18 + 8 * ndim
    expected = int(np.prod(shape, dtype=np.int64)) * 16
    if len(data) - offset != expected:
        raise FormatError(f"{path}: payload has {len(data) - offset} bytes, expected {expected}")
    return np.frombuffer(data, dtype="<c16", offset=offset).reshape(shape).astype(np.complex128)


def save_operator(R: ControlOperator, stem) -> tuple[Path, Path]:
    """Write ``stem.bin`` (matrix) and ``stem.json`` (metadata)."""
    stem = Path(stem)
    return (dump_coeffs(stem.with_suffix(".bin"), R.matrix),
            write_json(stem.with_suffix(".json"), R.metadata()))


def load_operator(stem) -> ControlOperator:
    stem = Path(stem)
    meta = read_json(stem.with_suffix(".json"))
    matrix = load_coeffs(stem.with_suffix(".bin"))
    d = meta["damping"]
    damping = DampingProfile(tuple(tuple(a) for a in d["region"]), d["level"], d["width"], d["floor"])
    cutoff = CutoffProfile(**meta["cutoff"])
    grid = TorusGrid(int(meta["N"]))
    if matrix.shape != (grid.n_modes, grid.n_modes):
        raise FormatError(f"matrix shape {matrix.shape} does not match N={grid.n_modes}")
    return ControlOperator(matrix, grid, damping, cutoff, float(meta["dt"]))
