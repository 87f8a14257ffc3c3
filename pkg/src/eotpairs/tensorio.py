"""Sample and trajectory tensor files, CSV ingestion, atomic writes.

Sample tensor: one ASCII header line ``{count} {dim} f64le`` followed by
raw little-endian float64, row-major. Trajectory tensor: header
``{paths} {times} {dim} f64le`` then contiguous floats, path-major.
"""

from __future__ import annotations

import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError

_SAMPLE_HEADER = re.compile(rb"^(\d+) (\d+) f64le\n")
_TRAJ_HEADER = re.compile(rb"^(\d+) (\d+) (\d+) f64le\n")


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_samples(path: str | Path, samples: np.ndarray) -> None:
    arr = np.ascontiguousarray(np.atleast_2d(np.asarray(samples, dtype=float)))
    if arr.size == 0:
        arr = arr.reshape(0, arr.shape[-1] if arr.ndim == 2 else 0)
    count, dim = arr.shape
    header = f"{count} {dim} f64le\n".encode("ascii")
    atomic_write_bytes(path, header + arr.astype("<f8").tobytes())


def read_samples(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    m = _SAMPLE_HEADER.match(blob)
    if not m:
        raise FormatError(f"{path}: not a sample tensor file (bad header)")
    count, dim = int(m.group(1)), int(m.group(2))
    payload = blob[m.end():]
    expected = count * dim * 8
    if len(payload) != expected:
        raise FormatError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype="<f8").reshape(count, dim).astype(float)


def write_samples_csv(path: str | Path, samples: np.ndarray) -> None:
    arr = np.atleast_2d(np.asarray(samples, dtype=float))
    if arr.shape[1] > 8:
        raise FormatError("CSV export is limited to dimension 8")
    lines = [",".join("%.17g" % v for v in row) for row in arr]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def write_trajectories(path: str | Path, states: np.ndarray) -> None:
    arr = np.ascontiguousarray(np.asarray(states, dtype=float))
    if arr.ndim != 3:
        raise FormatError("trajectory tensor must have shape (paths, times, dim)")
    p, k, d = arr.shape
    header = f"{p} {k} {d} f64le\n".encode("ascii")
    atomic_write_bytes(path, header + arr.astype("<f8").tobytes())


def read_trajectories(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    m = _TRAJ_HEADER.match(blob)
    if not m:
        raise FormatError(f"{path}: not a trajectory tensor file (bad header)")
    p, k, d = (int(m.group(i)) for i in (1, 2, 3))
    payload = blob[m.end():]
    expected = p * k * d * 8
    if len(payload) != expected:
        raise FormatError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype="<f8").reshape(p, k, d).astype(float)


def read_points(path: str | Path) -> np.ndarray:
    """Read a point matrix from a sample tensor or a CSV file (header optional)."""
    path = Path(path)
    blob = path.read_bytes()
    if _SAMPLE_HEADER.match(blob):
        return read_samples(path)
    text = blob.decode("utf-8", errors="strict")
    rows = [line.strip() for line in text.splitlines() if line.strip()]
    if not rows:
        raise FormatError(f"{path}: empty dataset")
    start = 0
    try:
        [float(v) for v in rows[0].replace(",", " ").split()]
    except ValueError:
        start = 1  # header row
    data = []
    for i, line in enumerate(rows[start:], start=start + 1):
        try:
            data.append([float(v) for v in line.replace(",", " ").split()])
        except ValueError as exc:
            raise FormatError(f"{path}: line {i}: {exc}") from None
    widths = {len(r) for r in data}
    if len(widths) != 1:
        raise FormatError(f"{path}: inconsistent row widths {sorted(widths)}")
    return np.asarray(data, dtype=float)
