"""Reference vectors: frozen probe inputs with expected outputs.

Cross-implementation parity files: a digest of the canonical pair document,
probe points, and the values any conforming consumer must reproduce
(mixture responsibilities, conditional means, drifts, conditional log
densities) to 1e-9 relative.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dynamics import optimal_drift
from .errors import FormatError
from .pair import BenchmarkPair
from .pairfile import dumps_canonical, pair_digest
from .plan import conditional_log_density, conditional_parameters, sample_joint
from .rng import Seed, generator
from .tensorio import atomic_write_text

REFERENCE_FORMAT_VERSION = 1
RELATIVE_TOLERANCE = 1e-9


def export_reference_vectors(
    pair: BenchmarkPair,
    probe_seed: Seed,
    n_x: int = 32,
    n_xt: int = 16,
    n_xy: int = 16,
) -> dict:
    """Build the reference document for a pair; deterministic per probe seed."""
    xs = pair.source.sample_with(generator(probe_seed, 0), n_x)
    log_gammas, means = conditional_parameters(pair, xs)

    xt_x = pair.source.sample_with(generator(probe_seed, 1), n_xt)
    ts = generator(probe_seed, 2).random(n_xt) * 0.999
    drifts = np.stack([optimal_drift(pair, xt_x[i], float(ts[i])) for i in range(n_xt)])

    joint = sample_joint(pair, probe_seed.child(3), n_xy)
    log_dens = conditional_log_density(pair, joint.xs, joint.ys)

    return {
        "format_version": REFERENCE_FORMAT_VERSION,
        "pair_digest": pair_digest(pair),
        "probe_seed": {"value": int(probe_seed.value), "stream": int(probe_seed.stream)},
        "relative_tolerance": RELATIVE_TOLERANCE,
        "x_probes": {
            "x": _rows(xs),
            "gammas": _rows(np.exp(log_gammas)),
            "log_gammas": _rows(log_gammas),
            "means": [_rows(means[i]) for i in range(n_x)],
        },
        "xt_probes": {
            "x": _rows(xt_x),
            "t": [float(t) for t in ts],
            "drift": _rows(drifts),
        },
        "xy_probes": {
            "x": _rows(joint.xs),
            "y": _rows(joint.ys),
            "log_density": [float(v) for v in log_dens],
        },
    }


def _rows(arr: np.ndarray) -> list:
    return [[float(v) for v in row] for row in np.atleast_2d(arr)]


def write_reference_file(path: str | Path, doc: dict) -> None:
    atomic_write_text(path, dumps_canonical(doc) + "\n")


def load_reference_file(path: str | Path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not a valid reference document ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format_version") != REFERENCE_FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported reference document")
    return doc


def _close(actual: float, expected: float, tol: float) -> bool:
    return abs(actual - expected) <= tol * max(1.0, abs(expected))


def verify_reference(pair: BenchmarkPair, doc: dict) -> list[str]:
    """Recompute every probe and compare; returns a list of failure messages."""
    failures: list[str] = []
    digest = pair_digest(pair)
    if doc["pair_digest"] != digest:
        return [f"pair digest mismatch: document has {doc['pair_digest']}, pair is {digest}"]
    tol = float(doc.get("relative_tolerance", RELATIVE_TOLERANCE))

    xp = doc["x_probes"]
    for i, row in enumerate(xp["x"]):
        x = np.asarray(row, dtype=float)
        log_gammas, means = conditional_parameters(pair, x)
        for n, expected in enumerate(xp["gammas"][i]):
            if not _close(float(np.exp(log_gammas[n])), expected, tol):
                failures.append(f"x_probes[{i}].gammas[{n}]")
        for n, expected_row in enumerate(xp["means"][i]):
            for d, expected in enumerate(expected_row):
                if not _close(float(means[n, d]), expected, tol):
                    failures.append(f"x_probes[{i}].means[{n}][{d}]")

    tp = doc["xt_probes"]
    for i, row in enumerate(tp["x"]):
        v = optimal_drift(pair, np.asarray(row, dtype=float), float(tp["t"][i]))
        for d, expected in enumerate(tp["drift"][i]):
            if not _close(float(v[d]), expected, tol):
                failures.append(f"xt_probes[{i}].drift[{d}]")

    yp = doc["xy_probes"]
    for i, row in enumerate(yp["x"]):
        x = np.asarray(row, dtype=float)
        y = np.asarray(yp["y"][i], dtype=float)
        val = float(conditional_log_density(pair, x, y))
        if not _close(val, float(yp["log_density"][i]), tol):
            failures.append(f"xy_probes[{i}].log_density")
    return failures
