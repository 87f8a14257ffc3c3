"""Pair definition file: a self-describing key/value document.

Canonical serialization rules (shared with any consumer that wants byte
round-trips): fixed key order, two-space indentation, reals rendered with
17 significant digits, matrices stored only in their undecorated form
(scalar per component, or flat row-major), derived quantities never
written.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import FormatError
from .pair import BenchmarkPair
from .potential import LsePotential
from .rng import Seed
from .source import Gaussian, GaussianMixture, SourceDistribution
from .symmatrix import SymMatrix
from .tensorio import atomic_write_text

FORMAT_VERSION = 1


def _fmt_real(x: float) -> str:
    x = float(x)
    if not np.isfinite(x):
        raise FormatError("cannot serialize a non-finite real")
    return "%.17g" % x


def dumps_canonical(value, indent: int = 0) -> str:
    pad = " " * indent
    inner = " " * (indent + 2)
    if isinstance(value, dict):
        if not value:
            return "{}"
        parts = [f'{inner}{json.dumps(str(k))}: {dumps_canonical(v, indent + 2)}'
                 for k, v in value.items()]
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        items = list(value)
        if all(not isinstance(v, (dict, list, tuple)) for v in items):
            return "[" + ", ".join(dumps_canonical(v) for v in items) + "]"
        parts = [f"{inner}{dumps_canonical(v, indent + 2)}" for v in items]
        return "[\n" + ",\n".join(parts) + "\n" + pad + "]"
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "null"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _fmt_real(value)
    if isinstance(value, str):
        return json.dumps(value)
    raise FormatError(f"cannot serialize value of type {type(value).__name__}")


def _cov_entry(cov: SymMatrix) -> dict:
    if cov.is_scalar:
        return {"scalar": float(cov.scalar)}
    return {"dense": [float(v) for v in cov.to_dense().reshape(-1)]}


def _cov_from_entry(entry, dim: int, where: str) -> SymMatrix:
    if not isinstance(entry, dict):
        raise FormatError(f"{where}: expected an object")
    if "scalar" in entry:
        return SymMatrix.scaled_identity(dim, _as_real(entry["scalar"], where + ".scalar"))
    if "dense" in entry:
        flat = [_as_real(v, where + ".dense") for v in entry["dense"]]
        if len(flat) != dim * dim:
            raise FormatError(f"{where}.dense: expected {dim * dim} entries, got {len(flat)}")
        return SymMatrix.from_dense(np.asarray(flat).reshape(dim, dim))
    raise FormatError(f"{where}: expected 'scalar' or 'dense'")


def _source_entry(source: SourceDistribution) -> dict:
    if isinstance(source, Gaussian):
        return {
            "kind": "gaussian",
            "mean": [float(v) for v in source.mean],
            "cov": _cov_entry(source.cov),
        }
    if isinstance(source, GaussianMixture):
        return {
            "kind": "gaussian_mixture",
            "components": [
                {
                    "weight": float(w),
                    "mean": [float(v) for v in c.mean],
                    "cov": _cov_entry(c.cov),
                }
                for w, c in zip(source.weights, source.components)
            ],
        }
    raise FormatError(f"cannot serialize source of type {type(source).__name__}")


def _source_from_entry(entry, dim: int) -> SourceDistribution:
    kind = entry.get("kind")
    if kind == "gaussian":
        mean = np.asarray([_as_real(v, "source.mean") for v in entry["mean"]])
        return Gaussian(mean=mean, cov=_cov_from_entry(entry["cov"], dim, "source.cov"))
    if kind == "gaussian_mixture":
        weights, comps = [], []
        for i, c in enumerate(entry["components"]):
            weights.append(_as_real(c["weight"], f"source.components[{i}].weight"))
            mean = np.asarray([_as_real(v, f"source.components[{i}].mean") for v in c["mean"]])
            comps.append(
                Gaussian(mean=mean, cov=_cov_from_entry(c["cov"], dim, f"source.components[{i}].cov"))
            )
        return GaussianMixture(weights=np.asarray(weights), components=tuple(comps))
    raise FormatError(f"source.kind: unknown kind {kind!r}")


def _as_real(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FormatError(f"{where}: expected a real number, got {value!r}")
    return float(value)


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise FormatError(f"{where}: expected an integer, got {value!r}")
    return value


def pair_to_document(pair: BenchmarkPair) -> dict:
    pot = pair.potential
    matrices = list(pot.matrices)
    if all(m.is_scalar for m in matrices):
        mat_entry = {"scalar": [float(m.scalar) for m in matrices]}
    else:
        mat_entry = {"dense": [[float(v) for v in m.to_dense().reshape(-1)] for m in matrices]}
    doc = {
        "format_version": FORMAT_VERSION,
        "name": pair.name,
        "dim": pair.dim,
        "epsilon": float(pair.epsilon),
        "seed": {"value": int(pair.seed.value), "stream": int(pair.seed.stream)},
        "source": _source_entry(pair.source),
        "potential": {
            "weights": [float(w) for w in pot.weights],
            "centers": [[float(v) for v in row] for row in pot.centers],
            "matrices": mat_entry,
        },
    }
    if pair.meta:
        doc["meta"] = {k: pair.meta[k] for k in sorted(pair.meta)}
    return doc


def document_to_pair(doc: dict) -> BenchmarkPair:
    try:
        version = _as_int(doc["format_version"], "format_version")
        if version != FORMAT_VERSION:
            raise FormatError(f"format_version: expected {FORMAT_VERSION}, got {version}")
        name = doc["name"]
        if not isinstance(name, str):
            raise FormatError("name: expected a string")
        dim = _as_int(doc["dim"], "dim")
        epsilon = _as_real(doc["epsilon"], "epsilon")
        seed_entry = doc["seed"]
        seed = Seed(
            value=_as_int(seed_entry["value"], "seed.value"),
            stream=_as_int(seed_entry["stream"], "seed.stream"),
        )
        source = _source_from_entry(doc["source"], dim)
        pot_entry = doc["potential"]
        weights = [_as_real(w, "potential.weights") for w in pot_entry["weights"]]
        centers = [
            [_as_real(v, f"potential.centers[{i}]") for v in row]
            for i, row in enumerate(pot_entry["centers"])
        ]
        for i, row in enumerate(centers):
            if len(row) != dim:
                raise FormatError(f"potential.centers[{i}]: expected {dim} coordinates")
        mats_entry = pot_entry["matrices"]
        if "scalar" in mats_entry:
            matrices = tuple(
                SymMatrix.scaled_identity(dim, _as_real(s, "potential.matrices.scalar"))
                for s in mats_entry["scalar"]
            )
        elif "dense" in mats_entry:
            matrices = tuple(
                _cov_from_entry({"dense": flat}, dim, f"potential.matrices.dense[{i}]")
                for i, flat in enumerate(mats_entry["dense"])
            )
        else:
            raise FormatError("potential.matrices: expected 'scalar' or 'dense'")
        meta = doc.get("meta", {})
    except KeyError as exc:
        raise FormatError(f"missing required field {exc.args[0]!r}") from None
    potential = LsePotential.from_weights(
        epsilon=epsilon,
        weights=weights,
        centers=np.asarray(centers, dtype=float),
        matrices=matrices,
    )
    return BenchmarkPair(name=name, source=source, potential=potential, seed=seed, meta=meta)


def pair_to_text(pair: BenchmarkPair) -> str:
    return dumps_canonical(pair_to_document(pair)) + "\n"


def pair_digest(pair: BenchmarkPair) -> str:
    return hashlib.sha256(pair_to_text(pair).encode("utf-8")).hexdigest()


def save_pair(path: str | Path, pair: BenchmarkPair) -> None:
    atomic_write_text(path, pair_to_text(pair))


def load_pair(path: str | Path) -> BenchmarkPair:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not a valid pair document ({exc})") from None
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: pair document must be an object")
    return document_to_pair(doc)
