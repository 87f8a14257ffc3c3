"""Pair definition file reader/writer for the consumer side.

This is a deliberately independent implementation of the same canonical
format the producer writes: fixed key order, two-space indentation, reals
with 17 significant digits, matrices stored undecorated. Loading a file and
re-serializing it must reproduce the bytes exactly.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

FORMAT_VERSION = 1


class PairFormatError(ValueError):
    """Problem with a pair document; the message names the offending field."""


def _fmt_real(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise PairFormatError("cannot serialize a non-finite real")
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
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return _fmt_real(value)
    if isinstance(value, str):
        return json.dumps(value)
    raise PairFormatError(f"cannot serialize value of type {type(value).__name__}")


def load_document(path: str | Path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise PairFormatError(f"{path}: not a valid pair document ({exc})") from None
    if not isinstance(doc, dict):
        raise PairFormatError(f"{path}: pair document must be an object")
    return doc


def real(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise PairFormatError(f"{where}: expected a real number, got {value!r}")
    return float(value)


def integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise PairFormatError(f"{where}: expected an integer, got {value!r}")
    return value


def require(doc: dict, key: str, where: str = ""):
    if key not in doc:
        prefix = f"{where}." if where else ""
        raise PairFormatError(f"missing required field {prefix}{key}")
    return doc[key]


def canonical_document(doc: dict) -> dict:
    """Rebuild the document in canonical key order with typed values."""
    out = {
        "format_version": integer(require(doc, "format_version"), "format_version"),
        "name": require(doc, "name"),
        "dim": integer(require(doc, "dim"), "dim"),
        "epsilon": real(require(doc, "epsilon"), "epsilon"),
    }
    if not isinstance(out["name"], str):
        raise PairFormatError("name: expected a string")
    seed = require(doc, "seed")
    out["seed"] = {
        "value": integer(require(seed, "value", "seed"), "seed.value"),
        "stream": integer(require(seed, "stream", "seed"), "seed.stream"),
    }
    source = require(doc, "source")
    kind = require(source, "kind", "source")
    if kind == "gaussian":
        out["source"] = {
            "kind": "gaussian",
            "mean": [real(v, "source.mean") for v in require(source, "mean", "source")],
            "cov": _canonical_cov(require(source, "cov", "source"), "source.cov"),
        }
    elif kind == "gaussian_mixture":
        comps = []
        for i, c in enumerate(require(source, "components", "source")):
            comps.append({
                "weight": real(require(c, "weight", f"source.components[{i}]"),
                               f"source.components[{i}].weight"),
                "mean": [real(v, f"source.components[{i}].mean") for v in c["mean"]],
                "cov": _canonical_cov(c["cov"], f"source.components[{i}].cov"),
            })
        out["source"] = {"kind": "gaussian_mixture", "components": comps}
    else:
        raise PairFormatError(f"source.kind: unknown kind {kind!r}")
    potential = require(doc, "potential")
    pot = {
        "weights": [real(w, "potential.weights") for w in require(potential, "weights", "potential")],
        "centers": [[real(v, f"potential.centers[{i}]") for v in row]
                    for i, row in enumerate(require(potential, "centers", "potential"))],
    }
    mats = require(potential, "matrices", "potential")
    if "scalar" in mats:
        pot["matrices"] = {"scalar": [real(s, "potential.matrices.scalar") for s in mats["scalar"]]}
    elif "dense" in mats:
        pot["matrices"] = {"dense": [[real(v, f"potential.matrices.dense[{i}]") for v in flat]
                                     for i, flat in enumerate(mats["dense"])]}
    else:
        raise PairFormatError("potential.matrices: expected 'scalar' or 'dense'")
    out["potential"] = pot
    if "meta" in doc:
        out["meta"] = {k: doc["meta"][k] for k in sorted(doc["meta"])}
    return out


def _canonical_cov(entry, where: str) -> dict:
    if not isinstance(entry, dict):
        raise PairFormatError(f"{where}: expected an object")
    if "scalar" in entry:
        return {"scalar": real(entry["scalar"], where + ".scalar")}
    if "dense" in entry:
        return {"dense": [real(v, where + ".dense") for v in entry["dense"]]}
    raise PairFormatError(f"{where}: expected 'scalar' or 'dense'")


def document_text(doc: dict) -> str:
    return dumps_canonical(canonical_document(doc)) + "\n"
