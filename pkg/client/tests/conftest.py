from __future__ import annotations

import json
import re
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

CORE_CLI = [sys.executable, "-m", "eotpairs.cli"]

_TENSOR_HEADER = re.compile(rb"^(\d+) (\d+) f64le\n")


def run_core(*args: object) -> subprocess.CompletedProcess:
    """Drive the producer through its CLI; the only coupling allowed here."""
    proc = subprocess.run([*CORE_CLI, *map(str, args)], capture_output=True, text=True)
    if proc.returncode != 0:
        raise AssertionError(f"core CLI failed ({proc.returncode}): {proc.stderr}")
    return proc


def read_tensor(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    m = _TENSOR_HEADER.match(blob)
    assert m, f"{path}: not a sample tensor file"
    count, dim = int(m.group(1)), int(m.group(2))
    return np.frombuffer(blob[m.end():], dtype="<f8").reshape(count, dim)


@pytest.fixture(scope="session")
def workdir(tmp_path_factory) -> Path:
    return tmp_path_factory.mktemp("client")


@pytest.fixture(scope="session")
def pair_path(workdir: Path) -> Path:
    path = workdir / "d2.pair.json"
    run_core("build", "preset-mixtures", "--dim", 2, "--eps", 1.0, "--seed", 7, "-o", path)
    return path


@pytest.fixture(scope="session")
def dense_pair_path(workdir: Path) -> Path:
    # A from-data build exercises uniform weights and a fitted dense source.
    rng = np.random.default_rng(5)
    target = workdir / "target.csv"
    source = workdir / "source.csv"
    np.savetxt(target, rng.normal(size=(300, 2)) + [2.0, -1.0], delimiter=",")
    np.savetxt(source, rng.normal(size=(300, 2)) @ [[1.0, 0.3], [0.3, 0.8]], delimiter=",")
    path = workdir / "fd.pair.json"
    run_core("build", "from-data", "--target", target, "--source", source,
             "--clusters", 12, "--lambda", 20.0, "--eps", 0.5, "--seed", 9, "-o", path)
    return path


@pytest.fixture(scope="session")
def reference_doc(workdir: Path, pair_path: Path) -> dict:
    ref = workdir / "ref.json"
    run_core("export-reference", "--pair", pair_path, "--probe-seed", 17, "-o", ref)
    return json.loads(ref.read_text())


def energy_distance_pvalue(
    a: np.ndarray, b: np.ndarray, permutations: int, rng: np.random.Generator
) -> float:
    """Permutation p-value for the two-sample energy statistic."""
    pooled = np.vstack([a, b])
    sq = np.sum(pooled * pooled, axis=1)
    d = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2.0 * pooled @ pooled.T, 0.0))
    n, m = a.shape[0], b.shape[0]

    def statistic(idx_a: np.ndarray) -> float:
        mask = np.zeros(n + m, dtype=bool)
        mask[idx_a] = True
        u = mask.astype(float)
        v = 1.0 - u
        du = d @ u
        s_ab = float(v @ du)
        s_aa = float(u @ du)
        s_bb = float(v @ (d @ v))
        return 2.0 * s_ab / (n * m) - s_aa / (n * n) - s_bb / (m * m)

    observed = statistic(np.arange(n))
    hits = 0
    for _ in range(permutations):
        idx = rng.permutation(n + m)[:n]
        if statistic(idx) >= observed:
            hits += 1
    return (1.0 + hits) / (1.0 + permutations)
