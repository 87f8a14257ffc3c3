from __future__ import annotations

import numpy as np
import pytest

from eotpairs import (
    BenchmarkPair,
    Gaussian,
    LsePotential,
    MixturesPresetSpec,
    Seed,
    SymMatrix,
    build_mixtures_preset,
    standard_source,
)


def make_pair(
    epsilon: float,
    weights,
    centers,
    matrices,
    source=None,
    name: str = "test-pair",
    seed: Seed = Seed(0),
) -> BenchmarkPair:
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    potential = LsePotential.from_weights(epsilon, weights, centers, tuple(matrices))
    if source is None:
        source = standard_source(centers.shape[1], 1.0)
    return BenchmarkPair(name=name, source=source, potential=potential, seed=seed)


def single_component_pair(dim: int, a: float = 0.0, epsilon: float = 1.0, source_var: float = 1.0):
    return make_pair(
        epsilon,
        [1.0],
        np.zeros((1, dim)),
        (SymMatrix.scaled_identity(dim, a),),
        source=standard_source(dim, source_var),
    )


def random_dense_sym(rng: np.random.Generator, dim: int, lo: float = -0.5, hi: float = 3.0) -> SymMatrix:
    """Random symmetric matrix with eigenvalues in [lo, hi]."""
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    vals = rng.uniform(lo, hi, size=dim)
    return SymMatrix.from_dense((q * vals) @ q.T)


def random_potential(
    rng: np.random.Generator,
    dim: int,
    n: int,
    epsilon: float,
    center_scale: float = 3.0,
    lo: float = -0.5,
    hi: float = 3.0,
) -> LsePotential:
    weights = rng.uniform(0.2, 1.0, size=n)
    centers = rng.normal(scale=center_scale, size=(n, dim))
    matrices = tuple(random_dense_sym(rng, dim, lo, hi) for _ in range(n))
    return LsePotential.from_weights(epsilon, weights, centers, matrices)


def random_pair(rng: np.random.Generator, dim: int, n: int, epsilon: float, **kw) -> BenchmarkPair:
    potential = random_potential(rng, dim, n, epsilon, **kw)
    return BenchmarkPair(
        name="random-pair",
        source=standard_source(dim, 1.0),
        potential=potential,
        seed=Seed(0),
    )


@pytest.fixture(scope="session")
def preset_d2():
    return build_mixtures_preset(MixturesPresetSpec(dim=2, epsilon=1.0, seed=Seed(7)))


@pytest.fixture(scope="session")
def preset_d1():
    return build_mixtures_preset(MixturesPresetSpec(dim=1, epsilon=1.0, seed=Seed(11)))


@pytest.fixture(scope="session")
def preset_d16_small_eps():
    return build_mixtures_preset(MixturesPresetSpec(dim=16, epsilon=0.1, seed=Seed(5)))


def two_moons(rng: np.random.Generator, count: int, noise: float = 0.08) -> np.ndarray:
    """Standard interleaved half-circles dataset."""
    half = count // 2
    t1 = rng.random(half) * np.pi
    t2 = rng.random(count - half) * np.pi
    upper = np.stack([np.cos(t1), np.sin(t1)], axis=1)
    lower = np.stack([1.0 - np.cos(t2), 0.5 - np.sin(t2)], axis=1)
    pts = np.vstack([upper, lower])
    return pts + rng.normal(scale=noise, size=pts.shape)
