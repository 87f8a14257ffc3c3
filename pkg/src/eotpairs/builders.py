"""Benchmark pair constructors.

Two recipes: the mixtures presets (random sphere centers, shared scalar
matrices, weights solved so the mixture responsibilities equal fixed
Gaussian densities in x) and the data-driven recipe (k-means centers on a
target dataset, lambda * I matrices, uniform weights).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BuilderError
from .pair import BenchmarkPair
from .potential import LsePotential
from .rng import Seed, generator
from .source import Gaussian, SourceDistribution, standard_source
from .symmatrix import SymMatrix

_LOG_2PI = float(np.log(2.0 * np.pi))

PRESET_DIMS = (2, 16, 64, 128)
PRESET_EPSILONS = (0.1, 1.0, 10.0)


def preset_matrix_scale(dim: int, epsilon: float) -> float:
    """Shared scalar for the component matrices of a mixtures preset."""
    if epsilon <= 1.0:
        return 1.0 / 16.0
    return 9.0 / 40.0 if dim == 2 else 1.0 / 100.0


@dataclass(frozen=True)
class MixturesPresetSpec:
    dim: int
    epsilon: float
    seed: Seed
    n_components: int = 5
    radius: float = 5.0
    source_variance: float = 0.25
    matrix_scale: Optional[float] = None  # overrides the preset table

    def __post_init__(self) -> None:
        if self.dim < 1 or self.n_components < 1:
            raise BuilderError("dim and component count must be positive")
        if self.epsilon <= 0 or self.radius <= 0 or self.source_variance <= 0:
            raise BuilderError("epsilon, radius and source variance must be positive")


def sphere_centers(dim: int, count: int, radius: float, seed: Seed) -> np.ndarray:
    """Uniform points on the sphere of the given radius (normalized Gaussians)."""
    if radius <= 0:
        raise BuilderError("radius must be positive")
    gen = generator(seed, 0)
    pts = gen.standard_normal((count, dim))
    norms = np.linalg.norm(pts, axis=1, keepdims=True)
    # A zero draw has probability zero; resample defensively if it happens.
    while np.any(norms == 0.0):
        bad = norms[:, 0] == 0.0
        pts[bad] = gen.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(pts, axis=1, keepdims=True)
    return radius * pts / norms


def _uniform_responsibility_log_weights(
    epsilon: float, matrices: list[SymMatrix], n: int, dim: int
) -> np.ndarray:
    """Solve for log w_n making the mixture responsibilities equal the
    normalized Gaussian densities N(x | b_n, B_n^{-1}) / n at every x.

    Requires every B_n = (1/eps) A_n (A_n + I)^{-1} positive definite. The
    weights are shifted so the largest is one; responsibilities and all
    derived objects are invariant under that common rescaling.
    """
    logs = np.empty(n)
    for i, a in enumerate(matrices):
        lam = a.eigenvalues
        if np.any(lam <= 0):
            raise BuilderError(
                f"component {i}: source-side quadratic form is not positive definite "
                "(matrix eigenvalues must be positive for the responsibility rule)"
            )
        logdet_b = float(np.sum(np.log(lam / (epsilon * (lam + 1.0)))))
        logdet_sigma = float(np.sum(np.log(epsilon / (lam + 1.0))))
        logs[i] = 0.5 * logdet_b - np.log(n) - dim * _LOG_2PI - 0.5 * logdet_sigma
    return logs - np.max(logs)


def build_mixtures_preset(spec: MixturesPresetSpec) -> BenchmarkPair:
    """Construct a mixtures preset pair; deterministic per seed."""
    scale = spec.matrix_scale if spec.matrix_scale is not None else preset_matrix_scale(
        spec.dim, spec.epsilon
    )
    matrices = [SymMatrix.scaled_identity(spec.dim, scale) for _ in range(spec.n_components)]
    centers = sphere_centers(spec.dim, spec.n_components, spec.radius, spec.seed)
    log_w = _uniform_responsibility_log_weights(
        spec.epsilon, matrices, spec.n_components, spec.dim
    )
    potential = LsePotential(
        epsilon=spec.epsilon,
        log_weights=log_w,
        centers=centers,
        matrices=tuple(matrices),
    )
    name = f"mixtures-d{spec.dim}-eps{spec.epsilon:g}-n{spec.n_components}-seed{spec.seed.value}"
    meta = {
        "kind": "preset-mixtures",
        "radius": spec.radius,
        "source_variance": spec.source_variance,
        "matrix_scale": scale,
        "paper_dim": spec.dim in PRESET_DIMS,
        "paper_epsilon": spec.epsilon in PRESET_EPSILONS,
    }
    return BenchmarkPair(
        name=name,
        source=standard_source(spec.dim, spec.source_variance),
        potential=potential,
        seed=spec.seed,
        meta=meta,
    )


@dataclass(frozen=True)
class KMeansResult:
    centers: np.ndarray
    labels: np.ndarray
    inertia: float
    counts: np.ndarray
    iterations: int
    restart_index: int


def _kmeans_pp_seeding(data: np.ndarray, k: int, gen: np.random.Generator) -> np.ndarray:
    m = data.shape[0]
    centers = np.empty((k, data.shape[1]))
    centers[0] = data[gen.integers(m)]
    d2 = np.sum((data - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = data[gen.integers(m)]
            continue
        u = gen.random() * total
        idx = int(np.searchsorted(np.cumsum(d2), u, side="left"))
        centers[j] = data[min(idx, m - 1)]
        d2 = np.minimum(d2, np.sum((data - centers[j]) ** 2, axis=1))
    return centers


def _sq_dists(data: np.ndarray, centers: np.ndarray) -> np.ndarray:
    dd = np.sum(data * data, axis=1)[:, None]
    cc = np.sum(centers * centers, axis=1)[None, :]
    return np.maximum(dd + cc - 2.0 * (data @ centers.T), 0.0)


def kmeans(
    data: np.ndarray,
    k: int,
    seed: Seed,
    restarts: int = 10,
    max_iter: int = 300,
) -> KMeansResult:
    """Lloyd iterations with k-means++ seeding, best of ``restarts`` by inertia.

    A restart producing an empty cluster is abandoned and re-seeded; if every
    restart fails, an error is raised.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    m = data.shape[0]
    if k < 1 or k > m:
        raise BuilderError(f"cluster count {k} must lie in [1, {m}]")
    if np.unique(data, axis=0).shape[0] < k:
        raise BuilderError("dataset has fewer distinct rows than requested clusters")
    best: KMeansResult | None = None
    for r in range(restarts):
        gen = generator(seed, r)
        centers = _kmeans_pp_seeding(data, k, gen)
        failed = False
        labels = np.zeros(m, dtype=int)
        for it in range(max_iter):
            d2 = _sq_dists(data, centers)
            labels = np.argmin(d2, axis=1)
            counts = np.bincount(labels, minlength=k)
            if np.any(counts == 0):
                failed = True
                break
            new_centers = np.zeros_like(centers)
            np.add.at(new_centers, labels, data)
            new_centers /= counts[:, None]
            shift = float(np.max(np.abs(new_centers - centers)))
            centers = new_centers
            if shift <= 1e-12:
                break
        if failed:
            continue
        inertia = float(np.sum(np.min(_sq_dists(data, centers), axis=1)))
        if best is None or inertia < best.inertia:
            best = KMeansResult(
                centers=centers,
                labels=labels,
                inertia=inertia,
                counts=np.bincount(labels, minlength=k),
                iterations=it + 1,
                restart_index=r,
            )
    if best is None:
        raise BuilderError("k-means produced an empty cluster in every restart")
    return best


@dataclass(frozen=True)
class DataRecipeSpec:
    target: np.ndarray
    n_clusters: int
    lam: float
    epsilon: float
    seed: Seed
    kmeans_restarts: int = 10
    kmeans_max_iter: int = 300

    def __post_init__(self) -> None:
        t = np.atleast_2d(np.asarray(self.target, dtype=float))
        if self.n_clusters < 1 or self.n_clusters > t.shape[0]:
            raise BuilderError("cluster count must lie within the dataset size")
        if self.lam <= 0 or self.epsilon <= 0:
            raise BuilderError("lambda and epsilon must be positive")
        object.__setattr__(self, "target", t)


def gaussian_fit_source(data: np.ndarray) -> Gaussian:
    """Gaussian fit of a dataset, used as the default source distribution."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.shape[0] < 2:
        raise BuilderError("need at least two rows to fit a source Gaussian")
    cov = np.cov(data, rowvar=False, ddof=1).reshape(data.shape[1], data.shape[1])
    return Gaussian(mean=data.mean(axis=0), cov=SymMatrix.from_dense(cov))


def build_from_data(
    spec: DataRecipeSpec,
    source: Optional[SourceDistribution] = None,
    source_data: Optional[np.ndarray] = None,
) -> tuple[BenchmarkPair, KMeansResult]:
    """Data-driven pair: k-means centers, lambda * I matrices, uniform weights.

    The source distribution is taken as given, or fit as a Gaussian to
    ``source_data``.
    """
    if source is None:
        if source_data is None:
            raise BuilderError("provide either a source distribution or source data")
        source = gaussian_fit_source(source_data)
    fit = kmeans(
        spec.target,
        spec.n_clusters,
        spec.seed.child(0),
        restarts=spec.kmeans_restarts,
        max_iter=spec.kmeans_max_iter,
    )
    dim = spec.target.shape[1]
    if source.dim != dim:
        raise BuilderError("source dimension does not match the target dataset")
    potential = LsePotential.from_weights(
        epsilon=spec.epsilon,
        weights=np.full(spec.n_clusters, 1.0 / spec.n_clusters),
        centers=fit.centers,
        matrices=tuple(
            SymMatrix.scaled_identity(dim, spec.lam) for _ in range(spec.n_clusters)
        ),
    )
    name = f"from-data-d{dim}-eps{spec.epsilon:g}-n{spec.n_clusters}-seed{spec.seed.value}"
    meta = {
        "kind": "from-data",
        "lambda": spec.lam,
        "n_clusters": spec.n_clusters,
        "kmeans_inertia": fit.inertia,
        "kmeans_restart": fit.restart_index,
    }
    pair = BenchmarkPair(name=name, source=source, potential=potential, seed=spec.seed, meta=meta)
    return pair, fit
