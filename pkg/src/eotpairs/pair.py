"""Benchmark pair: a source distribution plus a potential, with derived cache.

Per component the cache holds, all in spectral or log form:

* ``sigma``        conditional covariance  eps * (A + I)^{-1}
* ``b_matrix``     source-side quadratic form  (1/eps) I - (1/eps^2) sigma,
                   computed cancellation-free as (1/eps) A (A + I)^{-1}
* ``log_prefix``   log w + (dim/2) log 2pi + (1/2) logdet sigma
* ``projector``    (A + I)^{-1} and the affine offset of the conditional mean

The log prefix is exactly the x-independent part of the unnormalized
conditional mixture weights, kept in log space because it underflows in
linear space at high dimension.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import DimensionMismatchError
from .potential import LsePotential
from .rng import Seed
from .source import SourceDistribution
from .symmatrix import SymMatrix

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class PairComponent:
    """Derived quantities for one potential component."""

    center: np.ndarray
    matrix: SymMatrix
    sigma: SymMatrix
    sigma_inv: SymMatrix
    b_matrix: SymMatrix
    projector: SymMatrix          # (A + I)^{-1}
    mean_offset: np.ndarray       # (A + I)^{-1} A b
    log_prefix: float             # -inf for zero-weight components
    log_gauss_norm: float         # -(dim/2) log 2pi - (1/2) logdet sigma
    matrix_eigenvalues: np.ndarray

    @property
    def sigma_chol(self) -> np.ndarray:
        return self.sigma.cholesky_lower


@dataclass(frozen=True)
class BenchmarkPair:
    """Portable benchmark artifact: source, potential, and metadata."""

    name: str
    source: SourceDistribution
    potential: LsePotential
    seed: Seed
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.source.dim != self.potential.dim:
            raise DimensionMismatchError("source and potential dimensions differ")
        self.potential.require_appropriate()
        object.__setattr__(self, "meta", MappingProxyType(dict(self.meta)))

    @property
    def epsilon(self) -> float:
        return self.potential.epsilon

    @property
    def dim(self) -> int:
        return self.potential.dim

    @property
    def n_components(self) -> int:
        return self.potential.n_components

    @cached_property
    def components(self) -> tuple[PairComponent, ...]:
        eps = self.epsilon
        d = self.dim
        out = []
        for n in range(self.n_components):
            a = self.potential.matrices[n]
            sigma = a.map_eigenvalues(lambda v: eps / (v + 1.0))
            sigma_inv = a.map_eigenvalues(lambda v: (v + 1.0) / eps)
            b_matrix = a.map_eigenvalues(lambda v: v / (eps * (v + 1.0)))
            projector = a.map_eigenvalues(lambda v: 1.0 / (v + 1.0))
            center = self.potential.centers[n]
            mean_offset = eps * b_matrix.matvec(center)
            log_det_sigma = sigma.logdet()
            lw = float(self.potential.log_weights[n])
            log_prefix = lw + 0.5 * d * _LOG_2PI + 0.5 * log_det_sigma if np.isfinite(lw) else -np.inf
            out.append(
                PairComponent(
                    center=center,
                    matrix=a,
                    sigma=sigma,
                    sigma_inv=sigma_inv,
                    b_matrix=b_matrix,
                    projector=projector,
                    mean_offset=mean_offset,
                    log_prefix=log_prefix,
                    log_gauss_norm=-0.5 * (d * _LOG_2PI + log_det_sigma),
                    matrix_eigenvalues=a.eigenvalues,
                )
            )
        return tuple(out)

    @cached_property
    def log_prefixes(self) -> np.ndarray:
        return np.array([c.log_prefix for c in self.components])

    def max_center_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.potential.centers, axis=1)))
