"""Source distributions: Gaussians and Gaussian mixtures.

The reverse sampler needs an evaluable log-density and score, so both
variants carry them analytically.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import logsumexp

from .errors import DimensionMismatchError
from .rng import Seed, generator
from .symmatrix import SymMatrix

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class Gaussian:
    """Multivariate normal with positive definite covariance."""

    mean: np.ndarray
    cov: SymMatrix

    def __post_init__(self) -> None:
        m = np.asarray(self.mean, dtype=float).reshape(-1)
        if m.shape[0] != self.cov.dim:
            raise DimensionMismatchError("mean length does not match covariance dim")
        if self.cov.min_eigenvalue() <= 0:
            raise ValueError("covariance must be positive definite")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "mean", m)

    @property
    def dim(self) -> int:
        return self.cov.dim

    @cached_property
    def _precision(self) -> SymMatrix:
        return self.cov.map_eigenvalues(lambda v: 1.0 / v)

    @cached_property
    def _log_norm(self) -> float:
        return -0.5 * (self.dim * _LOG_2PI + self.cov.logdet())

    def log_density(self, x: np.ndarray) -> np.ndarray:
        diff = np.asarray(x, dtype=float) - self.mean
        return self._log_norm - 0.5 * self._precision.quad_form(diff)

    def score(self, x: np.ndarray) -> np.ndarray:
        diff = np.asarray(x, dtype=float) - self.mean
        return -self._precision.matvec(diff)

    def sample(self, seed: Seed, count: int) -> np.ndarray:
        return self.sample_with(generator(seed), count)

    def sample_with(self, gen: np.random.Generator, count: int) -> np.ndarray:
        z = gen.standard_normal((count, self.dim))
        return self.mean + z @ self.cov.cholesky_lower.T


@dataclass(frozen=True)
class GaussianMixture:
    """Finite mixture of Gaussians; weights must sum to one."""

    weights: np.ndarray
    components: tuple[Gaussian, ...]

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.shape[0] != len(self.components) or w.shape[0] == 0:
            raise DimensionMismatchError("weights and components disagree in length")
        if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        dims = {c.dim for c in self.components}
        if len(dims) != 1:
            raise DimensionMismatchError("mixture components disagree in dimension")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @cached_property
    def _log_weights(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.weights)

    def _component_log_densities(self, x: np.ndarray) -> np.ndarray:
        return np.stack([c.log_density(x) for c in self.components], axis=-1)

    def log_density(self, x: np.ndarray) -> np.ndarray:
        return logsumexp(self._log_weights + self._component_log_densities(x), axis=-1)

    def score(self, x: np.ndarray) -> np.ndarray:
        logs = self._log_weights + self._component_log_densities(x)
        resp = np.exp(logs - logsumexp(logs, axis=-1, keepdims=True))
        scores = np.stack([c.score(x) for c in self.components], axis=-2)
        return np.sum(resp[..., :, None] * scores, axis=-2)

    def sample(self, seed: Seed, count: int) -> np.ndarray:
        return self.sample_with(generator(seed), count)

    def sample_with(self, gen: np.random.Generator, count: int) -> np.ndarray:
        u = gen.random(count)
        choice = np.searchsorted(np.cumsum(self.weights), u, side="left")
        choice = np.minimum(choice, len(self.components) - 1)
        out = np.empty((count, self.dim))
        z = gen.standard_normal((count, self.dim))
        for i, comp in enumerate(self.components):
            mask = choice == i
            if np.any(mask):
                out[mask] = comp.mean + z[mask] @ comp.cov.cholesky_lower.T
        return out


SourceDistribution = Gaussian | GaussianMixture


def standard_source(dim: int, variance: float = 0.25) -> Gaussian:
    """Centered Gaussian source with isotropic covariance."""
    return Gaussian(mean=np.zeros(dim), cov=SymMatrix.scaled_identity(dim, variance))
