"""Closed-form conditional plans: per-point Gaussian mixtures.

For a benchmark pair, the conditional distribution of y given x is the
mixture  sum_n gamma_n(x) N(y | mu_n(x), sigma_n)  with

    sigma_n  = eps (A_n + I)^{-1}
    mu_n(x)  = (A_n + I)^{-1} (A_n b_n + x)
    gamma_n  propto  exp(log_prefix_n - (x - b_n)^T B_n (x - b_n) / 2)

All mixture arithmetic is done in log space with max shifts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.special import logsumexp

from .errors import DimensionMismatchError
from .pair import BenchmarkPair
from .quadrature import log_gauss_smoothed_potential
from .rng import Seed, generator
from .symmatrix import SymMatrix
from .potential import potential_value

__all__ = [
    "ConditionalPlanMixture",
    "SamplePair",
    "JointSample",
    "conditional_plan",
    "conditional_parameters",
    "sample_conditional",
    "sample_joint",
    "sample_target",
    "conditional_moments",
    "conditional_moments_batch",
    "target_moments",
    "log_forward_density_unnormalized",
    "conditional_log_density",
    "log_reverse_density_unnormalized",
    "z_quadrature_oracle",
    "log_z_quadrature_oracle",
]


def _check_point(pair: BenchmarkPair, x: np.ndarray, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1] != pair.dim:
        raise DimensionMismatchError(f"{name} has length {arr.shape[-1]}, expected {pair.dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def log_unnormalized_weights(pair: BenchmarkPair, x: np.ndarray) -> np.ndarray:
    """log w~_n(x) for rows of ``x``; shape (..., components)."""
    x = _check_point(pair, x)
    cols = [
        c.log_prefix - 0.5 * c.b_matrix.quad_form(x - c.center)
        for c in pair.components
    ]
    return np.stack(cols, axis=-1)


def conditional_parameters(pair: BenchmarkPair, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batch mixture parameters at rows of ``x``.

    Returns ``(log_gammas, means)`` with shapes (..., N) and (..., N, dim).
    Covariances are x-independent and live on ``pair.components``.
    """
    log_w = log_unnormalized_weights(pair, x)
    log_gammas = log_w - logsumexp(log_w, axis=-1, keepdims=True)
    means = np.stack(
        [c.projector.matvec(np.asarray(x, dtype=float)) + c.mean_offset for c in pair.components],
        axis=-2,
    )
    return log_gammas, means


@dataclass(frozen=True)
class ConditionalPlanMixture:
    """Mixture representation of the conditional plan at one source point."""

    x: np.ndarray
    log_gammas: np.ndarray
    means: np.ndarray
    covariances: tuple[SymMatrix, ...]

    @property
    def n_components(self) -> int:
        return self.log_gammas.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def gammas(self) -> np.ndarray:
        return np.exp(self.log_gammas)


def conditional_plan(pair: BenchmarkPair, x: np.ndarray) -> ConditionalPlanMixture:
    x = _check_point(pair, x).reshape(-1)
    log_gammas, means = conditional_parameters(pair, x)
    return ConditionalPlanMixture(
        x=x,
        log_gammas=log_gammas,
        means=means,
        covariances=tuple(c.sigma for c in pair.components),
    )


def _categorical(log_gammas: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw on exp(log_gammas - max), renormalized; ties go to
    the lowest index. ``log_gammas`` is (..., N), ``u`` matches the batch."""
    p = np.exp(log_gammas - np.max(log_gammas, axis=-1, keepdims=True))
    cdf = np.cumsum(p, axis=-1)
    total = cdf[..., -1:]
    idx = np.sum(u[..., None] * total > cdf, axis=-1)
    return np.minimum(idx, log_gammas.shape[-1] - 1)


def sample_conditional(plan: ConditionalPlanMixture, seed: Seed, count: int) -> np.ndarray:
    """Draw ``count`` points from the mixture; per-index deterministic.

    Component choices and Gaussian innovations come from separate counter
    blocks, so a longer run extends a shorter one draw for draw.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    u = generator(seed, 0).random(count)
    z = generator(seed, 1).standard_normal((count, plan.dim))
    comp = _categorical(np.broadcast_to(plan.log_gammas, (count, plan.n_components)), u)
    out = np.empty((count, plan.dim))
    for n, cov in enumerate(plan.covariances):
        mask = comp == n
        if np.any(mask):
            out[mask] = plan.means[n] + z[mask] @ cov.cholesky_lower.T
    return out


@dataclass(frozen=True)
class SamplePair:
    x: np.ndarray
    y: np.ndarray
    component: int


@dataclass(frozen=True)
class JointSample:
    """Struct-of-arrays batch of plan draws (x, y, chosen component)."""

    xs: np.ndarray
    ys: np.ndarray
    components: np.ndarray

    def __len__(self) -> int:
        return self.xs.shape[0]

    def __iter__(self) -> Iterator[SamplePair]:
        for i in range(len(self)):
            yield SamplePair(self.xs[i], self.ys[i], int(self.components[i]))


def sample_joint(pair: BenchmarkPair, seed: Seed, count: int) -> JointSample:
    """Draw (x, y) from the plan: x from the source, then y given x."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    d = pair.dim
    if count == 0:
        return JointSample(np.empty((0, d)), np.empty((0, d)), np.empty(0, dtype=int))
    xs = pair.source.sample_with(generator(seed, 0), count)
    u = generator(seed, 1).random(count)
    z = generator(seed, 2).standard_normal((count, d))
    log_gammas, means = conditional_parameters(pair, xs)
    comp = _categorical(log_gammas, u)
    ys = np.empty((count, d))
    for n, c in enumerate(pair.components):
        mask = comp == n
        if np.any(mask):
            ys[mask] = means[mask, n, :] + z[mask] @ c.sigma_chol.T
    return JointSample(xs=xs, ys=ys, components=comp)


def sample_target(pair: BenchmarkPair, seed: Seed, count: int) -> np.ndarray:
    """Marginal target draws: joint sampling with x discarded."""
    return sample_joint(pair, seed, count).ys


def conditional_moments(plan: ConditionalPlanMixture) -> tuple[np.ndarray, SymMatrix]:
    """Analytic mean and covariance of the conditional mixture."""
    g = plan.gammas
    mean = g @ plan.means
    second = np.einsum("n,nd,ne->de", g, plan.means, plan.means)
    for n, cov in enumerate(plan.covariances):
        second += g[n] * cov.to_dense()
    cov = second - np.outer(mean, mean)
    return mean, SymMatrix.from_dense(0.5 * (cov + cov.T))


def conditional_moments_batch(pair: BenchmarkPair, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Analytic conditional moments at many source points.

    Returns means (M, dim) and covariances (M, dim, dim).
    """
    xs = np.atleast_2d(_check_point(pair, xs))
    log_gammas, mus = conditional_parameters(pair, xs)
    g = np.exp(log_gammas)
    means = np.einsum("mn,mnd->md", g, mus)
    covs = np.einsum("mn,mnd,mne->mde", g, mus, mus)
    sig = np.stack([c.sigma.to_dense() for c in pair.components])
    covs += np.einsum("mn,nde->mde", g, sig)
    covs -= np.einsum("md,me->mde", means, means)
    return means, covs


@dataclass(frozen=True)
class TargetMoments:
    mean: np.ndarray
    cov: np.ndarray
    sample_count: int


def target_moments(pair: BenchmarkPair, seed: Seed, count: int) -> TargetMoments:
    """Monte-Carlo moments of the target marginal, Rao-Blackwellized.

    Only the source expectation is sampled; the inner conditional mean and
    second moment are analytic, which removes the conditional noise floor.
    """
    if count < 2:
        raise ValueError("count must be at least 2")
    xs = pair.source.sample_with(generator(seed, 0), count)
    log_gammas, mus = conditional_parameters(pair, xs)
    g = np.exp(log_gammas)
    mean = np.einsum("mn,mnd->d", g, mus) / count
    second = np.einsum("mn,mnd,mne->de", g, mus, mus) / count
    sig = np.stack([c.sigma.to_dense() for c in pair.components])
    second += np.einsum("nde,n->de", sig, g.mean(axis=0))
    cov = second - np.outer(mean, mean)
    return TargetMoments(mean=mean, cov=0.5 * (cov + cov.T), sample_count=count)


def log_forward_density_unnormalized(pair: BenchmarkPair, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """(f(y) - |x - y|^2 / 2) / eps: the conditional density exponent,
    with the x-dependent normalizer deliberately left out."""
    x = _check_point(pair, x)
    y = _check_point(pair, y, "y")
    sq = np.sum((x - y) ** 2, axis=-1)
    return (potential_value(pair.potential, y) - 0.5 * sq) / pair.epsilon


def conditional_log_density(pair: BenchmarkPair, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Normalized log density of y given x, via the explicit mixture form."""
    log_gammas, means = conditional_parameters(pair, x)
    y = _check_point(pair, y, "y")
    diff = y[..., None, :] - means
    cols = []
    for n, c in enumerate(pair.components):
        cols.append(c.log_gauss_norm - 0.5 * c.sigma_inv.quad_form(diff[..., n, :]))
    return logsumexp(log_gammas + np.stack(cols, axis=-1), axis=-1)


def log_reverse_density_unnormalized(
    pair: BenchmarkPair, y: np.ndarray, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized reverse conditional: log of plan density times source
    density, with its analytic gradient in x. This is the MALA target.

    The gradient uses the factored form of the conditional density: the
    x-dependence enters through the quadratic coupling and the mixture
    normalizer, so

        grad_x = (y - x) / eps + sum_n gamma_n(x) B_n (x - b_n) + source score.
    """
    x = _check_point(pair, x)
    y = _check_point(pair, y, "y")
    value = conditional_log_density(pair, x, y) + pair.source.log_density(x)
    log_w = log_unnormalized_weights(pair, x)
    gammas = np.exp(log_w - logsumexp(log_w, axis=-1, keepdims=True))
    pull = np.stack([c.b_matrix.matvec(x - c.center) for c in pair.components], axis=-2)
    grad = (y - x) / pair.epsilon
    grad += np.sum(gammas[..., None] * pull, axis=-2)
    grad += pair.source.score(x)
    return value, grad


def log_z_quadrature_oracle(pair: BenchmarkPair, x: np.ndarray, rel_tol: float = 1e-10) -> float:
    """log Z_x by adaptive quadrature; dimensions 1 and 2 only."""
    x = _check_point(pair, x).reshape(-1)
    eps = pair.epsilon
    d = pair.dim
    smoothed = log_gauss_smoothed_potential(pair.potential, x, float(np.sqrt(eps)), rel_tol=rel_tol)
    return 0.5 * d * float(np.log(2.0 * np.pi * eps)) + smoothed


def z_quadrature_oracle(pair: BenchmarkPair, x: np.ndarray, rel_tol: float = 1e-10) -> float:
    """Conditional normalizer Z_x = integral exp((f(y) - |x-y|^2/2)/eps) dy."""
    return float(np.exp(log_z_quadrature_oracle(pair, x, rel_tol=rel_tol)))
