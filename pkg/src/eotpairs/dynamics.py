"""Optimal bridge drift in closed form, SDE simulation, Brownian bridges.

The drift of the bridge process dX_t = v(X_t, t) dt + sqrt(eps) dW_t is,
for a pair built from an LSE potential,

    v(x, t) = eps * sum_n softmax_n(log w_n + (1/2) logdet sigma_n^t
                                    - (1/2) (x-b_n)^T B_n^t (x-b_n)) * (-B_n^t (x-b_n))

with A_n^t = (1-t) A_n, sigma_n^t = eps (A_n^t + I)^{-1} and the
cancellation-free B_n^t = (1/eps) A_n (A_n^t + I)^{-1}, which stays finite
as t -> 1. Drift evaluation lives on [0, 1); the terminal time never needs
a drift. The quadrature oracle recovers the same drift from the smoothed
endpoint reweighting factor and adjudicates the eps prefactor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import DimensionMismatchError
from .pair import BenchmarkPair
from .plan import sample_joint
from .quadrature import log_gauss_smoothed_potential
from .rng import Seed, generator

_SIM_BLOCK = 8192


def _check_time(t: float) -> float:
    t = float(t)
    if not 0.0 <= t < 1.0:
        raise ValueError(f"drift time must lie in [0, 1), got {t}")
    return t


def optimal_drift(pair: BenchmarkPair, x: np.ndarray, t: float) -> np.ndarray:
    """Closed-form optimal drift at rows of ``x`` and time ``t`` in [0, 1)."""
    t = _check_time(t)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != pair.dim:
        raise DimensionMismatchError("point length does not match pair dimension")
    eps = pair.epsilon
    log_w = pair.potential.log_weights
    scores = []
    pulls = []
    for n, c in enumerate(pair.components):
        lam = c.matrix_eigenvalues
        ldet_t = float(np.sum(np.log(eps / ((1.0 - t) * lam + 1.0))))
        bt = c.matrix.map_eigenvalues(lambda v: v / (eps * ((1.0 - t) * v + 1.0)))
        diff = x - c.center
        scores.append(log_w[n] + 0.5 * ldet_t - 0.5 * bt.quad_form(diff))
        pulls.append(bt.matvec(diff))
    scores = np.stack(scores, axis=-1)
    weights = np.exp(scores - logsumexp(scores, axis=-1, keepdims=True))
    pull = np.stack(pulls, axis=-2)
    return -eps * np.sum(weights[..., None] * pull, axis=-2)


class DriftField:
    """Callable drift contract: ``field(x, t) -> drift`` for batched x."""

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError


@dataclass(frozen=True)
class OptimalDrift(DriftField):
    pair: BenchmarkPair

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:
        return optimal_drift(self.pair, x, t)


@dataclass(frozen=True)
class CustomDrift(DriftField):
    fn: Callable[[np.ndarray, float], np.ndarray]

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:
        v = np.asarray(self.fn(x, t), dtype=float)
        if v.shape != np.shape(x):
            raise DimensionMismatchError("custom drift returned a wrong shape")
        return v


@dataclass(frozen=True)
class PerturbedDrift(DriftField):
    base: DriftField
    offset: np.ndarray

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:
        return self.base(x, t) + np.asarray(self.offset, dtype=float)


def drift_quadrature_oracle(
    pair: BenchmarkPair, x: np.ndarray, t: float, rel_tol: float = 1e-11
) -> np.ndarray:
    """Drift recovered numerically: eps times the gradient of the log of the
    Gaussian-smoothed endpoint factor, by central differences. dim <= 2."""
    t = _check_time(t)
    x = np.asarray(x, dtype=float).reshape(-1)
    eps = pair.epsilon
    sigma = float(np.sqrt((1.0 - t) * eps))
    h = 1e-5 * (1.0 + float(np.linalg.norm(x)))

    def g(z: np.ndarray) -> float:
        return log_gauss_smoothed_potential(pair.potential, z, sigma, rel_tol=rel_tol)

    out = np.empty_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = eps * (g(x + e) - g(x - e)) / (2.0 * h)
    return out


@dataclass(frozen=True)
class Trajectory:
    """One simulated path on a strictly increasing grid over [0, 1]."""

    times: np.ndarray
    states: np.ndarray
    epsilon: float
    diverged: bool = False

    def __post_init__(self) -> None:
        if self.times.ndim != 1 or self.times.shape[0] < 2:
            raise ValueError("trajectory grid needs at least two times")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory grid must be strictly increasing")
        if self.states.shape[0] != self.times.shape[0]:
            raise DimensionMismatchError("states and times disagree in length")


def _simulate_blocks(
    drift: DriftField,
    x0: np.ndarray,
    epsilon: float,
    steps: int,
    seed: Seed,
    keep_states: bool,
    observer: Callable[[int, float, np.ndarray], None] | None = None,
) -> tuple[np.ndarray, np.ndarray | None, np.ndarray]:
    """Euler-Maruyama over per-path noise streams, processed in blocks.

    Each path i draws its own counter block (seed, i), so results do not
    depend on block size or scheduling. Non-finite states are flagged and
    frozen rather than raised, per path.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    m, d = x0.shape
    dt = 1.0 / steps
    root = float(np.sqrt(epsilon * dt))
    final = np.empty_like(x0)
    states = np.empty((m, steps + 1, d)) if keep_states else None
    diverged = np.zeros(m, dtype=bool)
    for lo in range(0, m, _SIM_BLOCK):
        hi = min(lo + _SIM_BLOCK, m)
        x = x0[lo:hi].copy()
        noise = np.stack(
            [generator(seed, i).standard_normal((steps, d)) for i in range(lo, hi)]
        )
        bad = np.zeros(hi - lo, dtype=bool)
        if keep_states:
            states[lo:hi, 0, :] = x
        for k in range(steps):
            if observer is not None:
                observer(k, k * dt, x[~bad] if bad.any() else x)
            safe = np.where(bad[:, None], 0.0, x)
            v = drift(safe, k * dt)
            with np.errstate(invalid="ignore", over="ignore"):
                step = x + v * dt + root * noise[:, k, :]
            newly_bad = ~np.all(np.isfinite(step), axis=1) & ~bad
            bad |= newly_bad
            x = np.where(bad[:, None], x, step)
            if keep_states:
                states[lo:hi, k + 1, :] = np.where(bad[:, None], np.nan, x)
        final[lo:hi] = np.where(bad[:, None], np.nan, x)
        diverged[lo:hi] = bad
    return final, states, diverged


def simulate_sb(
    drift: DriftField,
    source_draws: np.ndarray,
    epsilon: float,
    steps: int,
    seed: Seed,
) -> list[Trajectory]:
    """Simulate bridge paths from the given start points; full grids kept."""
    _, states, diverged = _simulate_blocks(
        drift, source_draws, epsilon, steps, seed, keep_states=True
    )
    times = np.linspace(0.0, 1.0, steps + 1)
    return [
        Trajectory(times=times, states=states[i], epsilon=epsilon, diverged=bool(diverged[i]))
        for i in range(states.shape[0])
    ]


def simulate_endpoints(
    drift: DriftField,
    source_draws: np.ndarray,
    epsilon: float,
    steps: int,
    seed: Seed,
    observer: Callable[[int, float, np.ndarray], None] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Memory-light variant of :func:`simulate_sb`: terminal states only."""
    final, _, diverged = _simulate_blocks(
        drift, source_draws, epsilon, steps, seed, keep_states=False, observer=observer
    )
    return final, diverged


def brownian_bridge_sample(
    x: np.ndarray, y: np.ndarray, t: float, epsilon: float, seed: Seed
) -> np.ndarray:
    """Draw the bridge state at time t given endpoints: exact at t in {0, 1}."""
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError("bridge time must lie in [0, 1]")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mean = x + t * (y - x)
    std = float(np.sqrt(epsilon * t * (1.0 - t)))
    if std == 0.0:
        return mean.copy()
    return mean + std * generator(seed).standard_normal(mean.shape)


def sample_sb_trajectories_exact(
    pair: BenchmarkPair, seed: Seed, grid: Sequence[float], count: int
) -> tuple[np.ndarray, np.ndarray]:
    """Exact bridge paths: plan endpoints plus sequential bridge interiors.

    Returns (times, states) with states of shape (count, len(grid), dim).
    The grid must include both endpoints 0 and 1.
    """
    times = np.asarray(list(grid), dtype=float)
    if times.ndim != 1 or times.shape[0] < 2 or np.any(np.diff(times) <= 0):
        raise ValueError("grid must be strictly increasing with at least two times")
    if times[0] != 0.0 or times[-1] != 1.0:
        raise ValueError("grid must include both endpoints 0 and 1")
    joint = sample_joint(pair, seed, count)
    k = times.shape[0]
    d = pair.dim
    eps = pair.epsilon
    states = np.empty((count, k, d))
    states[:, 0, :] = joint.xs
    states[:, -1, :] = joint.ys
    if k > 2:
        noise = generator(seed, 3).standard_normal((count, k - 2, d))
        for j in range(1, k - 1):
            t_prev, t_next = times[j - 1], times[j]
            frac = (t_next - t_prev) / (1.0 - t_prev)
            mean = states[:, j - 1, :] + frac * (joint.ys - states[:, j - 1, :])
            var = eps * (t_next - t_prev) * (1.0 - t_next) / (1.0 - t_prev)
            states[:, j, :] = mean + np.sqrt(var) * noise[:, j - 1, :]
    return times, states


def sample_sb_trajectory_exact(pair: BenchmarkPair, seed: Seed, grid: Sequence[float]) -> Trajectory:
    """Single exact bridge trajectory on the given grid."""
    times, states = sample_sb_trajectories_exact(pair, seed, grid, count=1)
    return Trajectory(times=times, states=states[0], epsilon=pair.epsilon)
