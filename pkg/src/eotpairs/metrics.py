"""Solver-facing metrics: Bures-Wasserstein UVP scores, drift KL, MMD.

The unexplained-variance scores compare Gaussian fits; the conditional
variant averages per-source-point fits against the analytic conditional
moments and is normalized by half the target variance, taken literally
(the point-mass-at-the-mean baseline lands at 200% under this constant).
KL between diffusions with equal volatility is the time integral of the
expected squared drift gap divided by 2 eps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Optional

import numpy as np

from .dynamics import DriftField
from .errors import DimensionMismatchError, SimulationError
from .pair import BenchmarkPair
from .plan import conditional_moments_batch, target_moments
from .rng import Seed, generator

_PSD_CLIP = 1e-10


@dataclass(frozen=True)
class GaussianFit:
    """First two moments of a sample set; covariance clipped to PSD."""

    mean: np.ndarray
    covariance: np.ndarray
    sample_count: int

    def __post_init__(self) -> None:
        m = np.asarray(self.mean, dtype=float).reshape(-1)
        c = np.asarray(self.covariance, dtype=float)
        if c.shape != (m.shape[0], m.shape[0]):
            raise DimensionMismatchError("covariance shape does not match mean")
        c = 0.5 * (c + c.T)
        vals, vecs = np.linalg.eigh(c)
        floor = -_PSD_CLIP * max(1.0, float(vals[-1]) if vals.size else 1.0)
        if vals[0] < floor:
            raise ValueError(f"covariance is indefinite (min eigenvalue {vals[0]:.3e})")
        if vals[0] < 0:
            c = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "covariance", c)

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "GaussianFit":
        s = np.atleast_2d(np.asarray(samples, dtype=float))
        if s.shape[0] < 1:
            raise ValueError("need at least one sample")
        mean = s.mean(axis=0)
        if s.shape[0] == 1:
            cov = np.zeros((s.shape[1], s.shape[1]))
        else:
            cov = np.cov(s, rowvar=False, ddof=1).reshape(s.shape[1], s.shape[1])
        return cls(mean=mean, covariance=cov, sample_count=s.shape[0])


@dataclass(frozen=True)
class MetricReport:
    """A named metric value with everything needed to reproduce it."""

    metric: str
    value: float
    normalization: Optional[float] = None
    settings: Mapping[str, object] = field(default_factory=dict)
    seed: Optional[Seed] = None

    def __post_init__(self) -> None:
        if not np.isfinite(self.value):
            raise ValueError("metric value must be finite")
        object.__setattr__(self, "settings", MappingProxyType(dict(self.settings)))

    def text_lines(self) -> list[str]:
        lines = [f"metric={self.metric}", f"value={self.value!r}"]
        if self.normalization is not None:
            lines.append(f"normalization={self.normalization!r}")
        for k in sorted(self.settings):
            lines.append(f"{k}={self.settings[k]!r}")
        if self.seed is not None:
            lines.append(f"seed={self.seed.value}/{self.seed.stream}")
        return lines

    def csv_row(self) -> tuple[str, str]:
        keys = sorted(self.settings)
        header = ",".join(["metric", "value", "normalization", "seed"] + keys)
        seed = f"{self.seed.value}/{self.seed.stream}" if self.seed else ""
        norm = repr(self.normalization) if self.normalization is not None else ""
        row = ",".join(
            [self.metric, repr(self.value), norm, seed]
            + [str(self.settings[k]) for k in keys]
        )
        return header, row


def _sqrt_psd(matrix: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(matrix)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def bw2_squared(a: GaussianFit, b: GaussianFit) -> float:
    """Squared Bures-Wasserstein distance between two Gaussian fits."""
    if a.mean.shape != b.mean.shape:
        raise DimensionMismatchError("fits live in different dimensions")
    if np.array_equal(a.mean, b.mean) and np.array_equal(a.covariance, b.covariance):
        return 0.0
    root_b = _sqrt_psd(b.covariance)
    inner = root_b @ a.covariance @ root_b
    cross = np.sum(np.sqrt(np.clip(np.linalg.eigvalsh(0.5 * (inner + inner.T)), 0.0, None)))
    value = (
        float(np.sum((a.mean - b.mean) ** 2))
        + float(np.trace(a.covariance) + np.trace(b.covariance))
        - 2.0 * float(cross)
    )
    return max(value, 0.0)


def bw2_uvp(pred_samples: np.ndarray, ref_samples: np.ndarray, seed: Seed | None = None) -> MetricReport:
    """Unexplained variance percentage of the predicted marginal:
    100 * BW2^2(fit(pred), fit(ref)) / (Var(ref) / 2)."""
    pred = GaussianFit.from_samples(pred_samples)
    ref = GaussianFit.from_samples(ref_samples)
    var = float(np.trace(ref.covariance))
    if var <= 0:
        raise ValueError("reference variance must be positive")
    value = 100.0 * bw2_squared(pred, ref) / (0.5 * var)
    return MetricReport(
        metric="bw2_uvp_percent",
        value=value,
        normalization=0.5 * var,
        settings={"pred_count": pred.sample_count, "ref_count": ref.sample_count},
        seed=seed,
    )


ConditionalSampler = Callable[[np.ndarray, int, np.random.Generator], np.ndarray]


def cbw2_uvp(
    pair: BenchmarkPair,
    predictor: Optional[ConditionalSampler],
    test_x: np.ndarray,
    samples_per_x: int,
    seed: Seed,
    normalization_samples: int = 100_000,
    predicted_moments: Optional[tuple[np.ndarray, np.ndarray]] = None,
    normalization_override: Optional[float] = None,
) -> MetricReport:
    """Conditional unexplained variance percentage against the analytic plan.

    Ground-truth conditional moments are always analytic. The prediction is
    either ``predictor`` draws (``samples_per_x`` per test point), explicit
    ``predicted_moments`` (means, covariances), or, with both omitted, the
    analytic moments themselves (exact-zero fixed point).
    """
    test_x = np.atleast_2d(np.asarray(test_x, dtype=float))
    if test_x.shape[0] < 1:
        raise ValueError("test_x must be non-empty")
    if predictor is not None and samples_per_x < 2:
        raise ValueError("samples_per_x must be at least 2")
    true_means, true_covs = conditional_moments_batch(pair, test_x)
    total = 0.0
    for i, x in enumerate(test_x):
        truth = GaussianFit(mean=true_means[i], covariance=true_covs[i], sample_count=0)
        if predictor is not None:
            draws = np.asarray(predictor(x, samples_per_x, generator(seed.child(1), i)))
            if draws.shape != (samples_per_x, pair.dim):
                raise DimensionMismatchError(
                    f"predictor returned shape {draws.shape}, expected {(samples_per_x, pair.dim)}"
                )
            fit = GaussianFit.from_samples(draws)
        elif predicted_moments is not None:
            fit = GaussianFit(
                mean=predicted_moments[0][i],
                covariance=predicted_moments[1][i],
                sample_count=samples_per_x,
            )
        else:
            fit = truth
        total += bw2_squared(fit, truth)
    average = total / test_x.shape[0]
    if normalization_override is not None:
        norm = float(normalization_override)
    else:
        tm = target_moments(pair, seed.child(2), normalization_samples)
        norm = 0.5 * float(np.trace(tm.cov))
    return MetricReport(
        metric="cbw2_uvp_percent",
        value=100.0 * average / norm,
        normalization=norm,
        settings={
            "test_points": test_x.shape[0],
            "samples_per_x": samples_per_x if predictor is not None else 0,
            "normalization_samples": normalization_samples,
            "mode": "sampled" if predictor is not None else
                    ("moments" if predicted_moments is not None else "analytic"),
        },
        seed=seed,
    )


def l2_drift_discrepancy(
    truth: DriftField,
    candidate: DriftField,
    source_draws: np.ndarray,
    epsilon: float,
    steps: int,
    seed: Seed,
    direction: str = "forward",
) -> tuple[np.ndarray, np.ndarray]:
    """Per-time expected squared drift gap along the designated process.

    ``direction='forward'`` draws states from truth-driven trajectories,
    ``'reverse'`` from candidate-driven ones. Returns (times, values) on the
    half-open grid t_k = k / steps.
    """
    from .dynamics import simulate_endpoints

    if direction not in ("forward", "reverse"):
        raise ValueError("direction must be 'forward' or 'reverse'")
    driver = truth if direction == "forward" else candidate
    sums = np.zeros(steps)
    counts = np.zeros(steps, dtype=int)

    def observer(k: int, t: float, x: np.ndarray) -> None:
        vt = truth(x, t)
        vc = candidate(x, t)
        if not (np.all(np.isfinite(vt)) and np.all(np.isfinite(vc))):
            raise SimulationError(f"non-finite drift at time index {k}")
        sums[k] += float(np.sum((vt - vc) ** 2))
        counts[k] += x.shape[0]

    simulate_endpoints(driver, source_draws, epsilon, steps, seed, observer=observer)
    times = np.arange(steps) / steps
    return times, sums / np.maximum(counts, 1)


def _kl_report(name: str, direction: str, truth, candidate, source_draws, epsilon, steps, seed) -> MetricReport:
    times, values = l2_drift_discrepancy(
        truth, candidate, source_draws, epsilon, steps, seed, direction=direction
    )
    # Trapezoid over the evaluation grid; the terminal segment, where the
    # drift is never evaluated, reuses the last interior value.
    integral = float(np.trapezoid(values, times)) + float(values[-1]) / steps
    return MetricReport(
        metric=name,
        value=integral / (2.0 * epsilon),
        normalization=2.0 * epsilon,
        settings={"steps": steps, "paths": int(np.atleast_2d(source_draws).shape[0])},
        seed=seed,
    )


def kl_forward(
    truth: DriftField,
    candidate: DriftField,
    source_draws: np.ndarray,
    epsilon: float,
    steps: int,
    seed: Seed,
) -> MetricReport:
    """KL(truth process || candidate process) via the squared drift gap."""
    return _kl_report("kl_forward", "forward", truth, candidate, source_draws, epsilon, steps, seed)


def kl_reverse(
    truth: DriftField,
    candidate: DriftField,
    source_draws: np.ndarray,
    epsilon: float,
    steps: int,
    seed: Seed,
) -> MetricReport:
    """Reverse KL: same integrand, states drawn from the candidate process."""
    return _kl_report("kl_reverse", "reverse", truth, candidate, source_draws, epsilon, steps, seed)


def _pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aa = np.sum(a * a, axis=1)[:, None]
    bb = np.sum(b * b, axis=1)[None, :]
    return np.maximum(aa + bb - 2.0 * (a @ b.T), 0.0)


def median_heuristic_bandwidth(a: np.ndarray, b: np.ndarray, cap: int = 2048, seed: Seed | None = None) -> float:
    """Median pairwise distance of the pooled sample (subsampled when large)."""
    pooled = np.vstack([np.atleast_2d(a), np.atleast_2d(b)])
    if pooled.shape[0] > cap:
        gen = generator(seed if seed is not None else Seed(0))
        pooled = pooled[gen.choice(pooled.shape[0], size=cap, replace=False)]
    d2 = _pairwise_sq_dists(pooled, pooled)
    off = d2[np.triu_indices_from(d2, k=1)]
    med = float(np.median(np.sqrt(off)))
    if med <= 0:
        raise ValueError("median pairwise distance is zero; supply a bandwidth")
    return med


def mmd_rbf(
    a_samples: np.ndarray,
    b_samples: np.ndarray,
    bandwidth: float | str = "median",
    seed: Seed | None = None,
) -> MetricReport:
    """Unbiased U-statistic estimate of squared MMD with an RBF kernel."""
    a = np.atleast_2d(np.asarray(a_samples, dtype=float))
    b = np.atleast_2d(np.asarray(b_samples, dtype=float))
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise ValueError("the unbiased estimator needs at least two samples per set")
    if bandwidth == "median":
        h = median_heuristic_bandwidth(a, b, seed=seed)
    else:
        h = float(bandwidth)
        if h <= 0:
            raise ValueError("bandwidth must be positive")
    gamma = 1.0 / (2.0 * h * h)
    kxx = np.exp(-gamma * _pairwise_sq_dists(a, a))
    kyy = np.exp(-gamma * _pairwise_sq_dists(b, b))
    kxy = np.exp(-gamma * _pairwise_sq_dists(a, b))
    m, n = a.shape[0], b.shape[0]
    value = (
        (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
        + (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
        - 2.0 * kxy.mean()
    )
    return MetricReport(
        metric="mmd2_rbf",
        value=float(value),
        settings={"bandwidth": h, "kernel": "rbf", "a_count": m, "b_count": n, "unbiased": True},
        seed=seed,
    )
