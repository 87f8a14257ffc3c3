"""Consumer-side benchmark pair: mixture parameters, sampling, drift.

Implements the pair-file contract from scratch on plain numpy. For a pair
with regularization eps, centers b_n, matrices A_n and weights w_n, the
conditional distribution of y given x is the Gaussian mixture with

    covariance      sigma_n = eps (A_n + I)^{-1}
    mean            mu_n(x) = (A_n + I)^{-1} (A_n b_n + x)
    responsibility  gamma_n(x) softmax of
                    log w_n + (dim/2) log 2pi + (1/2) logdet sigma_n
                    - (1/2) (x - b_n)^T B_n (x - b_n),
    with B_n = (1/eps) A_n (A_n + I)^{-1},

and the bridge drift at time t in [0, 1) uses the time-scaled spectra
(1 - t) A_n in the same pattern. Everything is validated on load.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .pairfile import PairFormatError, canonical_document, document_text, load_document

_LOG_2PI = float(np.log(2.0 * np.pi))
SYMMETRY_TOL = 1e-12
EIGENVALUE_MARGIN = 1e-9


class PairValidationError(ValueError):
    pass


def _logsumexp(values: np.ndarray, axis: int = -1) -> np.ndarray:
    peak = np.max(values, axis=axis, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    out = peak.squeeze(axis) + np.log(np.sum(np.exp(values - peak), axis=axis))
    return out


@dataclass(frozen=True)
class _Component:
    center: np.ndarray
    log_weight: float
    eigenvalues: np.ndarray          # of A_n, ascending
    eigenvectors: np.ndarray | None  # None means A_n is scalar * I

    def _apply(self, spectrum: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Matrix-vector product of f(A) with rows of x, f given by spectrum."""
        if self.eigenvectors is None:
            return spectrum[0] * x
        return (x @ self.eigenvectors) * spectrum @ self.eigenvectors.T

    def quad(self, spectrum: np.ndarray, x: np.ndarray) -> np.ndarray:
        if self.eigenvectors is None:
            return spectrum[0] * np.sum(x * x, axis=-1)
        proj = x @ self.eigenvectors
        return np.sum(proj * proj * spectrum, axis=-1)


@dataclass(frozen=True)
class _GaussianSource:
    mean: np.ndarray
    chol: np.ndarray

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return self.mean + rng.standard_normal((count, self.mean.shape[0])) @ self.chol.T


@dataclass(frozen=True)
class _MixtureSource:
    weights: np.ndarray
    parts: tuple[_GaussianSource, ...]

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        choice = rng.choice(len(self.parts), size=count, p=self.weights)
        out = np.empty((count, self.parts[0].mean.shape[0]))
        for i, part in enumerate(self.parts):
            mask = choice == i
            if mask.any():
                out[mask] = part.sample(rng, int(mask.sum()))
        return out


class ClientPair:
    """Validated, read-only view of a pair definition file."""

    def __init__(self, document: dict):
        doc = canonical_document(document)
        if doc["format_version"] != 1:
            raise PairFormatError(f"format_version: expected 1, got {doc['format_version']}")
        self._doc = doc
        self.name: str = doc["name"]
        self.dim: int = doc["dim"]
        self.epsilon: float = doc["epsilon"]
        self.seed: tuple[int, int] = (doc["seed"]["value"], doc["seed"]["stream"])
        if self.dim < 1:
            raise PairValidationError("dim must be positive")
        if not self.epsilon > 0:
            raise PairValidationError("epsilon must be positive")
        self._source = self._build_source(doc["source"])
        self._components = self._build_components(doc["potential"])
        self._validate()

    @classmethod
    def load(cls, path: str | Path) -> "ClientPair":
        return cls(load_document(path))

    # -- construction -----------------------------------------------------

    def _build_source(self, entry: dict):
        def one(mean, cov, where):
            mean = np.asarray(mean, dtype=float)
            if mean.shape != (self.dim,):
                raise PairValidationError(f"{where}: mean length {mean.shape[0]} != dim {self.dim}")
            dense = self._cov_dense(cov, where)
            vals = np.linalg.eigvalsh(dense)
            if vals[0] <= 0:
                raise PairValidationError(f"{where}: covariance not positive definite")
            return _GaussianSource(mean=mean, chol=np.linalg.cholesky(dense))

        if entry["kind"] == "gaussian":
            return one(entry["mean"], entry["cov"], "source")
        weights = np.array([c["weight"] for c in entry["components"]], dtype=float)
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise PairValidationError("source weights must be nonnegative and sum to 1")
        parts = tuple(
            one(c["mean"], c["cov"], f"source.components[{i}]")
            for i, c in enumerate(entry["components"])
        )
        return _MixtureSource(weights=weights, parts=parts)

    def _cov_dense(self, entry: dict, where: str) -> np.ndarray:
        if "scalar" in entry:
            return float(entry["scalar"]) * np.eye(self.dim)
        flat = np.asarray(entry["dense"], dtype=float)
        if flat.shape != (self.dim * self.dim,):
            raise PairValidationError(f"{where}: expected {self.dim * self.dim} entries")
        return flat.reshape(self.dim, self.dim)

    def _build_components(self, entry: dict) -> tuple[_Component, ...]:
        weights = np.asarray(entry["weights"], dtype=float)
        centers = np.asarray(entry["centers"], dtype=float)
        if centers.ndim != 2 or centers.shape[1] != self.dim:
            raise PairValidationError("potential.centers: wrong shape")
        n = centers.shape[0]
        if weights.shape != (n,):
            raise PairValidationError("potential.weights: length mismatch")
        if np.any(weights < 0) or not np.any(weights > 0):
            raise PairValidationError(
                "potential.weights: needs nonnegative weights with at least one positive"
            )
        mats = entry["matrices"]
        comps = []
        with np.errstate(divide="ignore"):
            log_w = np.log(weights)
        for i in range(n):
            if "scalar" in mats:
                if len(mats["scalar"]) != n:
                    raise PairValidationError("potential.matrices.scalar: length mismatch")
                vals = np.full(self.dim, float(mats["scalar"][i]))
                vecs = None
            else:
                if len(mats["dense"]) != n:
                    raise PairValidationError("potential.matrices.dense: length mismatch")
                dense = np.asarray(mats["dense"][i], dtype=float).reshape(self.dim, self.dim)
                gap = np.max(np.abs(dense - dense.T)) / max(1.0, np.max(np.abs(dense)))
                if gap > SYMMETRY_TOL:
                    raise PairValidationError(
                        f"potential.matrices.dense[{i}]: asymmetric (residual {gap:.2e})"
                    )
                vals, vecs = np.linalg.eigh(dense)
            comps.append(
                _Component(center=centers[i], log_weight=float(log_w[i]),
                           eigenvalues=vals, eigenvectors=vecs)
            )
        return tuple(comps)

    def _validate(self) -> None:
        for i, comp in enumerate(self._components):
            if not comp.eigenvalues[0] > -1.0 + EIGENVALUE_MARGIN:
                raise PairValidationError(
                    f"potential.matrices[{i}]: eigenvalue {comp.eigenvalues[0]:.6g} "
                    "not above -1; pair is not appropriate"
                )

    # -- serialization ----------------------------------------------------

    def canonical_text(self) -> str:
        return document_text(self._doc)

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()

    # -- conditional plan -------------------------------------------------

    @property
    def n_components(self) -> int:
        return len(self._components)

    def _check_x(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise PairValidationError(f"point length {x.shape[-1]} != dim {self.dim}")
        return x

    def conditional_parameters(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(gammas, means) at ``x``; shapes (..., N) and (..., N, dim)."""
        x = self._check_x(x)
        eps = self.epsilon
        logits, means = [], []
        for comp in self._components:
            lam = comp.eigenvalues
            b_spec = lam / (eps * (lam + 1.0))
            diff = x - comp.center
            log_prefix = comp.log_weight + 0.5 * self.dim * _LOG_2PI + 0.5 * np.sum(
                np.log(eps / (lam + 1.0))
            )
            logits.append(log_prefix - 0.5 * comp.quad(b_spec, diff))
            proj_spec = 1.0 / (lam + 1.0)
            means.append(comp._apply(proj_spec, x) + eps * comp._apply(b_spec, comp.center))
        logits = np.stack(logits, axis=-1)
        gammas = np.exp(logits - _logsumexp(logits)[..., None])
        return gammas, np.stack(means, axis=-2)

    def conditional_covariances(self) -> np.ndarray:
        """(N, dim, dim) stack; x-independent."""
        out = []
        for comp in self._components:
            spec = self.epsilon / (comp.eigenvalues + 1.0)
            if comp.eigenvectors is None:
                out.append(spec[0] * np.eye(self.dim))
            else:
                out.append((comp.eigenvectors * spec) @ comp.eigenvectors.T)
        return np.stack(out)

    def conditional_log_density(self, x: np.ndarray, y: np.ndarray) -> float:
        x = self._check_x(x)
        y = self._check_x(y)
        gammas, means = self.conditional_parameters(x)
        eps = self.epsilon
        terms = []
        for n, comp in enumerate(self._components):
            lam = comp.eigenvalues
            inv_spec = (lam + 1.0) / eps
            diff = y - means[..., n, :]
            log_norm = -0.5 * (self.dim * _LOG_2PI + float(np.sum(np.log(eps / (lam + 1.0)))))
            with np.errstate(divide="ignore"):
                lg = np.log(gammas[..., n])
            terms.append(lg + log_norm - 0.5 * comp.quad(inv_spec, diff))
        return _logsumexp(np.stack(terms, axis=-1))

    def sample_conditional(self, x: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
        x = self._check_x(x).reshape(-1)
        gammas, means = self.conditional_parameters(x)
        chols = [np.linalg.cholesky(c) for c in self.conditional_covariances()]
        choice = rng.choice(self.n_components, size=count, p=gammas / gammas.sum())
        out = np.empty((count, self.dim))
        for n in range(self.n_components):
            mask = choice == n
            if mask.any():
                z = rng.standard_normal((int(mask.sum()), self.dim))
                out[mask] = means[n] + z @ chols[n].T
        return out

    def sample_source(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return self._source.sample(rng, count)

    def sample_joint(self, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        xs = self.sample_source(count, rng)
        gammas, means = self.conditional_parameters(xs)
        chols = [np.linalg.cholesky(c) for c in self.conditional_covariances()]
        u = rng.random(count)
        cdf = np.cumsum(gammas, axis=1)
        choice = np.minimum((u[:, None] * cdf[:, -1:] > cdf).sum(axis=1), self.n_components - 1)
        ys = np.empty_like(xs)
        for n in range(self.n_components):
            mask = choice == n
            if mask.any():
                z = rng.standard_normal((int(mask.sum()), self.dim))
                ys[mask] = means[mask, n, :] + z @ chols[n].T
        return xs, ys

    # -- drift ------------------------------------------------------------

    def drift(self, x: np.ndarray, t: float) -> np.ndarray:
        """Optimal bridge drift at time t in [0, 1)."""
        t = float(t)
        if not 0.0 <= t < 1.0:
            raise ValueError(f"drift time must lie in [0, 1), got {t}")
        x = self._check_x(x)
        eps = self.epsilon
        logits, pulls = [], []
        for comp in self._components:
            lam = comp.eigenvalues
            bt_spec = lam / (eps * ((1.0 - t) * lam + 1.0))
            diff = x - comp.center
            half_logdet_t = 0.5 * float(np.sum(np.log(eps / ((1.0 - t) * lam + 1.0))))
            logits.append(comp.log_weight + half_logdet_t - 0.5 * comp.quad(bt_spec, diff))
            pulls.append(comp._apply(bt_spec, diff))
        logits = np.stack(logits, axis=-1)
        soft = np.exp(logits - _logsumexp(logits)[..., None])
        return -eps * np.sum(soft[..., None] * np.stack(pulls, axis=-2), axis=-2)


def load_pair(path: str | Path) -> ClientPair:
    """Read and fully validate a pair definition file."""
    return ClientPair.load(path)
