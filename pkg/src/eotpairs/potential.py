"""Weighted log-sum-exp quadratic potentials and their stable evaluation.

The potential is f(y) = eps * log sum_n w_n exp(-(y-b_n)^T A_n (y-b_n) / (2 eps)).
A potential is *appropriate* when every A_n is symmetric with all eigenvalues
strictly above -1; only then do the derived conditional mixtures exist.
Weights are held as logs: the derived per-component constants underflow in
linear space already around dimension 64.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateWeightsError, DimensionMismatchError, NotAppropriateError
from .symmatrix import SymMatrix

# Eigenvalues must clear -1 by this margin: the conditional covariance
# eps * (A + I)^{-1} blows up at the boundary.
EIGENVALUE_MARGIN = 1e-9


@dataclass(frozen=True)
class LsePotential:
    """Immutable log-sum-exp quadratic potential.

    ``log_weights`` may contain ``-inf`` entries; those components are
    treated as absent everywhere.
    """

    epsilon: float
    log_weights: np.ndarray
    centers: np.ndarray
    matrices: tuple[SymMatrix, ...] = field(repr=False)
    # Exact linear weights when constructed from them; keeps serialization
    # byte-stable (exp(log w) can differ from w by an ulp).
    linear_weights: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        lw = np.asarray(self.log_weights, dtype=float).reshape(-1)
        cs = np.asarray(self.centers, dtype=float)
        if cs.ndim != 2:
            raise DimensionMismatchError("centers must be a (components, dim) array")
        n, d = cs.shape
        if lw.shape[0] != n or len(self.matrices) != n:
            raise DimensionMismatchError("weights, centers and matrices disagree in length")
        if n == 0:
            raise ValueError("potential needs at least one component")
        if np.any(np.isnan(lw)) or np.any(lw == np.inf):
            raise ValueError("log-weights must be finite or -inf")
        for m in self.matrices:
            if m.dim != d:
                raise DimensionMismatchError("matrix dimension does not match centers")
        lw = lw.copy()
        lw.setflags(write=False)
        cs = cs.copy()
        cs.setflags(write=False)
        object.__setattr__(self, "log_weights", lw)
        object.__setattr__(self, "centers", cs)
        object.__setattr__(self, "matrices", tuple(self.matrices))
        if self.linear_weights is not None:
            w = np.asarray(self.linear_weights, dtype=float).reshape(-1).copy()
            if w.shape[0] != n:
                raise DimensionMismatchError("linear weights length mismatch")
            w.setflags(write=False)
            object.__setattr__(self, "linear_weights", w)

    @classmethod
    def from_weights(
        cls,
        epsilon: float,
        weights: Sequence[float],
        centers: np.ndarray,
        matrices: Sequence[SymMatrix],
    ) -> "LsePotential":
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        with np.errstate(divide="ignore"):
            lw = np.log(w)
        return cls(epsilon=float(epsilon), log_weights=lw,
                   centers=np.asarray(centers, dtype=float), matrices=tuple(matrices),
                   linear_weights=w)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def n_components(self) -> int:
        return self.centers.shape[0]

    @property
    def weights(self) -> np.ndarray:
        if self.linear_weights is not None:
            return self.linear_weights
        return np.exp(self.log_weights)

    def require_appropriate(self) -> None:
        report = validate_potential(self)
        if not report.appropriate:
            raise NotAppropriateError("; ".join(report.problems) or "potential not appropriate")


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the appropriateness check, one eigenvalue minimum per component."""

    min_eigenvalues: tuple[float, ...]
    weights_ok: bool
    appropriate: bool
    problems: tuple[str, ...]


def validate_potential(potential: LsePotential) -> ValidationReport:
    """Check spectra and weights; ``appropriate`` requires every matrix
    eigenvalue above ``-1 + EIGENVALUE_MARGIN`` and at least one positive weight."""
    mins = tuple(m.min_eigenvalue() for m in potential.matrices)
    problems = []
    for i, mn in enumerate(mins):
        if not mn > -1.0 + EIGENVALUE_MARGIN:
            problems.append(f"component {i}: min eigenvalue {mn:.6g} not above -1")
    weights_ok = bool(np.any(np.isfinite(potential.log_weights)))
    if not weights_ok:
        problems.append("all component weights are zero")
    return ValidationReport(
        min_eigenvalues=mins,
        weights_ok=weights_ok,
        appropriate=weights_ok and not any("eigenvalue" in p for p in problems),
        problems=tuple(problems),
    )


def log_quad_form(y: np.ndarray, b: np.ndarray, matrix: SymMatrix) -> np.ndarray:
    """Exponent of the Gaussian-shaped factor: -(y-b)^T A (y-b) / 2.

    Accepts a single point or a batch of rows; shapes must agree with the
    matrix dimension.
    """
    y = np.asarray(y, dtype=float)
    b = np.asarray(b, dtype=float)
    if y.shape[-1] != matrix.dim or b.shape[-1] != matrix.dim:
        raise DimensionMismatchError("point length does not match matrix dimension")
    return -0.5 * matrix.quad_form(y - b)


def component_log_terms(potential: LsePotential, y: np.ndarray) -> np.ndarray:
    """Per-component log contributions log w_n + log Q(y | b_n, A_n / eps).

    ``y`` has shape (..., dim); result has shape (..., components).
    """
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != potential.dim:
        raise DimensionMismatchError("point length does not match potential dimension")
    inv_two_eps = 0.5 / potential.epsilon
    cols = []
    for n in range(potential.n_components):
        diff = y - potential.centers[n]
        cols.append(-inv_two_eps * potential.matrices[n].quad_form(diff))
    return potential.log_weights + np.stack(cols, axis=-1)


def potential_value(potential: LsePotential, y: np.ndarray) -> np.ndarray:
    """Evaluate the potential via max-shifted log-sum-exp; finite for finite y."""
    if not np.any(np.isfinite(potential.log_weights)):
        raise DegenerateWeightsError("all component weights are zero")
    terms = component_log_terms(potential, y)
    return potential.epsilon * logsumexp(terms, axis=-1)


def schrodinger_potential_log(potential: LsePotential, y: np.ndarray) -> np.ndarray:
    """Log of the endpoint reweighting factor exp(f / eps): just f(y) / eps."""
    return potential_value(potential, y) / potential.epsilon
