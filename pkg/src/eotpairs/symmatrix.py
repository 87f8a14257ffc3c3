"""Symmetric matrices with an exact scalar-multiple-of-identity fast path.

All preset pairs use matrices of the form ``s * I``, so the compact scalar
representation is kept exact end to end; a dense path covers the general
case. Asymmetry beyond tolerance is a hard error, never silently repaired.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .errors import AsymmetricMatrixError, DimensionMismatchError

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class SymMatrix:
    """Immutable symmetric real matrix, either ``scalar * I`` or dense."""

    dim: int
    scalar: Optional[float] = None
    dense: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise DimensionMismatchError("matrix dimension must be positive")
        if (self.scalar is None) == (self.dense is None):
            raise ValueError("exactly one of scalar/dense must be set")
        if self.scalar is not None:
            if not np.isfinite(self.scalar):
                raise ValueError("matrix entries must be finite")
        else:
            a = np.asarray(self.dense, dtype=float)
            if a.shape != (self.dim, self.dim):
                raise DimensionMismatchError(
                    f"expected shape {(self.dim, self.dim)}, got {a.shape}"
                )
            if not np.all(np.isfinite(a)):
                raise ValueError("matrix entries must be finite")
            resid = np.max(np.abs(a - a.T)) / max(1.0, np.max(np.abs(a)))
            if resid > SYMMETRY_TOL:
                raise AsymmetricMatrixError(
                    f"symmetry residual {resid:.3e} exceeds {SYMMETRY_TOL:.0e}"
                )
            a = a.copy()
            a.setflags(write=False)
            object.__setattr__(self, "dense", a)

    @classmethod
    def scaled_identity(cls, dim: int, value: float) -> "SymMatrix":
        return cls(dim=dim, scalar=float(value))

    @classmethod
    def zero(cls, dim: int) -> "SymMatrix":
        return cls(dim=dim, scalar=0.0)

    @classmethod
    def from_dense(cls, array: np.ndarray) -> "SymMatrix":
        a = np.asarray(array, dtype=float)
        return cls(dim=a.shape[0], dense=a)

    @property
    def is_scalar(self) -> bool:
        return self.scalar is not None

    def to_dense(self) -> np.ndarray:
        if self.is_scalar:
            return np.eye(self.dim) * self.scalar
        return np.array(self.dense)

    @cached_property
    def _eig(self) -> tuple[np.ndarray, Optional[np.ndarray]]:
        # Symmetric solver only; asymmetric inputs were already rejected.
        if self.is_scalar:
            return np.full(self.dim, self.scalar), None
        vals, vecs = np.linalg.eigh(self.dense)
        vals.setflags(write=False)
        vecs.setflags(write=False)
        return vals, vecs

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._eig[0]

    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0]) if not self.is_scalar else float(self.scalar)

    def map_eigenvalues(self, fn: Callable[[np.ndarray], np.ndarray]) -> "SymMatrix":
        """Spectral map: same eigenvectors, eigenvalues transformed by ``fn``."""
        if self.is_scalar:
            return SymMatrix.scaled_identity(self.dim, float(fn(np.asarray(self.scalar))))
        vals, vecs = self._eig
        new = (vecs * fn(vals)) @ vecs.T
        new = 0.5 * (new + new.T)
        return SymMatrix.from_dense(new)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Apply to rows of ``x`` with shape (..., dim)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DimensionMismatchError("vector length does not match matrix dim")
        if self.is_scalar:
            return self.scalar * x
        return x @ self.dense.T

    def quad_form(self, x: np.ndarray) -> np.ndarray:
        """Row-wise x^T A x for ``x`` with shape (..., dim)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DimensionMismatchError("vector length does not match matrix dim")
        if self.is_scalar:
            return self.scalar * np.sum(x * x, axis=-1)
        return np.sum((x @ self.dense) * x, axis=-1)

    def logdet(self) -> float:
        vals = self.eigenvalues
        if np.any(vals <= 0):
            raise ValueError("logdet requires a positive definite matrix")
        return float(np.sum(np.log(vals)))

    @cached_property
    def cholesky_lower(self) -> np.ndarray:
        if self.is_scalar:
            if self.scalar <= 0:
                raise ValueError("Cholesky requires a positive definite matrix")
            L = np.eye(self.dim) * np.sqrt(self.scalar)
        else:
            L = np.linalg.cholesky(self.dense)
        L.setflags(write=False)
        return L

    def allclose(self, other: "SymMatrix", rtol: float = 1e-12) -> bool:
        if self.dim != other.dim:
            return False
        a, b = self.to_dense(), other.to_dense()
        scale = max(1.0, float(np.max(np.abs(a))), float(np.max(np.abs(b))))
        return bool(np.max(np.abs(a - b)) <= rtol * scale)
