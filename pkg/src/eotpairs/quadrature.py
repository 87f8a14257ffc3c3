"""Adaptive-quadrature oracles for low-dimensional cross-checks.

Everything here evaluates integrals of the form

    integral N(u | 0, I) * exp(f(z + sigma * u) / eps) du

in the standardized coordinate u = (y - z) / sigma, which keeps the
Gaussian factor well scaled for every sigma, including the near-point-mass
regime. Restricted to dimensions 1 and 2; these are test oracles, not the
production path.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from .errors import DimensionMismatchError, QuadratureError
from .potential import LsePotential, component_log_terms

# The integrand is scanned on a coarse grid for a max shift; the box is
# accepted only if the edge values are negligible relative to the peak.
_EDGE_LOG_DROP = 220.0
_BASE_HALFWIDTH = 12.0
_LOG_2PI = math.log(2.0 * math.pi)


def _log_integrand_vec(potential: LsePotential, z: np.ndarray, sigma: float):
    def log_integrand(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        y = z + sigma * u
        log_phi = logsumexp(component_log_terms(potential, y), axis=-1)
        return -0.5 * np.sum(u * u, axis=-1) - 0.5 * potential.dim * _LOG_2PI + log_phi

    return log_integrand


def _scalar_terms(potential: LsePotential, z: np.ndarray, sigma: float):
    """Per-component constants for the plain-float integrand used inside the
    adaptive routines, where per-call numpy overhead dominates."""
    eps = potential.epsilon
    comps = []
    for n in range(potential.n_components):
        lw = float(potential.log_weights[n])
        if lw == -np.inf:
            continue
        b = potential.centers[n]
        m = potential.matrices[n].to_dense() / (2.0 * eps)
        if potential.dim == 1:
            comps.append((lw, float(b[0]), float(m[0, 0])))
        else:
            comps.append(
                (lw, float(b[0]), float(b[1]), float(m[0, 0]), float(m[0, 1]), float(m[1, 1]))
            )
    return comps, float(z[0]), (float(z[1]) if potential.dim == 2 else 0.0), float(sigma)


def _box_halfwidth(potential: LsePotential, z: np.ndarray, sigma: float) -> float:
    eps = potential.epsilon
    min_eig = min(m.min_eigenvalue() for m in potential.matrices)
    concavity_loss = max(0.0, -min_eig)  # in (0, 1) for appropriate potentials
    softness = max(0.05, 1.0 - concavity_loss * sigma * sigma / eps)
    dmax = float(np.max(np.linalg.norm(potential.centers - z, axis=1)))
    shift = concavity_loss * sigma * dmax / (eps * softness)
    return (_BASE_HALFWIDTH / math.sqrt(softness)) + shift


def log_gauss_smoothed_potential(
    potential: LsePotential,
    z: np.ndarray,
    sigma: float,
    rel_tol: float = 1e-9,
) -> float:
    """log integral N(y | z, sigma^2 I) exp(f(y) / eps) dy, adaptively.

    Raises :class:`QuadratureError` when the estimated error exceeds the
    requested relative tolerance or the integration box cannot contain the
    integrand's support.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    d = potential.dim
    if z.shape[0] != d:
        raise DimensionMismatchError("probe point length does not match potential dim")
    if d > 2:
        raise DimensionMismatchError("quadrature oracles are limited to dim <= 2")
    log_f = _log_integrand_vec(potential, z, sigma)

    hw = _box_halfwidth(potential, z, sigma)
    for _ in range(4):
        shift, rough, edge_ok = _scan_peak(log_f, d, hw)
        if edge_ok:
            break
        hw *= 2.0
    else:
        raise QuadratureError("integration box does not contain the integrand support")

    # Absolute tolerance anchored to a coarse Riemann estimate of the
    # max-shifted integral, so refinement stops at the requested relative
    # accuracy instead of chasing machine epsilon.
    epsabs = max(1e-290, 0.3 * rel_tol * rough)
    comps, z1, z2, sg = _scalar_terms(potential, z, sigma)
    exp, log = math.exp, math.log

    if d == 1:

        def f1(u: float) -> float:
            y = z1 + sg * u
            best = -math.inf
            vals = []
            for (lw, b, m) in comps:
                dd = y - b
                v = lw - m * dd * dd
                vals.append(v)
                if v > best:
                    best = v
            total = sum(exp(v - best) for v in vals)
            return exp(best + log(total) - 0.5 * u * u - 0.5 * _LOG_2PI - shift)

        value, err = integrate.quad(f1, -hw, hw, epsabs=epsabs, epsrel=rel_tol, limit=800)
    else:

        def f2(u2: float, u1: float) -> float:
            y1 = z1 + sg * u1
            y2 = z2 + sg * u2
            best = -math.inf
            vals = []
            for (lw, b1, b2, m11, m12, m22) in comps:
                d1 = y1 - b1
                d2 = y2 - b2
                v = lw - (m11 * d1 * d1 + 2.0 * m12 * d1 * d2 + m22 * d2 * d2)
                vals.append(v)
                if v > best:
                    best = v
            total = sum(exp(v - best) for v in vals)
            return exp(best + log(total) - 0.5 * (u1 * u1 + u2 * u2) - _LOG_2PI - shift)

        value, err = integrate.dblquad(f2, -hw, hw, -hw, hw, epsabs=epsabs, epsrel=rel_tol)
    if not np.isfinite(value) or value <= 0:
        raise QuadratureError("quadrature returned a non-positive value")
    if err > max(1e-13, 20.0 * rel_tol * value):
        raise QuadratureError(f"quadrature error estimate {err:.3e} too large for value {value:.3e}")
    # sigma^d from the change of variables cancels against the Gaussian
    # normalization in y-space, so no extra factor appears here.
    return float(shift + math.log(value))


def _scan_peak(log_f, dim: int, hw: float) -> tuple[float, float, bool]:
    if dim == 1:
        grid = np.linspace(-hw, hw, 2049)[:, None]
        cell = 2.0 * hw / 2048
    else:
        axis = np.linspace(-hw, hw, 129)
        g1, g2 = np.meshgrid(axis, axis, indexing="ij")
        grid = np.stack([g1.ravel(), g2.ravel()], axis=1)
        cell = (2.0 * hw / 128) ** 2
    vals = log_f(grid)
    peak = float(np.max(vals))
    rough = float(np.sum(np.exp(vals - peak))) * cell
    if dim == 1:
        edge = max(float(vals[0]), float(vals[-1]))
    else:
        mask = (np.abs(grid[:, 0]) >= hw - 1e-9) | (np.abs(grid[:, 1]) >= hw - 1e-9)
        edge = float(np.max(vals[mask]))
    return peak, rough, edge <= peak - _EDGE_LOG_DROP
