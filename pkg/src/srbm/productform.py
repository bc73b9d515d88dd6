"""Skew symmetry, product-form rates and the rays of the ellipse ``gamma = 0``.

The polynomials are::

    gamma(theta)   = -1/2 <theta, Sigma theta> - <mu, theta>
    gamma_i(theta) = <R[:, i], theta>

For each i the line where every ``gamma_k`` (k != i) vanishes is spanned by
row i of ``Q = R^{-1}``; it meets ``gamma = 0`` again at
``theta_ray_i = Delta_i * Q[i, :]`` and ``lambda_i = theta_ray_i[i]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .model import SrbmData, index_array

SKEW_RTOL = 1e-10
INTERPRETATION = "alpha is a vector of product-form rates only when is_skew is true"


@dataclass(frozen=True)
class PolyEval:
    gamma: float
    gamma_i: np.ndarray


def evaluate_polys(data: SrbmData, theta) -> PolyEval:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (data.d,):
        raise PreconditionError(f"theta must have length {data.d}")
    gamma = -0.5 * theta @ data.sigma @ theta - data.mu @ theta
    return PolyEval(float(gamma), data.r.T @ theta)


@dataclass(frozen=True)
class SkewCheck:
    residual: float
    is_skew: bool


def skew_matrix_residual(sigma, r) -> np.ndarray:
    """``2 Sigma - R diag(R)^-1 diag(Sigma) - diag(Sigma) diag(R)^-1 R^T``."""
    sigma = np.asarray(sigma, dtype=float)
    r = np.asarray(r, dtype=float)
    dr = np.diag(r)
    if np.any(dr == 0):
        i = int(np.flatnonzero(dr == 0)[0]) + 1
        raise PreconditionError(f"R[{i},{i}] = 0; R cannot be completely-S")
    w = np.diag(sigma) / dr
    # R diag(R)^-1 diag(Sigma) scales column j of R by Sigma_jj / R_jj
    m = r * w[None, :]
    return 2.0 * sigma - m - m.T


def skew_symmetry_check(data: SrbmData) -> SkewCheck:
    res = float(np.linalg.norm(skew_matrix_residual(data.sigma, data.r)))
    return SkewCheck(res, res < SKEW_RTOL * float(np.linalg.norm(data.sigma)))


def alpha(data: SrbmData) -> np.ndarray:
    """``-2 diag(Sigma)^-1 diag(R) R^-1 mu``; exponential rates under skew symmetry."""
    q = data.q
    return -2.0 * np.diag(data.r) * (q @ data.mu) / np.diag(data.sigma)


def _row(data: SrbmData, i: int):
    (k,) = index_array([i], data.d)
    return int(k), data.q


def theta_ray(data: SrbmData, i: int) -> tuple[np.ndarray, float]:
    """Return ``(theta_ray_i, Delta_i)`` for the 1-based coordinate ``i``."""
    k, q = _row(data, i)
    qi = q[k]
    denom = float(qi @ data.sigma @ qi)
    if not denom > 0:
        raise PreconditionError(f"<Q[{i},:], Sigma Q[{i},:]> = {denom:.3g} is not positive")
    delta = -2.0 * float(data.mu @ qi) / denom
    return delta * qi, delta


def lambda_marginal(data: SrbmData, i: int) -> float:
    """``lambda_i = Delta_i Q_ii``, the rate of the exponential i-th marginal."""
    k, q = _row(data, i)
    if abs(q[k, k]) <= 1e-14 * float(np.max(np.abs(q))):
        raise PreconditionError(f"Q[{i},{i}] = 0, lambda_{i} is undefined")
    _, delta = theta_ray(data, i)
    return delta * float(q[k, k])


@dataclass(frozen=True)
class ProductFormReport:
    skew_residual: float
    is_skew: bool
    alpha: np.ndarray
    lam: np.ndarray
    delta: np.ndarray
    rays: np.ndarray  # column i is theta_ray_{i+1}
    interpretation: str = INTERPRETATION
    notes: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "skew_residual": self.skew_residual,
            "is_skew": self.is_skew,
            "alpha": self.alpha.tolist(),
            "lambda": [None if np.isnan(x) else float(x) for x in self.lam],
            "delta": self.delta.tolist(),
            "rays": self.rays.T.tolist(),
            "interpretation": self.interpretation,
            "notes": list(self.notes),
        }


def product_form_report(data: SrbmData) -> ProductFormReport:
    skew = skew_symmetry_check(data)
    d = data.d
    rays = np.zeros((d, d))
    delta = np.zeros(d)
    lam = np.full(d, np.nan)
    notes = []
    for i in range(1, d + 1):
        rays[:, i - 1], delta[i - 1] = theta_ray(data, i)
        try:
            lam[i - 1] = lambda_marginal(data, i)
        except PreconditionError as exc:
            notes.append(str(exc))
    return ProductFormReport(skew.residual, skew.is_skew, alpha(data), lam, delta, rays, notes=tuple(notes))
