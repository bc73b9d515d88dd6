"""MGF form of the basic adjoint relationship and boundary factorization checks.

For a stationary law with MGF ``phi`` and boundary-measure MGFs ``phi_i``::

    gamma(theta) phi(theta) = sum_i gamma_i(theta) phi_i(theta),   theta <= 0

``phi_i`` does not depend on ``theta_i`` because ``Z_i = 0`` wherever
``Y_i`` increases.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import PreconditionError
from .model import Partition, SrbmData, is_stable
from .productform import alpha, evaluate_polys, skew_symmetry_check
from .simulator.core import SimResult
from .simulator.diagnostics import BAND, _bootstrap_se, _lift


class MgfModel(Protocol):
    d: int
    boundary_mass: np.ndarray

    def phi(self, theta) -> float: ...

    def phi_boundary(self, theta) -> np.ndarray: ...


def _theta(theta, d: int) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (d,):
        raise PreconditionError(f"theta must have length {d}")
    if np.any(theta > 0):
        raise PreconditionError(f"theta must satisfy theta <= 0, got {theta.tolist()}")
    return theta


@dataclass(frozen=True, eq=False)
class ProductFormMgf:
    """Independent exponential coordinates with the given rates."""

    rates: np.ndarray
    boundary_mass: np.ndarray

    @property
    def d(self) -> int:
        return self.rates.size

    def _factors(self, theta):
        theta = _theta(theta, self.d)
        return self.rates / (self.rates - theta)

    def phi(self, theta) -> float:
        return float(np.prod(self._factors(theta)))

    def phi_boundary(self, theta) -> np.ndarray:
        f = self._factors(theta)
        out = np.empty(self.d)
        for i in range(self.d):
            out[i] = self.boundary_mass[i] * np.prod(np.delete(f, i))
        return out

    def perturbed(self, factor) -> "ProductFormMgf":
        return ProductFormMgf(self.rates * factor, self.boundary_mass)


def product_form_model(data: SrbmData) -> ProductFormMgf:
    """Closed-form stationary MGFs of a stable skew-symmetric SRBM.

    ``phi_i(theta) = -(Q mu)_i * prod_{j != i} alpha_j / (alpha_j - theta_j)``.
    """
    check = skew_symmetry_check(data)
    if not check.is_skew:
        raise PreconditionError(f"data is not skew-symmetric (residual {check.residual:.3g})")
    if not is_stable(data):
        raise PreconditionError("data is not stable; no stationary distribution")
    mass = -(data.q @ data.mu)
    return ProductFormMgf(alpha(data), mass)


class EmpiricalMgf:
    """Simulation estimates, defined only on the simulated theta grid."""

    def __init__(self, result: SimResult):
        self.result = result
        self.d = result.d
        self.boundary_mass = result.y_rate

    def _index(self, theta) -> int:
        theta = _theta(theta, self.d)
        g = self.result.grid_index(theta)
        if g is None:
            raise PreconditionError(f"theta {theta.tolist()} is not on the simulated grid")
        return g

    def phi(self, theta) -> float:
        return float(self.result.mgf[self._index(theta)])

    def phi_se(self, theta) -> float:
        return float(self.result.mgf_se[self._index(theta)])

    def phi_boundary(self, theta) -> np.ndarray:
        return self.result.boundary_mgf[:, self._index(theta)].copy()

    def phi_boundary_se(self, theta) -> np.ndarray:
        return self.result.boundary_mgf_se[:, self._index(theta)].copy()


def bar_residual(data: SrbmData, model: MgfModel, theta) -> float:
    """``gamma(theta) phi(theta) - sum_i gamma_i(theta) phi_i(theta)`` for ``theta <= 0``."""
    theta = _theta(theta, data.d)
    poly = evaluate_polys(data, theta)
    return float(poly.gamma * model.phi(theta) - poly.gamma_i @ model.phi_boundary(theta))


def palm_factorization_residual(model: MgfModel, partition: Partition, theta) -> np.ndarray:
    """``phi_j(theta) - phi_j(theta^K) phi(theta^L)`` for each j in K (block lifts padded by zeros)."""
    theta = _theta(theta, model.d)
    k, l = partition.k_idx, partition.l_idx
    full = model.phi_boundary(theta)[k]
    part_k = model.phi_boundary(_lift(theta, k))[k]
    return full - part_k * model.phi(_lift(theta, l))


@dataclass(frozen=True)
class ResidualTable:
    theta: np.ndarray  # (n, d)
    residual: np.ndarray  # (n,) or (n, |K|)
    se: np.ndarray

    @property
    def within_band(self) -> np.ndarray:
        return np.abs(self.residual) <= BAND * self.se

    def rows(self):
        for t, r, s in zip(self.theta, self.residual, self.se):
            yield t, r, s


def empirical_bar_table(data: SrbmData, result: SimResult) -> ResidualTable:
    """BAR residuals at every grid point with batch-bootstrap standard errors."""
    grid = result.theta_grid
    gammas = np.array([evaluate_polys(data, t).gamma for t in grid])
    gamma_i = np.array([evaluate_polys(data, t).gamma_i for t in grid])
    b = result.batches

    def stat(idx):
        mgf = b.mgf[idx].mean(axis=0)
        bmgf = b.boundary_mgf[idx].mean(axis=0)
        return gammas * mgf - np.einsum("gi,ig->g", gamma_i, bmgf)

    res = stat(slice(None))
    se = _bootstrap_se(stat, b.n, result.config.seed)
    return ResidualTable(grid, res, se)


def empirical_palm_table(result: SimResult, partition: Partition) -> ResidualTable:
    """Palm factorization residuals over grid points with ``theta^L != 0``."""
    k, l = partition.k_idx, partition.l_idx
    triples, missing = [], []
    for g, theta in enumerate(result.theta_grid):
        if not np.any(theta[l] != 0):
            continue
        gk = result.grid_index(_lift(theta, k))
        gl = result.grid_index(_lift(theta, l))
        if gk is None or gl is None:
            missing.append(theta.tolist())
            continue
        triples.append((g, gk, gl))
    if missing:
        raise PreconditionError(f"theta grid lacks block lifts of {missing}")
    if not triples:
        raise PreconditionError("theta grid has no point with theta^L != 0")
    g, gk, gl = (np.array(t) for t in zip(*triples))
    b = result.batches

    def stat(idx):
        mgf = b.mgf[idx].mean(axis=0)
        bmgf = b.boundary_mgf[idx].mean(axis=0)[k]
        return (bmgf[:, g] - bmgf[:, gk] * mgf[gl]).T

    res = stat(slice(None))
    se = _bootstrap_se(stat, b.n, result.config.seed)
    return ResidualTable(result.theta_grid[g], res, se)
