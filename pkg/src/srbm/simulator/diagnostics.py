"""Monte Carlo checks of independence and of reduced-model marginals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import PreconditionError
from ..matclass import is_completely_s
from ..model import Partition, SrbmData, index_array, inverse
from ..reduction import reduce
from .core import SimConfig, SimResult, _grid_key, reduced_config, simulate

N_BOOTSTRAP = 200
BAND = 2.0
CONSISTENT = "consistent-with-independence"
INCONSISTENT = "inconsistent-with-independence"
# stream tag keeps bootstrap draws apart from the simulation noise streams
BOOTSTRAP_TAG = 0xB0075
REDUCED_SEED_OFFSET = 1_000_003


def _bootstrap_se(stat, n_batches: int, seed: int, n_boot: int = N_BOOTSTRAP) -> np.ndarray:
    """Std of ``stat(idx)`` over resampled batch index sets."""
    rng = np.random.default_rng([seed, BOOTSTRAP_TAG])
    draws = np.array([stat(rng.integers(0, n_batches, n_batches)) for _ in range(n_boot)])
    return draws.std(axis=0, ddof=1)


@dataclass(frozen=True)
class IndependenceReport:
    partition: Partition
    cross_cov: np.ndarray  # (|K|, |L|)
    cross_cov_se: np.ndarray
    theta: np.ndarray  # (n, d) points with both blocks nonzero
    residual: np.ndarray
    se: np.ndarray
    verdict: str

    @property
    def max_ratio(self) -> float:
        with np.errstate(divide="ignore", invalid="ignore"):
            return float(np.max(np.abs(self.residual) / self.se))

    @property
    def n_exceeding(self) -> int:
        return int(np.sum(np.abs(self.residual) > BAND * self.se))

    def to_dict(self) -> dict:
        return {
            "partition": str(self.partition),
            "cross_covariance": self.cross_cov.tolist(),
            "cross_covariance_se": self.cross_cov_se.tolist(),
            "points": [
                {"theta": t.tolist(), "residual": float(r), "se": float(s)}
                for t, r, s in zip(self.theta, self.residual, self.se)
            ],
            "max_abs_residual_over_se": self.max_ratio,
            "n_exceeding": self.n_exceeding,
            "verdict": self.verdict,
        }


def _lift(theta, idx):
    out = np.zeros_like(theta)
    out[idx] = theta[idx]
    return out


def independence_diagnostics(result: SimResult, partition: Partition) -> IndependenceReport:
    """Compare ``phi(theta)`` with ``phi(theta^K lifted) * phi(theta^L lifted)`` over the grid.

    Standard errors are bootstrap standard deviations over batches; the
    verdict is consistent iff every residual is within two of them.
    """
    if partition.d != result.d:
        raise PreconditionError(f"partition is over {partition.d} coordinates, result has {result.d}")
    k, l = partition.k_idx, partition.l_idx
    triples, missing = [], []
    for g, theta in enumerate(result.theta_grid):
        if not (np.any(theta[k] != 0) and np.any(theta[l] != 0)):
            continue
        gk = result.grid_index(_lift(theta, k))
        gl = result.grid_index(_lift(theta, l))
        for idx, lifted in ((gk, _lift(theta, k)), (gl, _lift(theta, l))):
            if idx is None:
                missing.append(lifted.tolist())
        if gk is not None and gl is not None:
            triples.append((g, gk, gl))
    if missing:
        raise PreconditionError(f"theta grid lacks lifted points {missing}")
    if not triples:
        raise PreconditionError("theta grid has no point with both blocks nonzero")
    g, gk, gl = (np.array(t) for t in zip(*triples))
    mgf = result.batches.mgf

    def residual(idx):
        m = mgf[idx].mean(axis=0)
        return m[g] - m[gk] * m[gl]

    res = residual(slice(None))
    se = _bootstrap_se(residual, result.batches.n, result.config.seed)
    verdict = CONSISTENT if np.all(np.abs(res) <= BAND * se) else INCONSISTENT
    return IndependenceReport(
        partition=partition,
        cross_cov=result.cov_z[np.ix_(k, l)],
        cross_cov_se=result.cov_z_se[np.ix_(k, l)],
        theta=result.theta_grid[g],
        residual=res,
        se=se,
        verdict=verdict,
    )


@dataclass(frozen=True)
class ConvolutionReport:
    partition: Partition
    coupling: np.ndarray  # (Q[K,K])^-1 Q[K,L]
    theta_k: np.ndarray
    residual: np.ndarray
    se: np.ndarray

    @property
    def within_band(self) -> np.ndarray:
        return np.abs(self.residual) <= BAND * self.se

    def to_dict(self) -> dict:
        return {
            "partition": str(self.partition),
            "coupling": self.coupling.tolist(),
            "points": [
                {"theta_k": t.tolist(), "residual": float(r), "se": float(s)}
                for t, r, s in zip(self.theta_k, self.residual, self.se)
            ],
        }


def convolution_independence_diagnostic(result: SimResult, partition: Partition, data: SrbmData) -> ConvolutionReport:
    """Residuals of ``E e^<theta, Z^K + W^K> = E e^<theta, Z^K> E e^<theta, W^K>``.

    ``W^K = (Q[K,K])^-1 Q[K,L] Z^L``. The simulation must have been run with
    ``partition`` in ``SimConfig.convolution_partitions``. Purely descriptive:
    no verdict is attached.
    """
    q = data.q
    k, l = partition.k_idx, partition.l_idx
    coupling = inverse(q[np.ix_(k, k)], "Q[K,K]") @ q[np.ix_(k, l)]
    key = str(partition)
    if key not in result.batches.conv:
        raise PreconditionError(f"simulation did not record Z^K + W^K for partition {key}")
    sums = result.batches.conv[key]

    def residual(idx):
        m = sums[idx].mean(axis=0)
        return m[:, 0] - m[:, 1] * m[:, 2]

    res = residual(slice(None))
    se = _bootstrap_se(residual, result.batches.n, result.config.seed)
    return ConvolutionReport(partition, coupling, result.conv_grids[key], res, se)


@dataclass(frozen=True)
class Comparison:
    quantity: str
    full: float
    reduced: float
    se: float

    @property
    def within(self) -> bool:
        return abs(self.full - self.reduced) <= BAND * self.se

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "full": self.full,
            "reduced": self.reduced,
            "difference": self.full - self.reduced,
            "se": self.se,
            "within_2se": self.within,
        }


@dataclass(frozen=True)
class BlockComparison:
    subset: tuple
    completely_s: bool
    failing_subset: tuple | None
    moments: tuple  # Comparison of means and covariances
    mgf: tuple  # Comparison of MGF values

    @property
    def moments_consistent(self) -> bool:
        return all(c.within for c in self.moments)

    @property
    def mgf_consistent(self) -> bool:
        return all(c.within for c in self.mgf)

    def to_dict(self) -> dict:
        return {
            "subset": list(self.subset),
            "reduced_r_completely_s": self.completely_s,
            "failing_subset": None if self.failing_subset is None else list(self.failing_subset),
            "moments_consistent": self.moments_consistent,
            "mgf_consistent": self.mgf_consistent,
            "moments": [c.to_dict() for c in self.moments],
            "mgf": [c.to_dict() for c in self.mgf],
        }


@dataclass(frozen=True)
class CrossValidationReport:
    partition: Partition
    blocks: tuple

    @property
    def consistent(self) -> bool:
        return all(b.completely_s and b.moments_consistent for b in self.blocks)

    def to_dict(self) -> dict:
        return {
            "partition": str(self.partition),
            "consistent": self.consistent,
            "blocks": [b.to_dict() for b in self.blocks],
        }


def _compare_block(full: SimResult, reduced: SimResult, u: np.ndarray, grid_u: np.ndarray) -> tuple:
    def both(a, b):
        return float(np.hypot(a, b))

    moments = []
    for a, i in enumerate(u):
        moments.append(
            Comparison(f"mean[{i + 1}]", full.mean_z[i], reduced.mean_z[a], both(full.mean_z_se[i], reduced.mean_z_se[a]))
        )
    for a, i in enumerate(u):
        for b in range(a, u.size):
            j = u[b]
            moments.append(
                Comparison(
                    f"cov[{i + 1},{j + 1}]",
                    full.cov_z[i, j],
                    reduced.cov_z[a, b],
                    both(full.cov_z_se[i, j], reduced.cov_z_se[a, b]),
                )
            )
    mgf = []
    for g, theta_u in enumerate(grid_u):
        lifted = np.zeros(full.d)
        lifted[u] = theta_u
        gf = full.grid_index(lifted)
        if gf is None or not np.any(theta_u != 0):
            continue
        mgf.append(
            Comparison(
                f"mgf{_grid_key(theta_u)}",
                full.mgf[gf],
                reduced.mgf[g],
                both(full.mgf_se[gf], reduced.mgf_se[g]),
            )
        )
    return tuple(moments), tuple(mgf)


def cross_validate_reduction(
    data: SrbmData, partition: Partition, config: SimConfig = SimConfig(), full: SimResult | None = None
) -> CrossValidationReport:
    """Simulate the full model and the reduced model on each block and compare marginals.

    Reduced runs use seeds disjoint from the full run. ``full`` may be passed
    to reuse an existing simulation of ``data``.
    """
    if full is None:
        full = simulate(data, config)
    blocks = []
    for n, subset in enumerate((partition.k_set, partition.l_set)):
        u = index_array(subset, data.d)
        red = reduce(data, subset)
        cs = is_completely_s(red.r_u)
        if not cs.ok:
            blocks.append(BlockComparison(tuple(subset), False, cs.failing_subset, (), ()))
            continue
        # restrict the full grid to points supported on U
        on_u = [t for t in full.theta_grid if np.all(np.delete(t, u) == 0)]
        grid_u = np.array([t[u] for t in on_u]) if on_u else np.zeros((1, u.size))
        red_cfg = reduced_config(config, grid_u, REDUCED_SEED_OFFSET * (n + 1))
        red_result = simulate(red.as_srbm(), red_cfg)
        moments, mgf = _compare_block(full, red_result, u, grid_u)
        blocks.append(BlockComparison(tuple(subset), True, None, moments, mgf))
    return CrossValidationReport(partition, tuple(blocks))
