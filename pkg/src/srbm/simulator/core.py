"""Reflected Euler–Maruyama simulation and stationary estimation.

Each step adds ``mu dt + sqrt(dt) L xi`` (``L`` the Cholesky factor of
Sigma) and then solves the one-step complementarity problem, so the chain
stays in the orthant, pushes are nonnegative and a push on face i only
happens when coordinate i ends the step at zero.

Monitoring the boundary only at grid times misses the part of each
excursion that happens between steps, which biases the chain towards the
origin by ``ZETA * sqrt(Sigma_ii dt)`` per coordinate to first order. With
``boundary_correction`` (the default) estimates are computed on the shifted
state ``w + ZETA * sqrt(diag(Sigma) dt)``. The shift is a constant vector,
so it cancels from every independence/factorization check.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from ..errors import LcpError, PreconditionError, SingularMatrixError
from ..model import SrbmData, inverse, is_stable, spd_check
from ..productform import alpha, lambda_marginal
from .backend import get_kernel
from .lcp import max_pivots, solve_lcp

# -zeta(1/2) / sqrt(2 pi): expected overshoot of a discretely monitored Brownian minimum
ZETA = 0.5825971579390106
DEFAULT_LEVELS = (0.0, -0.25, -0.5, -1.0)
TENSOR_GRID_MAX_DIM = 4


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.01
    steps: int = 1_000_000
    burn_in: int | None = None  # None -> 20% of steps
    seed: int = 0
    replications: int = 8
    theta_grid: np.ndarray | None = None  # rows are theta <= 0; None -> default_theta_grid
    n_batches: int = 50  # total across replications
    boundary_correction: bool = True
    backend: str = "auto"
    record_every: int | None = None
    convolution_partitions: tuple = ()
    hist_bins: int = 100
    threads: int | None = None
    chunk: int = 16384

    def __post_init__(self):
        if not self.dt > 0:
            raise PreconditionError(f"dt must be positive, got {self.dt}")
        if self.steps < 1 or self.replications < 1 or self.n_batches < 1:
            raise PreconditionError("steps, replications and n_batches must be >= 1")
        burn = int(0.2 * self.steps) if self.burn_in is None else self.burn_in
        if not 0 <= burn < self.steps:
            raise PreconditionError(f"burn_in must satisfy 0 <= burn_in < steps, got {burn}")
        object.__setattr__(self, "burn_in", burn)
        if self.record_every is not None and self.record_every < 1:
            raise PreconditionError("record_every must be >= 1")
        if self.theta_grid is not None:
            grid = np.atleast_2d(np.asarray(self.theta_grid, dtype=float))
            if np.any(grid > 0):
                raise PreconditionError("theta grid points must satisfy theta <= 0")
            grid.flags.writeable = False
            object.__setattr__(self, "theta_grid", grid)

    @property
    def batches_per_replication(self) -> int:
        return math.ceil(self.n_batches / self.replications)

    @property
    def batch_length(self) -> int:
        return (self.steps - self.burn_in) // self.batches_per_replication

    def to_dict(self) -> dict:
        return {
            "dt": self.dt,
            "steps": self.steps,
            "burn_in": self.burn_in,
            "seed": self.seed,
            "replications": self.replications,
            "n_batches": self.n_batches,
            "boundary_correction": self.boundary_correction,
            "record_every": self.record_every,
        }


@dataclass(frozen=True)
class SimState:
    """Chain state: position ``z >= 0`` and cumulative pushes ``y``."""

    z: np.ndarray
    y: np.ndarray


@dataclass
class BatchData:
    """Per-batch means; rows are (replication, batch) in replication order."""

    mean_z: np.ndarray  # (B, d)
    mean_zz: np.ndarray  # (B, d, d)
    y_rate: np.ndarray  # (B, d)
    mgf: np.ndarray  # (B, G)
    boundary_mgf: np.ndarray  # (B, d, G)
    hist: np.ndarray  # (B, d, bins + 1) counts, last column is overflow
    conv: dict = field(default_factory=dict)  # str(partition) -> (B, G_K, 3)

    @property
    def n(self) -> int:
        return self.mean_z.shape[0]

    def take(self, idx) -> "BatchData":
        return BatchData(
            self.mean_z[idx],
            self.mean_zz[idx],
            self.y_rate[idx],
            self.mgf[idx],
            self.boundary_mgf[idx],
            self.hist[idx],
            {k: v[idx] for k, v in self.conv.items()},
        )


@dataclass
class SimResult:
    d: int
    config: SimConfig
    theta_grid: np.ndarray
    shift: np.ndarray
    horizon: float
    mean_z: np.ndarray
    mean_z_se: np.ndarray
    cov_z: np.ndarray
    cov_z_se: np.ndarray
    y_rate: np.ndarray
    y_rate_se: np.ndarray
    mgf: np.ndarray
    mgf_se: np.ndarray
    boundary_mgf: np.ndarray
    boundary_mgf_se: np.ndarray
    hist_edges: np.ndarray  # (d, bins + 1)
    hist_counts: np.ndarray  # (d, bins + 1), last column is overflow
    batches: BatchData
    conv_grids: dict
    backend: str
    samples: np.ndarray | None = None
    warnings: tuple = ()

    def grid_index(self, theta) -> int | None:
        key = _grid_key(theta)
        for k, row in enumerate(self.theta_grid):
            if _grid_key(row) == key:
                return k
        return None

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "config": self.config.to_dict(),
            "backend": self.backend,
            "horizon": self.horizon,
            "shift": self.shift.tolist(),
            "mean_z": self.mean_z.tolist(),
            "mean_z_se": self.mean_z_se.tolist(),
            "cov_z": self.cov_z.tolist(),
            "cov_z_se": self.cov_z_se.tolist(),
            "y_rate": self.y_rate.tolist(),
            "y_rate_se": self.y_rate_se.tolist(),
            "theta_grid": self.theta_grid.tolist(),
            "empirical_mgf": self.mgf.tolist(),
            "empirical_mgf_se": self.mgf_se.tolist(),
            "empirical_boundary_mgf": self.boundary_mgf.tolist(),
            "empirical_boundary_mgf_se": self.boundary_mgf_se.tolist(),
            "marginal_histograms": [
                {"edges": e.tolist(), "counts": c.tolist()} for e, c in zip(self.hist_edges, self.hist_counts)
            ],
            "warnings": list(self.warnings),
        }


def _grid_key(theta):
    return tuple(np.round(np.asarray(theta, dtype=float), 12) + 0.0)


def rate_scale(data: SrbmData) -> np.ndarray:
    """Per-coordinate rate used to scale default grids and histograms."""
    scale = np.ones(data.d)
    try:
        a = alpha(data)
    except SingularMatrixError:
        return scale
    for i in range(data.d):
        try:
            lam = lambda_marginal(data, i + 1)
        except PreconditionError:
            lam = np.nan
        if np.isfinite(lam) and lam > 0:
            scale[i] = lam
        elif np.isfinite(a[i]) and a[i] > 0:
            scale[i] = a[i]
    return scale


def default_theta_grid(data: SrbmData, levels=DEFAULT_LEVELS) -> np.ndarray:
    """Tensor grid of ``levels * lambda_i`` for d <= 4; axes plus diagonal beyond."""
    scale = rate_scale(data)
    levels = np.asarray(levels, dtype=float)
    if data.d <= TENSOR_GRID_MAX_DIM:
        return np.array(list(product(*[levels * s for s in scale])))
    pts = [np.zeros(data.d)]
    for lev in levels[levels != 0]:
        for i in range(data.d):
            p = np.zeros(data.d)
            p[i] = lev * scale[i]
            pts.append(p)
        pts.append(lev * scale)
    return np.array(pts)


def boundary_shift(data: SrbmData, dt: float, enabled: bool = True) -> np.ndarray:
    if not enabled:
        return np.zeros(data.d)
    return ZETA * np.sqrt(np.diag(data.sigma) * dt)


def reflect_step(data: SrbmData, z, gaussian_increment, dt: float):
    """One Euler step followed by complementarity reflection.

    Returns ``(z_new, delta_y)`` with ``z_new = z + mu dt + L sqrt(dt) xi + R delta_y``.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise PreconditionError("reflect_step needs z >= 0")
    chol = np.linalg.cholesky(data.sigma)
    q = z + data.mu * dt + math.sqrt(dt) * chol @ np.asarray(gaussian_increment, dtype=float)
    try:
        return solve_lcp(q, data.r)
    except LcpError as exc:
        exc.state = z
        raise


def advance(data: SrbmData, state: SimState, gaussian_increment, dt: float) -> SimState:
    z_new, dy = reflect_step(data, state.z, gaussian_increment, dt)
    return SimState(z_new, state.y + dy)


def _threads(config: SimConfig) -> int:
    if config.threads is not None:
        return max(1, config.threads)
    env = os.environ.get("SRBM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


class _Replication:
    """Runs one replication and accumulates per-batch sums."""

    def __init__(self, data, config, grid, shift, edges, conv_specs, kernel):
        self.data = data
        self.config = config
        self.grid = grid
        self.shift = shift
        self.edges = edges
        self.conv_specs = conv_specs
        self.kernel = kernel
        d = data.d
        self.bgrids = []
        for i in range(d):
            g = grid.copy()
            g[:, i] = 0.0  # phi_i only sees the other coordinates
            self.bgrids.append(g)
        self.chol_t = math.sqrt(config.dt) * np.linalg.cholesky(data.sigma).T
        self.drift = data.mu * config.dt
        self.r = np.ascontiguousarray(data.r)
        self.cap = max_pivots(d)

    def run(self, rep: int):
        data, config = self.data, self.config
        d, g = data.d, self.grid.shape[0]
        nb, blen = config.batches_per_replication, config.batch_length
        burn = config.steps - nb * blen
        rng = np.random.default_rng(config.seed + rep)
        w = np.zeros(d)
        y = np.zeros(d)
        sums = {
            "z": np.zeros((nb, d)),
            "zz": np.zeros((nb, d, d)),
            "dy": np.zeros((nb, d)),
            "mgf": np.zeros((nb, g)),
            "bmgf": np.zeros((nb, d, g)),
            "hist": np.zeros((nb, d, self.edges.shape[1]), dtype=np.int64),
            "conv": {key: np.zeros((nb, spec[0].shape[0], 3)) for key, spec in self.conv_specs.items()},
        }
        samples = []
        step = 0

        def advance_steps(count, batch):
            nonlocal step, y
            done = 0
            while done < count:
                n = min(config.chunk, count - done)
                inc = rng.standard_normal((n, d)) @ self.chol_t + self.drift
                w_out = np.empty((n, d))
                dy_out = np.empty((n, d))
                status, where = self.kernel.reflect_chunk(w, inc, self.r, w_out, dy_out, self.cap)
                if status != 0:
                    # kernel leaves w at the state before the failing step
                    why = "secondary ray" if status == 1 else "pivot cap"
                    state = w.copy()
                    raise LcpError(
                        f"Lemke terminated on a {why} in replication {rep} at step {step + where}",
                        q=state + inc[where],
                        state=state,
                        replication=rep,
                        step=step + where,
                    )
                if config.record_every:
                    ycum = y + np.cumsum(dy_out, axis=0)
                    first = (-step) % config.record_every
                    sel = np.arange(first, n, config.record_every)
                    if sel.size:
                        samples.append(
                            np.column_stack(
                                [np.full(sel.size, rep), step + sel + 1, w_out[sel] + self.shift, ycum[sel]]
                            )
                        )
                y = y + dy_out.sum(axis=0)
                if batch is not None:
                    self._accumulate(sums, batch, w_out + self.shift, dy_out)
                step += n
                done += n

        advance_steps(burn, None)
        for b in range(nb):
            advance_steps(blen, b)
        return sums, (np.concatenate(samples) if samples else None)

    def _accumulate(self, sums, b, z, dy):
        sums["z"][b] += z.sum(axis=0)
        sums["zz"][b] += z.T @ z
        sums["dy"][b] += dy.sum(axis=0)
        sums["mgf"][b] += np.exp(z @ self.grid.T).sum(axis=0)
        pushed = dy.any(axis=1)
        if pushed.any():
            # the push is spread over the step; evaluate at its midpoint
            zp = z[pushed] - 0.5 * dy[pushed] @ self.r.T
            dyp = dy[pushed]
            for i, bgrid in enumerate(self.bgrids):
                rows = dyp[:, i] > 0
                if rows.any():
                    sums["bmgf"][b, i] += dyp[rows, i] @ np.exp(zp[rows] @ bgrid.T)
        for i in range(z.shape[1]):
            edges = self.edges[i]
            pos = np.searchsorted(edges, z[:, i], side="right") - 1
            pos = np.clip(pos, 0, edges.size - 1)
            sums["hist"][b, i] += np.bincount(pos, minlength=edges.size)
        for key, (grid_k, k_idx, coupling) in self.conv_specs.items():
            zk = z[:, k_idx]
            wk = z @ coupling.T
            acc = sums["conv"][key][b]
            acc[:, 0] += np.exp((zk + wk) @ grid_k.T).sum(axis=0)
            acc[:, 1] += np.exp(zk @ grid_k.T).sum(axis=0)
            acc[:, 2] += np.exp(wk @ grid_k.T).sum(axis=0)


def _conv_specs(data: SrbmData, grid: np.ndarray, partitions) -> dict:
    """For each K: (theta^K grid, K indices, matrix mapping z to W^K)."""
    specs = {}
    if not partitions:
        return specs
    q = data.q
    for part in partitions:
        k, l = part.k_idx, part.l_idx
        c = inverse(q[np.ix_(k, k)], "Q[K,K]") @ q[np.ix_(k, l)]
        coupling = np.zeros((k.size, data.d))
        coupling[:, l] = c
        grid_k = _unique_rows(grid[:, k])
        specs[str(part)] = (grid_k, k, coupling)
    return specs


def _unique_rows(a):
    seen = {}
    for row in a:
        seen.setdefault(_grid_key(row), row)
    return np.array(list(seen.values()))


def _se(values):
    b = values.shape[0]
    if b < 2:
        return np.full(values.shape[1:], np.nan)
    return values.std(axis=0, ddof=1) / math.sqrt(b)


def summarize(batches: BatchData):
    """Point estimates and batch-means standard errors from per-batch means."""
    m = batches.mean_z.mean(axis=0)
    # linearized per-batch covariance so that its batch average is the pooled covariance
    mb = batches.mean_z
    cov_b = batches.mean_zz - mb[:, :, None] * m[None, None, :] - m[None, :, None] * mb[:, None, :] + np.outer(m, m)
    cov = cov_b.mean(axis=0)
    return {
        "mean_z": m,
        "mean_z_se": _se(mb),
        "cov_z": 0.5 * (cov + cov.T),
        "cov_z_se": _se(cov_b),
        "y_rate": batches.y_rate.mean(axis=0),
        "y_rate_se": _se(batches.y_rate),
        "mgf": batches.mgf.mean(axis=0),
        "mgf_se": _se(batches.mgf),
        "boundary_mgf": batches.boundary_mgf.mean(axis=0),
        "boundary_mgf_se": _se(batches.boundary_mgf),
    }


def simulate(data: SrbmData, config: SimConfig = SimConfig()) -> SimResult:
    """Time-average stationary estimates pooled over replications seeded ``seed + r``."""
    d = data.d
    notes = []
    spd, min_eig = spd_check(data.sigma)
    if not spd:
        raise PreconditionError(f"Sigma is not positive definite (min eigenvalue {min_eig:.3g})")
    if not is_stable(data):
        notes.append("model is not stable (R^-1 mu < 0 fails); stationary estimates are meaningless")
    else:
        qmu = data.q @ data.mu
        need = 10.0 / float(np.min(np.abs(qmu)))
        if config.dt * config.steps < need:
            notes.append(
                f"horizon dt*steps = {config.dt * config.steps:.4g} is below the relaxation heuristic {need:.4g}"
            )
    if config.batch_length < 1:
        raise PreconditionError("too few post-burn-in steps for the requested number of batches")
    for note in notes:
        warnings.warn(note, RuntimeWarning, stacklevel=2)

    grid = default_theta_grid(data) if config.theta_grid is None else np.array(config.theta_grid)
    if grid.ndim != 2 or grid.shape[1] != d:
        raise PreconditionError(f"theta grid must have {d} columns")
    shift = boundary_shift(data, config.dt, config.boundary_correction)
    scale = rate_scale(data)
    edges = np.array([np.linspace(0.0, 8.0 / s, config.hist_bins + 1) for s in scale])
    conv_specs = _conv_specs(data, grid, config.convolution_partitions)
    kernel = get_kernel(config.backend)

    runner = _Replication(data, config, grid, shift, edges, conv_specs, kernel)
    workers = min(config.replications, _threads(config))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(runner.run, range(config.replications)))
    else:
        outputs = [runner.run(r) for r in range(config.replications)]

    blen = config.batch_length
    per_batch_time = blen * config.dt

    def stack(name):
        return np.concatenate([out[0][name] for out in outputs])

    batches = BatchData(
        mean_z=stack("z") / blen,
        mean_zz=stack("zz") / blen,
        y_rate=stack("dy") / per_batch_time,
        mgf=stack("mgf") / blen,
        boundary_mgf=stack("bmgf") / per_batch_time,
        hist=stack("hist"),
        conv={key: np.concatenate([out[0]["conv"][key] for out in outputs]) / blen for key in conv_specs},
    )
    est = summarize(batches)
    samples = [out[1] for out in outputs if out[1] is not None]
    return SimResult(
        d=d,
        config=config,
        theta_grid=grid,
        shift=shift,
        horizon=batches.n * per_batch_time,
        hist_edges=edges,
        hist_counts=batches.hist.sum(axis=0),
        batches=batches,
        conv_grids={key: spec[0] for key, spec in conv_specs.items()},
        backend=kernel.BACKEND,
        samples=np.concatenate(samples) if samples else None,
        warnings=tuple(notes),
        **est,
    )


def sample_path(data: SrbmData, steps: int, dt: float = 0.01, seed: int = 0, backend: str = "auto"):
    """Raw chain path from ``Z(0) = 0``: states ``z`` (steps, d), pushes ``dy`` and cumulative ``y``."""
    config = SimConfig(dt=dt, steps=max(steps, 2), burn_in=0, seed=seed, replications=1, backend=backend)
    runner = _Replication(
        data, config, np.zeros((1, data.d)), np.zeros(data.d), np.zeros((data.d, 2)), {}, get_kernel(backend)
    )
    rng = np.random.default_rng(seed)
    inc = rng.standard_normal((steps, data.d)) @ runner.chol_t + runner.drift
    w = np.zeros(data.d)
    z = np.empty((steps, data.d))
    dy = np.empty((steps, data.d))
    status, where = runner.kernel.reflect_chunk(w, inc, runner.r, z, dy, runner.cap)
    if status != 0:
        raise LcpError(f"Lemke failed at step {where}", step=where)
    return z, dy, np.cumsum(dy, axis=0)


def reduced_config(config: SimConfig, grid: np.ndarray, seed_offset: int) -> SimConfig:
    return replace(config, theta_grid=grid, seed=config.seed + seed_offset, convolution_partitions=(), record_every=None)
