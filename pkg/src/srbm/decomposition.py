"""Decomposability of the stationary law over feed-forward partitions.

For a partition ``(K, L)`` with ``R[K,L] = 0`` the stationary distribution
factorizes as (product form on K) x (law on L) exactly when::

    skew:   2 Sigma[K,K] = R[K,K] D^-1 S + S D^-1 R[K,K]^T
    cross:  2 Sigma[L,K] = R[L,K] S D^-1

with ``D = diag(R[K,K])``, ``S = diag(Sigma[K,K])``, provided the
``(Sigma[L,L], mu~(L), R[L,L])``-SRBM has a stationary distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, SingularMatrixError
from .matclass import is_m_matrix, is_p_matrix
from .model import Partition, SrbmData, TandemSpec, build_tandem, drift_stable, inverse, is_stable
from .productform import skew_matrix_residual

RESIDUAL_RTOL = 1e-10
TANDEM_CV_RTOL = 1e-12
NECESSARY_ONLY = "necessary-only"
SUFFICIENT = "sufficient"


@dataclass(frozen=True)
class DecompReport:
    partition: Partition
    feedforward: bool
    cond1_residual: float
    cond2_residual: float
    cond3_residual: float
    decomposable: bool
    l_block_stable: bool
    stationarity_certainty: str
    stable: bool
    notes: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "partition": {"k": list(self.partition.k_set), "l": list(self.partition.l_set)},
            "feedforward": self.feedforward,
            "cond1_residual": self.cond1_residual,
            "cond2_residual": self.cond2_residual,
            "cond3_residual": self.cond3_residual,
            "decomposable": self.decomposable,
            "l_block_stable": self.l_block_stable,
            "stationarity_certainty": self.stationarity_certainty,
            "stable": self.stable,
            "notes": list(self.notes),
        }


def _check_partition(data: SrbmData, partition: Partition):
    if partition.d != data.d:
        raise PreconditionError(f"partition covers {partition.d} coordinates but d = {data.d}")


def check_feedforward(data: SrbmData, partition: Partition) -> bool:
    """``R[K,L]`` is exactly zero (structural zeros, no tolerance)."""
    _check_partition(data, partition)
    return not np.any(data.r[np.ix_(partition.k_idx, partition.l_idx)] != 0)


def condition3_matrix(data: SrbmData, partition: Partition) -> np.ndarray:
    """``A S_KK A^T - S_LK A^T - A S_LK^T`` with ``A = R[L,K] R[K,K]^-1``.

    This is exactly the correction separating ``Sigma~(L)`` from ``Sigma[L,L]``.
    """
    k, l = partition.k_idx, partition.l_idx
    return _condition3(data.sigma, _coupling(data, k, l), k, l)


def _coupling(data, k, l):
    # A = R[L,K] R[K,K]^-1
    return data.r[np.ix_(l, k)] @ inverse(data.r[np.ix_(k, k)], "R[K,K]")


def _condition3(s, a, k, l):
    s_lk = s[np.ix_(l, k)]
    return a @ s[np.ix_(k, k)] @ a.T - s_lk @ a.T - a @ s_lk.T


def check_decomposability(data: SrbmData, partition: Partition) -> DecompReport:
    _check_partition(data, partition)
    k, l = partition.k_idx, partition.l_idx
    r_kl = data.r[np.ix_(k, l)]
    if np.any(r_kl != 0):
        i, j = np.argwhere(r_kl != 0)[0]
        raise PreconditionError(
            f"partition {partition} is not feed-forward: R[{k[i] + 1},{l[j] + 1}] = {r_kl[i, j]!r}"
        )
    notes = []
    s = data.sigma
    r_kk = data.r[np.ix_(k, k)]
    s_k = np.diag(s)[k]
    d_k = np.diag(r_kk)
    cond1 = float(np.linalg.norm(skew_matrix_residual(s[np.ix_(k, k)], r_kk)))
    cond2 = float(np.linalg.norm(2.0 * s[np.ix_(l, k)] - data.r[np.ix_(l, k)] * (s_k / d_k)[None, :]))

    try:
        a = _coupling(data, k, l)
        cond3 = float(np.linalg.norm(_condition3(s, a, k, l)))
        mu_l = data.mu[l] - a @ data.mu[k]
        r_ll = data.r[np.ix_(l, l)]
        l_stable = drift_stable(r_ll, mu_l)
    except SingularMatrixError as exc:
        notes.append(str(exc))
        cond3, l_stable, r_ll = float("inf"), False, None

    certainty = NECESSARY_ONLY
    if l_stable and (is_m_matrix(r_ll) or (len(l) <= 2 and is_p_matrix(r_ll))):
        certainty = SUFFICIENT
    elif l_stable:
        notes.append("L-block stationarity verified only through the necessary condition R^-1 mu < 0")

    stable = is_stable(data)
    if not stable:
        notes.append("full model is not stable; no stationary distribution exists")
    tol = RESIDUAL_RTOL * float(np.linalg.norm(s))
    if len(k) >= 2:
        notes.append("the skew and cross conditions are the checkable surrogate for product form of Z^K")
    decomposable = cond1 < tol and cond2 < tol and l_stable and stable
    return DecompReport(
        partition, True, cond1, cond2, cond3, decomposable, l_stable, certainty, stable, tuple(notes)
    )


def find_decompositions(data: SrbmData, include_all: bool = False) -> list[DecompReport]:
    """Scan all ``2^d - 2`` ordered partitions; return decomposable ones, smallest ``|L|`` first.

    With ``include_all`` every feed-forward partition is reported.
    """
    d = data.d
    if d > 20:
        raise PreconditionError(f"d = {d} > 20: partition search is exponential in d")
    reports = []
    for mask in range(1, 2 ** d - 1):
        part = Partition.from_k([i + 1 for i in range(d) if mask >> i & 1], d)
        if not check_feedforward(data, part):
            continue
        rep = check_decomposability(data, part)
        if include_all or rep.decomposable:
            reports.append(rep)
    reports.sort(key=lambda rep: (len(rep.partition.l_set), rep.partition.k_set))
    return reports


def tandem_decomposability(spec: TandemSpec, k: int) -> bool:
    """``c_0 = c_1 = ... = c_k`` (relative tolerance 1e-12)."""
    if not 1 <= k <= spec.d - 1:
        raise PreconditionError(f"k must lie in 1..{spec.d - 1}, got {k}")
    c = np.asarray(spec.cv[: k + 1])
    scale = max(float(np.max(c)), np.finfo(float).tiny)
    return bool(np.max(np.abs(c - c[0])) <= TANDEM_CV_RTOL * scale)


def tandem_report(spec: TandemSpec, k: int) -> DecompReport:
    return check_decomposability(build_tandem(spec), Partition.from_k(range(1, k + 1), spec.d))
