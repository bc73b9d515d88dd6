"""Workload matrix and reduced SRBM data for a coordinate subset.

For ``Q = R^{-1}`` and a subset ``U`` with ``Q[U,U]`` invertible the reduced
primitives are::

    R~(U)     = Q[U,U]^{-1}
    mu~(U)    = R~(U) (Q mu)[U]
    Sigma~(U) = R~(U) (Q Sigma Q^T)[U,U] R~(U)^T

If the stationary distribution factorizes over ``(U, J\\U)``, the marginal
of ``Z[U]`` is the stationary law of the reduced SRBM.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import PreconditionError
from .model import Partition, SrbmData, index_array, inverse, is_stable


@dataclass(frozen=True, eq=False)
class ReducedData:
    u: tuple
    sigma_u: np.ndarray
    mu_u: np.ndarray
    r_u: np.ndarray
    q: np.ndarray

    def as_srbm(self) -> SrbmData:
        return SrbmData(sigma=self.sigma_u, mu=self.mu_u, r=self.r_u)

    def to_dict(self) -> dict:
        return {
            "u": list(self.u),
            "sigma_u": self.sigma_u.tolist(),
            "mu_u": self.mu_u.tolist(),
            "r_u": self.r_u.tolist(),
            "q": self.q.tolist(),
        }


def workload_matrix(data: SrbmData) -> np.ndarray:
    """``Q = R^{-1}``; raises :class:`SingularMatrixError` with the condition number."""
    return data.q


def _symmetrize(a):
    return 0.5 * (a + a.T)


def reduce(data: SrbmData, u: Iterable[int]) -> ReducedData:
    """Reduced primitives for the 1-based subset ``u`` (kept in ascending order)."""
    idx = index_array(u, data.d)
    q = workload_matrix(data)
    q_uu = q[np.ix_(idx, idx)]
    r_u = inverse(q_uu, f"Q[U,U] for U={tuple(int(i) + 1 for i in idx)}")
    qsq = q @ data.sigma @ q.T
    sigma_u = _symmetrize(r_u @ qsq[np.ix_(idx, idx)] @ r_u.T)
    mu_u = r_u @ (q @ data.mu)[idx]
    return ReducedData(tuple(int(i) + 1 for i in idx), sigma_u, mu_u, r_u, q)


def reduce_feedforward(data: SrbmData, partition: Partition) -> ReducedData:
    """Closed-form reduced data for ``L`` when ``R[K,L] = 0``.

    Uses only blocks of the primitives (no inverse of Q), so it serves as an
    independent cross-check of :func:`reduce`.
    """
    k, l = partition.k_idx, partition.l_idx
    if partition.d != data.d:
        raise PreconditionError(f"partition covers {partition.d} coordinates but d = {data.d}")
    r_kl = data.r[np.ix_(k, l)]
    if np.any(r_kl != 0):
        i, j = np.argwhere(r_kl != 0)[0]
        raise PreconditionError(
            f"R[K,L] is not zero: R[{k[i] + 1},{l[j] + 1}] = {r_kl[i, j]!r}"
        )
    s = data.sigma
    a = data.r[np.ix_(l, k)] @ inverse(data.r[np.ix_(k, k)], "R[K,K]")
    s_lk = s[np.ix_(l, k)]
    sigma_l = s[np.ix_(l, l)] + a @ s[np.ix_(k, k)] @ a.T - s_lk @ a.T - a @ s_lk.T
    mu_l = data.mu[l] - a @ data.mu[k]
    return ReducedData(
        partition.l_set, _symmetrize(sigma_l), mu_l, data.r[np.ix_(l, l)].copy(), workload_matrix(data)
    )


def check_stability(data: SrbmData) -> bool:
    """``R`` nonsingular and ``(Q mu)_i < 0`` for every i."""
    return is_stable(data)
