"""Matrix-class predicates: S, completely-S, P and M matrices.

The S test is a phase-one linear program solved by a small dense simplex
(Bland's rule); the other classes enumerate principal submatrices, so they
are limited to ``n <= MAX_ENUM_DIM``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import PreconditionError
from .model import as_matrix

MAX_ENUM_DIM = 20
LP_TOL = 1e-9
PIVOT_TOL = 1e-12
MARGIN_TOL = 1e-9
MINOR_RTOL = 1e-12


@dataclass(frozen=True)
class SWitness:
    """Outcome of the S-matrix test.

    When ``feasible`` is true, ``v > 0`` and ``a @ v > 0`` hold exactly as
    returned. ``marginal`` flags witnesses whose normalized margin
    ``min(a v) / (|v|_inf * max(1, |a|_inf))`` is below ``MARGIN_TOL``.
    """

    feasible: bool
    v: np.ndarray | None = None
    marginal: bool = False
    lp_optimum: float | None = None

    def __bool__(self):
        return self.feasible


@dataclass(frozen=True)
class CompletelySResult:
    ok: bool
    failing_subset: tuple | None

    def __bool__(self):
        return self.ok

    def __iter__(self):
        return iter((self.ok, self.failing_subset))


def phase_one(a: np.ndarray, max_iter: int = 10_000) -> tuple[float, np.ndarray]:
    """Minimize ``sum(s)`` subject to ``a v - t + s = 1`` and ``v, t, s >= 0``.

    Returns the optimal value and the ``v`` part of an optimal vertex. The
    optimum is 0 iff some ``v >= 0`` has ``a v >= 1``.
    """
    a = as_matrix(a)
    n = a.shape[0]
    # columns: v (n) | surplus t (n) | artificial s (n) | rhs
    tab = np.zeros((n, 3 * n + 1))
    tab[:, :n] = a
    tab[:, n : 2 * n] = -np.eye(n)
    tab[:, 2 * n : 3 * n] = np.eye(n)
    tab[:, -1] = 1.0
    basis = list(range(2 * n, 3 * n))
    cost = np.zeros(3 * n)
    cost[2 * n :] = 1.0

    for _ in range(max_iter):
        reduced = cost - cost[basis] @ tab[:, :-1]
        # the objective is bounded below by 0, so an improving column without a
        # pivot above tolerance is round-off and must not enter
        pivotable = np.any(tab[:, :-1] > PIVOT_TOL, axis=0)
        entering = next((j for j in range(3 * n) if reduced[j] < -PIVOT_TOL and pivotable[j]), None)
        if entering is None:
            break
        col = tab[:, entering]
        rows = [i for i in range(n) if col[i] > PIVOT_TOL]
        ratios = [tab[i, -1] / col[i] for i in rows]
        best = min(ratios)
        ties = [i for i, r in zip(rows, ratios) if r <= best + PIVOT_TOL * (1 + abs(best))]
        leave = min(ties, key=lambda i: basis[i])
        tab[leave] /= tab[leave, entering]
        for i in range(n):
            if i != leave and tab[i, entering] != 0.0:
                tab[i] -= tab[i, entering] * tab[leave]
        basis[leave] = entering
    else:
        raise RuntimeError("phase-one simplex hit its iteration cap")

    v = np.zeros(n)
    opt = 0.0
    for i, var in enumerate(basis):
        if var < n:
            v[var] = tab[i, -1]
        elif var >= 2 * n:
            opt += tab[i, -1]
    return max(opt, 0.0), np.maximum(v, 0.0)


def is_s_matrix(a) -> SWitness:
    """Decide whether some ``v > 0`` has ``a v > 0`` and return a witness."""
    a = as_matrix(a)
    n = a.shape[0]
    ones = np.ones(n)
    if np.all(a @ ones > 0):
        return _witness(a, ones, 0.0)
    opt, v = phase_one(a)
    if opt > LP_TOL:
        return SWitness(False, None, False, opt)
    # v >= 0 with a v >= 1; nudge into the open orthant without losing a v > 0
    row_sums = a @ ones
    eps = 0.5 / max(1.0, float(np.max(-row_sums)))
    return _witness(a, v + eps, opt)


def _witness(a, v, opt):
    av = a @ v
    if not (np.min(v) > 0 and np.min(av) > 0):
        return SWitness(False, None, True, opt)
    margin = float(np.min(av)) / (float(np.max(v)) * max(1.0, float(np.max(np.abs(a).sum(axis=1)))))
    return SWitness(True, v, margin < MARGIN_TOL, opt)


def _check_enum_size(n):
    if n > MAX_ENUM_DIM:
        raise PreconditionError(
            f"n = {n} > {MAX_ENUM_DIM}: principal-subset enumeration visits 2^n - 1 = "
            f"{2 ** n - 1} submatrices, which is refused as too costly"
        )


def principal_subsets(n: int):
    """Non-empty subsets of ``range(n)`` by size, then lexicographically."""
    for size in range(1, n + 1):
        yield from combinations(range(n), size)


def is_completely_s(a) -> CompletelySResult:
    """True iff every principal submatrix is S; otherwise report the first failure (1-based)."""
    a = as_matrix(a)
    n = a.shape[0]
    _check_enum_size(n)
    for sub in principal_subsets(n):
        idx = np.array(sub)
        if not is_s_matrix(a[np.ix_(idx, idx)]).feasible:
            return CompletelySResult(False, tuple(i + 1 for i in sub))
    return CompletelySResult(True, None)


def is_p_matrix(a) -> bool:
    """All principal minors positive, each relative to ``max|a_ij|**k`` for a k x k minor."""
    a = as_matrix(a)
    n = a.shape[0]
    _check_enum_size(n)
    amax = float(np.max(np.abs(a)))
    if amax == 0.0:
        return False
    for sub in principal_subsets(n):
        idx = np.array(sub)
        minor = np.linalg.det(a[np.ix_(idx, idx)])
        if not minor > MINOR_RTOL * amax ** len(sub):
            return False
    return True


def is_m_matrix(a) -> bool:
    """Nonsingular M-matrix: a Z-matrix whose leading principal minors are positive.

    For Z-matrices positivity of the leading minors is equivalent to the P
    property, so only ``n`` determinants are needed.
    """
    a = as_matrix(a)
    off = a - np.diag(np.diag(a))
    if np.any(off > 0):
        return False
    amax = float(np.max(np.abs(a)))
    if amax == 0.0:
        return False
    for k in range(1, a.shape[0] + 1):
        if not np.linalg.det(a[:k, :k]) > MINOR_RTOL * amax**k:
            return False
    return True
