"""Lemke's complementary pivoting for the one-step reflection problem.

Given ``q`` and ``R`` find ``dy >= 0`` with ``w = q + R dy >= 0`` and
``w . dy = 0``. Ties in the ratio test are broken lexicographically, which
rules out cycling on degenerate steps.
"""

from __future__ import annotations

import numpy as np

from ..errors import LcpError

PIVOT_TOL = 1e-11
TIE_RTOL = 1e-12

OK = 0
RAY = 1
CAP = 2


def max_pivots(d: int) -> int:
    # 2^d complementary pivots after the artificial variable enters
    return 2 ** d + 1


def lemke(q, m, cap=None):
    """Solve ``LCP(q, m)``; returns ``(status, z)`` with ``z`` a list of floats.

    ``status`` is ``OK``, ``RAY`` (secondary ray termination) or ``CAP``
    (pivot cap reached). Works on plain lists; ``n`` is tiny.
    """
    n = len(q)
    if min(q) >= 0.0:
        return OK, [0.0] * n
    if cap is None:
        cap = max_pivots(n)
    width = 2 * n + 2
    art, rhs = 2 * n, 2 * n + 1
    tab = []
    for i in range(n):
        row = [0.0] * width
        row[i] = 1.0
        for j in range(n):
            row[n + j] = -float(m[i][j])
        row[art] = -1.0
        row[rhs] = float(q[i])
        tab.append(row)
    basis = list(range(n))

    # most negative q leaves; among ties the largest index keeps the tableau lexico-positive
    qmin = min(q)
    r = max(i for i in range(n) if q[i] == qmin)
    _pivot(tab, r, art)
    leaving = basis[r]
    basis[r] = art
    entering = leaving + n

    for _ in range(cap):
        row = _lexico_ratio(tab, basis, entering, n)
        if row < 0:
            return RAY, None
        leaving = basis[row]
        _pivot(tab, row, entering)
        basis[row] = entering
        if leaving == art:
            z = [0.0] * n
            for i, var in enumerate(basis):
                if n <= var < 2 * n:
                    z[var - n] = max(tab[i][rhs], 0.0)
            return OK, z
        entering = leaving + n if leaving < n else leaving - n
    return CAP, None


def _pivot(tab, r, c):
    prow = tab[r]
    p = prow[c]
    for j in range(len(prow)):
        prow[j] /= p
    for i, row in enumerate(tab):
        if i != r:
            f = row[c]
            if f != 0.0:
                for j in range(len(row)):
                    row[j] -= f * prow[j]


def _lexico_ratio(tab, basis, col, n):
    rhs = 2 * n + 1
    cand = [i for i in range(n) if tab[i][col] > PIVOT_TOL]
    if not cand:
        return -1
    ratios = {i: tab[i][rhs] / tab[i][col] for i in cand}
    best = min(ratios.values())
    tied = [i for i in cand if ratios[i] <= best + TIE_RTOL * (1.0 + abs(best))]
    if len(tied) == 1:
        return tied[0]
    for i in tied:
        if basis[i] == 2 * n:
            return i
    # refine by the columns of B^-1, which sit under the original w block
    for k in range(n):
        vals = {i: tab[i][k] / tab[i][col] for i in tied}
        lo = min(vals.values())
        tied = [i for i in tied if vals[i] <= lo + TIE_RTOL * (1.0 + abs(lo))]
        if len(tied) == 1:
            break
    return tied[0]


def complete_step(q, r, dy):
    """``w = q + R dy`` with complementarity imposed exactly on pushed faces."""
    n = len(q)
    w = [0.0] * n
    for i in range(n):
        if dy[i] > 0.0:
            continue
        v = q[i]
        for j in range(n):
            if dy[j] != 0.0:
                v += r[i][j] * dy[j]
        w[i] = v if v > 0.0 else 0.0
    return w


def solve_lcp(q, r) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(w, dy)`` for ``w = q + R dy``; raises :class:`LcpError` on failure."""
    q = [float(x) for x in np.asarray(q, dtype=float).ravel()]
    r = np.asarray(r, dtype=float).tolist()
    status, dy = lemke(q, r)
    if status != OK:
        why = "secondary ray" if status == RAY else "pivot cap"
        raise LcpError(f"Lemke terminated on a {why} for q = {q}", q=np.array(q))
    return np.array(complete_step(q, r, dy)), np.array(dy)
