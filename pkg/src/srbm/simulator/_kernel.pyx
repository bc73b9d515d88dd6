# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled reflected Euler step loop with an embedded Lemke solver.

Mirrors ``_kernel_py.reflect_chunk`` operation for operation.
"""

from libc.stdlib cimport malloc, free

DEF PIVOT_TOL = 1e-11
DEF TIE_RTOL = 1e-12

BACKEND = "cython"


cdef inline void _pivot(double* tab, int n, int width, int r, int c) noexcept nogil:
    cdef int i, j
    cdef double p = tab[r * width + c]
    cdef double f
    for j in range(width):
        tab[r * width + j] /= p
    for i in range(n):
        if i == r:
            continue
        f = tab[i * width + c]
        if f != 0.0:
            for j in range(width):
                tab[i * width + j] -= f * tab[r * width + j]


cdef int _lexico_ratio(double* tab, int* basis, int* tied, int n, int width, int col) noexcept nogil:
    cdef int i, k, m = 0, m2
    cdef int rhs = 2 * n + 1
    cdef double a, ratio, best = 0.0, lo, v
    for i in range(n):
        a = tab[i * width + col]
        if a > PIVOT_TOL:
            ratio = tab[i * width + rhs] / a
            if m == 0 or ratio < best:
                best = ratio
            tied[m] = i
            m += 1
    if m == 0:
        return -1
    m2 = 0
    for k in range(m):
        i = tied[k]
        ratio = tab[i * width + rhs] / tab[i * width + col]
        if ratio <= best + TIE_RTOL * (1.0 + (best if best >= 0 else -best)):
            tied[m2] = i
            m2 += 1
    m = m2
    if m == 1:
        return tied[0]
    for k in range(m):
        if basis[tied[k]] == 2 * n:
            return tied[k]
    for k in range(n):
        lo = 0.0
        for m2 in range(m):
            i = tied[m2]
            v = tab[i * width + k] / tab[i * width + col]
            if m2 == 0 or v < lo:
                lo = v
        m2 = 0
        for i in range(m):
            v = tab[tied[i] * width + k] / tab[tied[i] * width + col]
            if v <= lo + TIE_RTOL * (1.0 + (lo if lo >= 0 else -lo)):
                tied[m2] = tied[i]
                m2 += 1
        m = m2
        if m == 1:
            break
    return tied[0]


cdef int _lemke(const double[:, ::1] mat, double* q, double* z, double* tab,
                int* basis, int* tied, int n, int cap) noexcept nogil:
    """0 = solved, 1 = secondary ray, 2 = pivot cap."""
    cdef int width = 2 * n + 2
    cdef int art = 2 * n, rhs = 2 * n + 1
    cdef int i, j, r, row, it, leaving, entering
    cdef double qmin = q[0]
    for i in range(n):
        z[i] = 0.0
        if q[i] < qmin:
            qmin = q[i]
    if qmin >= 0.0:
        return 0
    for i in range(n):
        for j in range(width):
            tab[i * width + j] = 0.0
        tab[i * width + i] = 1.0
        for j in range(n):
            tab[i * width + n + j] = -mat[i, j]
        tab[i * width + art] = -1.0
        tab[i * width + rhs] = q[i]
        basis[i] = i
    r = 0
    for i in range(n):
        if q[i] == qmin:
            r = i
    _pivot(tab, n, width, r, art)
    leaving = basis[r]
    basis[r] = art
    entering = leaving + n
    for it in range(cap):
        row = _lexico_ratio(tab, basis, tied, n, width, entering)
        if row < 0:
            return 1
        leaving = basis[row]
        _pivot(tab, n, width, row, entering)
        basis[row] = entering
        if leaving == art:
            for i in range(n):
                if n <= basis[i] < 2 * n:
                    z[basis[i] - n] = tab[i * width + rhs] if tab[i * width + rhs] > 0.0 else 0.0
            return 0
        entering = leaving + n if leaving < n else leaving - n
    return 2


def reflect_chunk(double[::1] w, const double[:, ::1] inc, const double[:, ::1] r,
                  double[:, ::1] w_out, double[:, ::1] dy_out, int cap):
    """Advance the chain through ``inc.shape[0]`` steps.

    ``w`` is updated in place. Returns ``(status, step)``; on failure
    ``step`` is the offending row of ``inc`` and ``w`` holds the state
    before it.
    """
    cdef Py_ssize_t steps = inc.shape[0]
    cdef int n = <int> inc.shape[1]
    cdef Py_ssize_t t
    cdef int i, j, status = 0
    cdef bint interior
    cdef double v
    cdef Py_ssize_t fail = -1
    cdef double* q = <double*> malloc(n * sizeof(double))
    cdef double* dy = <double*> malloc(n * sizeof(double))
    cdef double* tab = <double*> malloc(n * (2 * n + 2) * sizeof(double))
    cdef int* basis = <int*> malloc(n * sizeof(int))
    cdef int* tied = <int*> malloc(n * sizeof(int))
    if q == NULL or dy == NULL or tab == NULL or basis == NULL or tied == NULL:
        free(q); free(dy); free(tab); free(basis); free(tied)
        raise MemoryError()
    try:
        with nogil:
            for t in range(steps):
                interior = True
                for i in range(n):
                    q[i] = w[i] + inc[t, i]
                    if q[i] < 0.0:
                        interior = False
                if interior:
                    for i in range(n):
                        w[i] = q[i]
                        w_out[t, i] = q[i]
                        dy_out[t, i] = 0.0
                    continue
                status = _lemke(r, q, dy, tab, basis, tied, n, cap)
                if status != 0:
                    fail = t
                    break
                for i in range(n):
                    if dy[i] > 0.0:
                        v = 0.0
                    else:
                        v = q[i]
                        for j in range(n):
                            if dy[j] != 0.0:
                                v += r[i, j] * dy[j]
                        if v < 0.0:
                            v = 0.0
                    w[i] = v
                    w_out[t, i] = v
                    dy_out[t, i] = dy[i]
    finally:
        free(q); free(dy); free(tab); free(basis); free(tied)
    return status, fail
