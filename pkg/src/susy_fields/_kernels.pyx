# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled tridiagonal kernels (Sturm bisection, pivoted tridiagonal solve).

Mirrors ``_kernels_py`` exactly; see that module for the reference logic.
"""

import numpy as np

from libc.math cimport fabs


cdef double _pivmin(const double[::1] e2) noexcept nogil:
    cdef Py_ssize_t i
    cdef double m = 1.0
    for i in range(e2.shape[0]):
        if e2[i] > m:
            m = e2[i]
    return 1e-300 * m


cdef Py_ssize_t _count(const double[::1] d, const double[::1] e2,
                       double lam, double pivmin) noexcept nogil:
    cdef Py_ssize_t i, n = d.shape[0], c = 0
    cdef double q = d[0] - lam
    if fabs(q) < pivmin:
        q = -pivmin
    if q < 0.0:
        c += 1
    for i in range(1, n):
        q = d[i] - lam - e2[i - 1] / q
        if fabs(q) < pivmin:
            q = -pivmin
        if q < 0.0:
            c += 1
    return c


def sturm_count(diag, off, double lam):
    cdef double[::1] d = np.ascontiguousarray(diag, dtype=np.float64)
    cdef double[::1] e2 = np.ascontiguousarray(np.asarray(off, dtype=np.float64) ** 2)
    return int(_count(d, e2, lam, _pivmin(e2)))


def bisect_lowest(diag, off, Py_ssize_t k, double abstol, Py_ssize_t maxiter):
    cdef double[::1] d = np.ascontiguousarray(diag, dtype=np.float64)
    e = np.asarray(off, dtype=np.float64)
    cdef double[::1] e2 = np.ascontiguousarray(e ** 2)
    cdef double pivmin = _pivmin(e2)
    ae = np.abs(e)
    radius = np.zeros(d.shape[0])
    radius[:-1] += ae
    radius[1:] += ae
    cdef double lo = float(np.min(np.asarray(d) - radius))
    cdef double hi = float(np.max(np.asarray(d) + radius))
    cdef double span = max(fabs(lo), fabs(hi), 1.0)
    lo -= 2.2e-16 * span + pivmin
    hi += 2.2e-16 * span + pivmin

    values = np.empty(k)
    cdef double[::1] out = values
    cdef bint converged = True
    cdef double left = lo, a, b, mid
    cdef Py_ssize_t j, it
    with nogil:
        for j in range(k):
            a = left
            b = hi
            it = 0
            while b - a > abstol and it < maxiter:
                mid = 0.5 * (a + b)
                if _count(d, e2, mid, pivmin) > j:
                    b = mid
                else:
                    a = mid
                it += 1
            if b - a > abstol:
                converged = False
            out[j] = 0.5 * (a + b)
            left = a
    return values, bool(converged)


def solve_tridiagonal(sub, diag, sup, rhs):
    cdef double[::1] dl = np.array(sub, dtype=np.float64)
    cdef double[::1] d = np.array(diag, dtype=np.float64)
    cdef double[::1] du = np.array(sup, dtype=np.float64)
    result = np.array(rhs, dtype=np.float64)
    cdef double[::1] b = result
    cdef Py_ssize_t n = d.shape[0], i
    du2_arr = np.zeros(max(n - 2, 0))
    swap_arr = np.zeros(max(n - 1, 0), dtype=np.uint8)
    cdef double[::1] du2 = du2_arr
    cdef unsigned char[::1] swap = swap_arr
    cdef double fact, temp, tiny = 1e-300

    with nogil:
        for i in range(n - 1):
            if fabs(d[i]) >= fabs(dl[i]):
                if d[i] == 0.0:
                    d[i] = tiny
                fact = dl[i] / d[i]
                dl[i] = fact
                d[i + 1] -= fact * du[i]
            else:
                fact = d[i] / dl[i]
                d[i] = dl[i]
                dl[i] = fact
                temp = du[i]
                du[i] = d[i + 1]
                d[i + 1] = temp - fact * d[i + 1]
                if i < n - 2:
                    du2[i] = du[i + 1]
                    du[i + 1] = -fact * du[i + 1]
                swap[i] = 1
        if d[n - 1] == 0.0:
            d[n - 1] = tiny

        for i in range(n - 1):
            if swap[i]:
                temp = b[i] - dl[i] * b[i + 1]
                b[i] = b[i + 1]
                b[i + 1] = temp
            else:
                b[i + 1] -= dl[i] * b[i]

        b[n - 1] /= d[n - 1]
        if n > 1:
            b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2]
        i = n - 3
        while i >= 0:
            b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i]
            i -= 1
    return result
