"""Pure-Python versions of the tridiagonal kernels.

Same signatures and results as the compiled ``_kernels`` extension; used
when the extension is not built or ``SUSY_FIELDS_PURE_PYTHON=1`` is set.
"""

import numpy as np


def _pivmin(e2):
    return 1e-300 * max(1.0, max(e2, default=0.0))


def _count(d, e2, lam, pivmin):
    q = d[0] - lam
    if abs(q) < pivmin:
        q = -pivmin
    c = 1 if q < 0.0 else 0
    for i in range(1, len(d)):
        q = d[i] - lam - e2[i - 1] / q
        if abs(q) < pivmin:
            q = -pivmin
        if q < 0.0:
            c += 1
    return c


def sturm_count(diag, off, lam):
    """Number of eigenvalues strictly below ``lam``."""
    d = np.asarray(diag, dtype=float).tolist()
    e2 = (np.asarray(off, dtype=float) ** 2).tolist()
    return _count(d, e2, float(lam), _pivmin(e2))


def bisect_lowest(diag, off, k, abstol, maxiter):
    """The ``k`` smallest eigenvalues by Sturm-sequence bisection.

    Returns ``(values, converged)``; ``converged`` is False when any
    interval failed to shrink below ``abstol`` within ``maxiter`` halvings.
    """
    d = np.asarray(diag, dtype=float).tolist()
    e = np.asarray(off, dtype=float)
    e2 = (e**2).tolist()
    pivmin = _pivmin(e2)
    ae = np.abs(e)
    radius = np.zeros(len(d))
    radius[:-1] += ae
    radius[1:] += ae
    lo = float(np.min(np.asarray(d) - radius))
    hi = float(np.max(np.asarray(d) + radius))
    span = max(abs(lo), abs(hi), 1.0)
    lo -= 2.2e-16 * span + pivmin
    hi += 2.2e-16 * span + pivmin

    values = np.empty(k)
    converged = True
    left = lo
    for j in range(k):
        a, b = left, hi
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
        values[j] = 0.5 * (a + b)
        left = a
    return values, converged


def solve_tridiagonal(sub, diag, sup, rhs):
    """Solve a tridiagonal system by Gaussian elimination with partial pivoting."""
    dl = np.array(sub, dtype=float).tolist()
    d = np.array(diag, dtype=float).tolist()
    du = np.array(sup, dtype=float).tolist()
    b = np.array(rhs, dtype=float).tolist()
    n = len(d)
    du2 = [0.0] * max(n - 2, 0)
    swap = [False] * max(n - 1, 0)
    tiny = 1e-300

    for i in range(n - 1):
        if abs(d[i]) >= abs(dl[i]):
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
            swap[i] = True
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
    for i in range(n - 3, -1, -1):
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i]
    return np.array(b)
