"""Grids, sampled fields, stencils, quadrature, the error function and a
tridiagonal eigensolver.

Everything downstream is expressed in terms of :class:`ScalarField`, a set
of real samples on a uniform :class:`Grid1D` plus a boolean mask marking
nodes excluded from norms (near singular points, below charge floors, ...).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from ._backend import kernels
from .errors import InvalidArgumentError, NumericalFailureError

SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on ``[x_min, x_max]``.

    With ``shifted`` set the nodes sit at cell centres,
    ``x_min + (k + 1/2) h`` with ``h = (x_max - x_min) / (n - 1/2)``, so the
    last node is ``x_max`` and the first is ``x_min + h/2``; this keeps
    ``x = 0`` off the grid when it is an endpoint or interior point.
    """

    x_min: float
    x_max: float
    n: int
    shifted: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise InvalidArgumentError("grid bounds must be finite")
        if not self.x_min < self.x_max:
            raise InvalidArgumentError("grid requires x_min < x_max")
        if int(self.n) != self.n or self.n < 3:
            raise InvalidArgumentError(f"grid needs at least 3 nodes, got {self.n}")

    @property
    def h(self) -> float:
        span = self.x_max - self.x_min
        return span / (self.n - 0.5) if self.shifted else span / (self.n - 1)

    @cached_property
    def x(self) -> np.ndarray:
        k = np.arange(self.n, dtype=float)
        if self.shifted:
            k += 0.5
        nodes = self.x_min + k * self.h
        nodes.setflags(write=False)
        return nodes

    def index_of(self, x: float) -> int:
        """Index of the node nearest to ``x``."""
        return int(np.argmin(np.abs(self.x - x)))

    def restrict(self, start: int, stop: int) -> "Grid1D":
        """Sub-grid holding nodes ``start .. stop - 1``."""
        if not 0 <= start < stop <= self.n or stop - start < 3:
            raise InvalidArgumentError("restriction must keep at least 3 nodes")
        return Grid1D(float(self.x[start]), float(self.x[stop - 1]), stop - start)

    def summary(self) -> dict:
        return {"xmin": float(self.x[0]), "xmax": float(self.x[-1]), "n": int(self.n)}


def build_grid(x_min: float, x_max: float, n: int, avoid_origin: bool = False) -> Grid1D:
    """Uniform grid; with ``avoid_origin`` the nodes are shifted by half a
    cell whenever 0 lies in ``[x_min, x_max]``."""
    try:
        x_min, x_max = float(x_min), float(x_max)
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError("grid bounds must be real numbers") from exc
    shifted = bool(avoid_origin) and x_min <= 0.0 <= x_max
    grid = Grid1D(x_min, x_max, n, shifted)
    if shifted and np.any(grid.x == 0.0):
        raise InvalidArgumentError("cannot place a shifted grid that avoids x = 0")
    return grid


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Samples of a real function on a grid.

    ``mask`` marks excluded nodes; their ``values`` are unspecified (often
    NaN or inf) and never enter norms.
    """

    grid: Grid1D
    values: np.ndarray
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise InvalidArgumentError(
                f"field has {values.shape} samples, grid has {self.grid.n} nodes"
            )
        mask = (
            np.zeros(self.grid.n, dtype=bool)
            if self.mask is None
            else np.asarray(self.mask, dtype=bool).copy()
        )
        if mask.shape != values.shape:
            raise InvalidArgumentError("mask shape does not match values")
        mask |= ~np.isfinite(values)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_function(cls, grid: Grid1D, func, mask=None) -> "ScalarField":
        with np.errstate(all="ignore"):
            return cls(grid, np.asarray(func(grid.x), dtype=float) * np.ones(grid.n), mask)

    @classmethod
    def constant(cls, grid: Grid1D, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.n, float(value)))

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def valid(self) -> np.ndarray:
        return ~self.mask

    def with_values(self, values, extra_mask=None) -> "ScalarField":
        mask = self.mask if extra_mask is None else self.mask | np.asarray(extra_mask, bool)
        return ScalarField(self.grid, values, mask)

    def masked(self, extra_mask) -> "ScalarField":
        return ScalarField(self.grid, self.values, self.mask | np.asarray(extra_mask, bool))

    def filled(self, fill: float = 0.0) -> np.ndarray:
        out = self.values.copy()
        out[self.mask] = fill
        return out

    def restrict(self, start: int, stop: int) -> "ScalarField":
        return ScalarField(
            self.grid.restrict(start, stop), self.values[start:stop], self.mask[start:stop]
        )

    def at(self, x: float) -> float:
        """Value at the node nearest to ``x``."""
        return float(self.values[self.grid.index_of(x)])

    def _binary(self, other, op):
        with np.errstate(all="ignore"):
            if isinstance(other, ScalarField):
                if other.grid is not self.grid and other.grid != self.grid:
                    raise InvalidArgumentError("fields live on different grids")
                return ScalarField(self.grid, op(self.values, other.values), self.mask | other.mask)
            return ScalarField(self.grid, op(self.values, other), self.mask)

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, np.divide)

    def __rtruediv__(self, other):
        return self._binary(other, lambda a, b: b / a)

    def __pow__(self, p):
        return self._binary(p, np.power)

    def __neg__(self):
        return ScalarField(self.grid, -self.values, self.mask)

    def __abs__(self):
        return ScalarField(self.grid, np.abs(self.values), self.mask)


@dataclass(frozen=True, eq=False)
class TridiagonalOperator:
    """Symmetric tridiagonal matrix for ``-d2/dx2 + V`` with Dirichlet ends."""

    diag: np.ndarray
    offdiag: np.ndarray
    grid: Grid1D

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=float)
        off = np.asarray(self.offdiag, dtype=float)
        if diag.shape != (self.grid.n,) or off.shape != (self.grid.n - 1,):
            raise InvalidArgumentError("operator arrays do not match the grid")
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "offdiag", off)

    def matvec(self, f) -> np.ndarray:
        v = f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=float)
        out = self.diag * v
        out[:-1] += self.offdiag * v[1:]
        out[1:] += self.offdiag * v[:-1]
        return out

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


# ---------------------------------------------------------------------------
# differentiation and quadrature


def _dilate(mask: np.ndarray, order: int) -> np.ndarray:
    out = mask.copy()
    out[1:] |= mask[:-1]
    out[:-1] |= mask[1:]
    width = 3 if order == 1 else 4
    if mask[:width].any():
        out[0] = True
    if mask[-width:].any():
        out[-1] = True
    return out


def differentiate(f: ScalarField, order: int = 1) -> ScalarField:
    """Second-order finite-difference derivative (central inside, one-sided
    at the two end nodes)."""
    if order not in (1, 2):
        raise InvalidArgumentError(f"derivative order must be 1 or 2, got {order}")
    v, h, n = f.values, f.grid.h, f.grid.n
    if n < 3:
        raise InvalidArgumentError("differentiation needs at least 3 nodes")
    out = np.empty(n)
    with np.errstate(all="ignore"):
        if order == 1:
            out[1:-1] = (v[2:] - v[:-2]) / (2 * h)
            out[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
            out[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
        else:
            out[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2
            if n >= 4:
                out[0] = (2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / h**2
                out[-1] = (2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]) / h**2
            else:
                out[0] = out[-1] = out[1]
    return ScalarField(f.grid, out, _dilate(f.mask, order))


def _locate(grid: Grid1D, x0: float) -> float:
    x = grid.x
    tol = 1e-12 * (x[-1] - x[0])
    if x0 < x[0] - tol or x0 > x[-1] + tol:
        raise InvalidArgumentError(f"reference point {x0} lies outside the grid span")
    return min(max(x0, x[0]), x[-1])


def integrate_cumulative(
    f: ScalarField,
    x0: float | None = None,
    jumps: Iterable[tuple[float, float]] = (),
    df: ScalarField | None = None,
) -> ScalarField:
    """Cumulative trapezoidal integral ``F(x) = int_{x0}^{x} f dy``.

    ``x0`` defaults to the left end. Each ``(p, q)`` in ``jumps`` adds a
    step ``q`` at ``p`` so that ``F(x0) = 0`` still holds. When the
    derivative ``df`` of the integrand is supplied, the Euler-Maclaurin end
    correction ``-h^2/12 (f'(x) - f'(x0))`` is applied, raising the order
    of the rule from 2 to 4. Masked samples integrate as zero.
    """
    grid = f.grid
    x, h = grid.x, grid.h
    v = f.filled(0.0)
    cum = np.concatenate(([0.0], np.cumsum(0.5 * h * (v[1:] + v[:-1]))))
    if df is not None:
        dv = df.filled(0.0)
        cum -= h * h / 12.0 * (dv - dv[0])

    x0 = x[0] if x0 is None else _locate(grid, float(x0))
    j = min(int(np.floor((x0 - x[0]) / h)), grid.n - 2)
    t = x0 - x[j]
    if abs(t) <= 1e-12 * h:
        at_x0 = cum[j]
    elif abs(x[j + 1] - x0) <= 1e-12 * h:
        at_x0 = cum[j + 1]
    else:
        f0 = v[j] + (v[j + 1] - v[j]) * t / h
        at_x0 = cum[j] + 0.5 * t * (v[j] + f0)
        if df is not None:
            d0 = dv[j] + (dv[j + 1] - dv[j]) * t / h
            at_x0 -= h * h / 12.0 * (d0 - dv[0]) * (t / h)
    out = cum - at_x0

    for p, q in jumps:
        p = float(p)
        if p < x[0] or p > x[-1]:
            raise InvalidArgumentError(f"jump at {p} lies outside the grid span")
        out = out + q * ((x > p).astype(float) - float(x0 > p))
    return ScalarField(grid, out)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(6)


def _lagrange_rows(offsets: Sequence[float], points: np.ndarray) -> np.ndarray:
    """Cubic Lagrange weights: row ``i`` maps the 4 stencil values to ``points[i]``."""
    rows = np.ones((len(points), len(offsets)))
    for a, oa in enumerate(offsets):
        for b, ob in enumerate(offsets):
            if a != b:
                rows[:, a] *= (points - ob) / (oa - ob)
    return rows


def _cell_exp_integrals(g: np.ndarray, ok: np.ndarray, h: float, frac=None) -> np.ndarray:
    """``int exp(g)`` over each cell ``[x_j, x_j + frac_j h]`` (``frac`` = 1 by
    default), with ``g`` interpolated by a local cubic and integrated by
    6-point Gauss-Legendre. Cells touching invalid samples fall back to the
    trapezoid rule on ``exp(g)`` (zero where invalid)."""
    n = g.size
    cells = np.arange(n - 1)
    frac = np.ones(n - 1) if frac is None else np.asarray(frac, dtype=float)
    start = np.clip(cells - 1, 0, n - 4)
    offsets = np.arange(4)[None, :] + start[:, None]
    stencil = g[offsets]
    good = ok[offsets].all(axis=1)
    shift = cells - start
    out = np.zeros(n - 1)
    vals = np.zeros((n - 1, _GL_NODES.size))
    # weights depend only on the cell's place in its stencil and its length
    for o, fr in {(int(a), float(b)) for a, b in zip(shift[good], frac[good])}:
        sel = good & (shift == o) & (frac == fr)
        rows = _lagrange_rows(range(4), o + 0.5 * (_GL_NODES + 1.0) * fr)
        vals[sel] = stencil[sel] @ rows.T
    idx = np.flatnonzero(good)
    if idx.size:
        with np.errstate(under="ignore", over="ignore"):
            out[idx] = 0.5 * h * frac[idx] * (np.exp(vals[idx]) @ _GL_WEIGHTS)
    bad = np.flatnonzero(~good)
    if bad.size:
        with np.errstate(under="ignore", over="ignore"):
            e = np.where(ok, np.exp(np.where(ok, g, 0.0)), 0.0)
        # linear interpolation inside the (partial) cell
        end = e[bad] + (e[bad + 1] - e[bad]) * frac[bad]
        out[bad] = 0.5 * h * frac[bad] * (e[bad] + end)
    return out


def integrate_exp_cumulative(log_f: ScalarField, x0: float | None = None) -> ScalarField:
    """Cumulative integral ``int_{x0}^x exp(log_f)`` computed in log space.

    Accurate to relative precision where ``exp(log_f)`` spans many orders
    of magnitude; exact up to Gauss-Legendre error when ``log_f`` is a
    polynomial of degree three or less.
    """
    grid = log_f.grid
    if grid.n < 4:
        raise InvalidArgumentError("log-space integration needs at least 4 nodes")
    g = log_f.values
    ok = log_f.valid & np.isfinite(g)
    if not ok.any():
        return ScalarField(grid, np.zeros(grid.n))
    shift = float(np.max(g[ok]))
    gs = np.where(ok, g - shift, -np.inf)
    cells = _cell_exp_integrals(gs, ok, grid.h)
    x, h = grid.x, grid.h
    x0 = x[0] if x0 is None else _locate(grid, float(x0))
    j = min(int(np.floor((x0 - x[0]) / h)), grid.n - 2)
    t = (x0 - x[j]) / h
    if t >= 1.0 - 1e-12:
        j, t = j + 1, 0.0
    # sum outward from the anchor node so no value is a difference of large sums
    out = np.zeros(grid.n)
    out[j + 1:] = np.cumsum(cells[j:])
    out[:j] = -np.cumsum(cells[:j][::-1])[::-1]
    if t > 1e-12:
        frac = np.ones(grid.n - 1)
        frac[j] = t
        out -= _cell_exp_integrals(gs, ok, h, frac)[j]
    with np.errstate(over="ignore"):
        return ScalarField(grid, out * math.exp(shift))


def _one_sided(g: np.ndarray, h: float) -> tuple[float, float]:
    """First and second derivative at ``g[0]`` from forward stencils."""
    d1 = (-3 * g[0] + 4 * g[1] - g[2]) / (2 * h)
    d2 = (2 * g[0] - 5 * g[1] + 4 * g[2] - g[3]) / h**2
    return d1, d2


def end_integral(log_f: ScalarField, side: str, extent: float = math.inf) -> float:
    """Integral of ``exp(log_f)`` over the stretch beyond one grid end.

    The log is extended by its quadratic Taylor polynomial at the end node:
    ``log f(a +- t) ~ g0 - s t + c2 t^2/2`` with ``s`` the outward decay
    rate. An infinite ``extent`` uses the closed form in terms of the scaled
    complementary error function; a finite one uses Gauss-Legendre.
    Returns 0 when the end sample has underflowed (masked or -inf).
    """
    if side not in ("left", "right"):
        raise InvalidArgumentError("side must be 'left' or 'right'")
    g = log_f.values if side == "left" else log_f.values[::-1]
    m = log_f.mask if side == "left" else log_f.mask[::-1]
    if m[0] or not np.isfinite(g[0]):
        return 0.0
    if m[:4].any() or log_f.grid.n < 4:
        raise InvalidArgumentError("end-piece extrapolation needs 4 valid end samples")
    h = log_f.grid.h
    d1, c2 = _one_sided(g, h)
    # curvature indistinguishable from rounding noise in the stencil
    if abs(c2) <= 64.0 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(g[:4])))) / h**2:
        c2 = 0.0
    # stencil is taken inward; outward decay rate for both sides
    s = d1
    if extent <= 0:
        return 0.0
    scale = math.exp(g[0])
    if math.isinf(extent):
        c = -0.5 * c2
        if c > 1e-14 * max(s * s, 1.0):
            z = s / (2.0 * math.sqrt(c))
            return scale * math.sqrt(math.pi / (4.0 * c)) * float(erfcx_eval(z))
        if s <= 0 or c2 / (s * s) > 0.25:
            raise InvalidArgumentError(f"log-density does not decay beyond the {side} end")
        return scale * (1.0 / s + c2 / s**3)
    nodes, weights = np.polynomial.legendre.leggauss(24)
    t = 0.5 * extent * (nodes + 1.0)
    return scale * 0.5 * extent * float(np.sum(weights * np.exp(-s * t + 0.5 * c2 * t * t)))


# ---------------------------------------------------------------------------
# error function family

_ERF_SWITCH = 3.0
_CF_TERMS = 90


def _erf_series(x: np.ndarray) -> np.ndarray:
    # erf x = 2/sqrt(pi) e^{-x^2} sum 2^n x^{2n+1} / (2n+1)!!, all terms positive
    term = x.copy()
    total = x.copy()
    x2 = x * x
    for n in range(200):
        term = term * 2.0 * x2 / (2 * n + 3)
        total += term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return 2.0 / SQRT_PI * np.exp(-x2) * total


def _erfcx_cf(x: np.ndarray) -> np.ndarray:
    # e^{x^2} erfc x = 1/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))), x >= 3
    t = x.copy()
    for k in range(_CF_TERMS, 0, -1):
        t = x + 0.5 * k / t
    return 1.0 / (SQRT_PI * t)


def erf_eval(x):
    """Error function; series below |x| = 3, continued fraction above."""
    xa = np.asarray(x, dtype=float)
    a = np.abs(np.atleast_1d(xa))
    out = np.empty_like(a)
    small = a < _ERF_SWITCH
    out[small] = _erf_series(a[small])
    big = ~small & np.isfinite(a)
    out[big] = 1.0 - np.exp(-a[big] ** 2) * _erfcx_cf(a[big])
    out[np.isinf(a)] = 1.0
    out = np.copysign(out, np.atleast_1d(xa))
    return out.reshape(xa.shape) if xa.ndim else float(out[0])


def erfc_eval(x):
    """Complementary error function without cancellation for large ``x``."""
    xa = np.asarray(x, dtype=float)
    v = np.atleast_1d(xa)
    out = np.empty_like(v)
    hi = v >= _ERF_SWITCH
    out[hi] = np.exp(-v[hi] ** 2) * _erfcx_cf(v[hi])
    lo = v <= -_ERF_SWITCH
    out[lo] = 2.0 - np.exp(-v[lo] ** 2) * _erfcx_cf(-v[lo])
    mid = ~hi & ~lo
    out[mid] = 1.0 - np.atleast_1d(erf_eval(v[mid]))
    return out.reshape(xa.shape) if xa.ndim else float(out[0])


def erfcx_eval(x):
    """Scaled complement ``exp(x^2) erfc(x)``; overflows to inf for x below about -26."""
    xa = np.asarray(x, dtype=float)
    v = np.atleast_1d(xa)
    out = np.empty_like(v)
    hi = v >= _ERF_SWITCH
    out[hi] = _erfcx_cf(v[hi])
    with np.errstate(over="ignore"):
        out[~hi] = np.exp(v[~hi] ** 2) * np.atleast_1d(erfc_eval(v[~hi]))
    return out.reshape(xa.shape) if xa.ndim else float(out[0])


# ---------------------------------------------------------------------------
# eigenpairs


def grid_inner(a, b, h: float) -> float:
    return float(np.dot(a, b) * h)


def lowest_eigenpairs(
    op: TridiagonalOperator, k: int, *, maxiter: int = 200
) -> list[tuple[float, ScalarField]]:
    """The ``k`` smallest eigenpairs of a symmetric tridiagonal operator.

    Eigenvalues come from Sturm-sequence bisection, eigenvectors from
    inverse iteration with a deterministic start vector. Vectors are
    normalised to ``sum(psi^2) h = 1`` and signed so that the first
    non-negligible sample is positive.
    """
    n = op.grid.n
    if int(k) != k or not 1 <= k <= n // 4:
        raise InvalidArgumentError(f"k must lie in [1, {n // 4}], got {k}")
    d, e, h = op.diag, op.offdiag, op.grid.h
    span = float(np.max(np.abs(d)) + 2 * np.max(np.abs(e), initial=0.0))
    abstol = 4 * np.finfo(float).eps * max(span, 1.0)
    values, ok = kernels.bisect_lowest(d, e, int(k), abstol, maxiter)
    if not ok:
        raise NumericalFailureError("Sturm bisection did not converge")

    pairs = []
    vectors: list[np.ndarray] = []
    for j, lam in enumerate(values):
        rng = np.random.default_rng(1009 + j)
        v = rng.uniform(0.5, 1.5, n)
        v /= np.linalg.norm(v)
        for _ in range(4):
            y = kernels.solve_tridiagonal(e, d - lam, e, v)
            for prev in vectors:
                y -= np.dot(prev, y) * prev
            norm = np.linalg.norm(y)
            if not np.isfinite(norm) or norm == 0.0:
                raise NumericalFailureError(f"inverse iteration failed for level {j}")
            v = y / norm
        vectors.append(v)
        psi = v / math.sqrt(h)
        lead = np.flatnonzero(np.abs(psi) > 1e-3 * np.max(np.abs(psi)))[0]
        if psi[lead] < 0:
            psi = -psi
        pairs.append((float(lam), ScalarField(op.grid, psi)))
    return pairs


# ---------------------------------------------------------------------------
# tail probing


def window_integrals(f: ScalarField, side: str, windows: int = 8) -> np.ndarray:
    """Integrals of ``|f|^2`` over nested windows reaching toward one end.

    Window ``j`` runs from the domain midpoint to the point a fraction
    ``j/windows`` of the way from the midpoint to the chosen end.
    """
    if side not in ("left", "right"):
        raise InvalidArgumentError("side must be 'left' or 'right'")
    x, h = f.grid.x, f.grid.h
    v = f.filled(0.0) ** 2
    mid = f.grid.n // 2
    if side == "left":
        v = v[: mid + 1][::-1]
    else:
        v = v[mid:]
    cum = np.concatenate(([0.0], np.cumsum(0.5 * h * (v[1:] + v[:-1]))))
    stops = [int(round(j * (len(v) - 1) / windows)) for j in range(1, windows + 1)]
    return cum[stops]


def is_divergent(integrals: Sequence[float], ratio: float = 1.5) -> bool:
    """True if the last three window integrals grow strictly, each by at
    least ``ratio``."""
    a, b, c = (float(v) for v in integrals[-3:])
    if not (np.isfinite(a) and np.isfinite(b)):
        return True
    if not np.isfinite(c):
        return b > a
    return a > 0 and b >= ratio * a and c >= ratio * b
