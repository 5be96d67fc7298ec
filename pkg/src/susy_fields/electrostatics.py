"""Charge densities, the two electric-field branches, potentials, and the
map from a confluent kernel back to a charge density.

With ``eta = E/phi0`` the field obeys ``eta' = eta^2 + 2 beta eta`` and
``rho = eps phi0 eta'``. Given ``rho`` and the cumulative charge ``q``,
``beta = (rho/q - q/(eps phi0))/2`` and the two algebraic roots are::

    E+ = q/eps,    E- = -phi0 rho / q

Only ``E+`` also solves the differential equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DegenerateDensityError,
    InvalidArgumentError,
    InvalidKernelError,
    NodelessViolationError,
)
from .numerics import (
    Grid1D,
    ScalarField,
    differentiate,
    end_integral,
    integrate_cumulative,
    integrate_exp_cumulative,
)
from .susy_core import (
    ConfluentKernel,
    SeedData,
    SusyPair,
    build_confluent_kernel,
    confluent_partners,
    log_norm,
)

Q_FLOOR = 1e-12
EXP_LIMIT = 700.0
SQ_NEG_TOL = 1e-8
SQ_FLAG_FRACTION = 0.01


# ---------------------------------------------------------------------------
# smooth density descriptors


@dataclass(frozen=True)
class ConstantSlab:
    """``rho0`` on ``[-d, d]``, zero outside."""

    rho0: float
    d: float = math.inf

    def rho(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= self.d, self.rho0, 0.0)

    def drho(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    @property
    def support(self):
        return (-self.d, self.d)

    @property
    def breakpoints(self):
        return (-self.d, self.d) if math.isfinite(self.d) else ()


@dataclass(frozen=True)
class GaussianSheet:
    """Total charge ``sigma`` spread as a Gaussian of width ``s`` about ``center``."""

    sigma: float
    s: float
    center: float = 0.0

    def __post_init__(self):
        if not self.s > 0:
            raise InvalidArgumentError("Gaussian width s must be positive")

    def rho(self, x):
        z = (np.asarray(x, dtype=float) - self.center) / self.s
        return self.sigma / (self.s * math.sqrt(2.0 * math.pi)) * np.exp(-0.5 * z * z)

    def drho(self, x):
        z = (np.asarray(x, dtype=float) - self.center) / self.s
        return -z / self.s * self.rho(x)

    @property
    def support(self):
        return (self.center - 40.0 * self.s, self.center + 40.0 * self.s)

    breakpoints = ()


@dataclass(frozen=True, eq=False)
class TabulatedDensity:
    """Linear interpolation of samples; zero outside the table."""

    x: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != v.shape or x.size < 2:
            raise InvalidArgumentError("tabulated density needs matching 1-D x and rho arrays")
        if np.any(np.diff(x) <= 0):
            raise InvalidArgumentError("tabulated x must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", v)

    def rho(self, x):
        return np.interp(np.asarray(x, dtype=float), self.x, self.values, left=0.0, right=0.0)

    drho = None

    @property
    def support(self):
        return (float(self.x[0]), float(self.x[-1]))

    @property
    def breakpoints(self):
        return tuple(self.x.tolist())


@dataclass(frozen=True, eq=False)
class AnalyticDensity:
    """Density given by a vectorised callable, optionally with its derivative."""

    func: Callable
    dfunc: Callable | None = None
    support: tuple = (-math.inf, math.inf)
    breakpoints: tuple = ()

    def rho(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    @property
    def drho(self):
        if self.dfunc is None:
            return None
        return lambda x: np.asarray(self.dfunc(np.asarray(x, dtype=float)), dtype=float)


@dataclass(frozen=True, eq=False)
class DensityModel:
    """Charge density in a linear medium.

    ``reference`` chooses the point ``r`` from which the cumulative charge
    is measured: ``"left"``/``"right"`` use the domain edge (or, for an
    infinite edge, the end of the density's support or the grid end),
    ``"center"`` uses the origin.
    """

    smooth: object | None = None
    point_charges: Sequence[tuple[float, float]] = ()
    epsilon: float = 1.0
    phi0: float = 1.0
    domain: tuple[float, float] = (-math.inf, math.inf)
    reference: str = "left"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidArgumentError("epsilon must be positive")
        if self.phi0 == 0 or not math.isfinite(self.phi0):
            raise InvalidArgumentError("phi0 must be finite and nonzero")
        lo, hi = self.domain
        if not lo < hi:
            raise InvalidArgumentError("domain must satisfy x_min < x_max")
        for p, _ in self.point_charges:
            if not lo <= p <= hi:
                raise InvalidArgumentError(f"point charge at {p} lies outside the domain")
        if self.reference not in ("left", "right", "center"):
            raise InvalidArgumentError("reference must be 'left', 'right' or 'center'")
        object.__setattr__(self, "point_charges", tuple((float(p), float(s)) for p, s in self.point_charges))

    def rho(self, x) -> np.ndarray:
        if self.smooth is None:
            return np.zeros_like(np.asarray(x, dtype=float))
        return self.smooth.rho(x)

    def drho_function(self):
        if self.smooth is None:
            return lambda x: np.zeros_like(np.asarray(x, dtype=float))
        return getattr(self.smooth, "drho", None)

    def reference_point(self, grid: Grid1D) -> float:
        lo, hi = self.domain
        support = getattr(self.smooth, "support", (-math.inf, math.inf)) if self.smooth else (0.0, 0.0)
        if self.reference == "center":
            return 0.0
        if self.reference == "left":
            if math.isfinite(lo):
                return lo
            edge = min(support[0], grid.x[0], *(p for p, _ in self.point_charges)) \
                if self.point_charges else min(support[0], grid.x[0])
            return edge if math.isfinite(edge) else float(grid.x[0])
        if math.isfinite(hi):
            return hi
        edge = max(support[1], grid.x[-1], *(p for p, _ in self.point_charges)) \
            if self.point_charges else max(support[1], grid.x[-1])
        return edge if math.isfinite(edge) else float(grid.x[-1])


@dataclass(frozen=True, eq=False)
class FieldSolutionPair:
    e_plus: ScalarField
    e_minus: ScalarField
    q: ScalarField
    beta: ScalarField
    rho: ScalarField
    dbeta: ScalarField | None = None


def _gauss_integral(func, a: float, b: float, breaks=(), panels: int = 32) -> float:
    """Composite 16-point Gauss-Legendre integral of ``func`` over ``[a, b]``."""
    if a == b:
        return 0.0
    sign = 1.0
    if a > b:
        a, b, sign = b, a, -1.0
    cuts = [a] + sorted(p for p in breaks if a < p < b) + [b]
    nodes, weights = np.polynomial.legendre.leggauss(16)
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        edges = np.linspace(lo, hi, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        pts = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
        vals = np.asarray(func(pts), dtype=float).reshape(panels, 16)
        total += float(np.sum(half * (vals @ weights)))
    return sign * total


def cumulative_charge(model: DensityModel, grid: Grid1D) -> ScalarField:
    """``q(x) = int_r^x rho + sum of point charges between r and x``."""
    x = grid.x
    r = model.reference_point(grid)
    rho = ScalarField(grid, model.rho(x))
    drho_fn = model.drho_function()
    drho = ScalarField(grid, drho_fn(x)) if drho_fn is not None else None
    breaks = getattr(model.smooth, "breakpoints", ()) if model.smooth else ()
    if not breaks and _single_signed(rho.values):
        base = _log_space_charge(model, grid, r, rho.values)
    elif r < x[0]:
        base = integrate_cumulative(rho, df=drho).values
        base = base + _gauss_integral(model.rho, r, x[0], breaks)
    elif r > x[-1]:
        base = integrate_cumulative(rho, x[-1], df=drho).values
        base = base - _gauss_integral(model.rho, x[-1], r, breaks)
    else:
        base = integrate_cumulative(rho, r, df=drho).values
    base = base + _kink_corrections(model, grid, r, rho, drho, breaks)
    for p, sigma in model.point_charges:
        base = base + sigma * ((x > p).astype(float) - float(r > p))
    return ScalarField(grid, base)


def _single_signed(v: np.ndarray) -> bool:
    nz = v[v != 0.0]
    return nz.size >= 4 and (bool(np.all(nz > 0)) or bool(np.all(nz < 0)))


def _log_space_charge(model, grid, r, v) -> np.ndarray:
    # a single-signed density is integrated through ln|rho| so that q keeps
    # relative accuracy in the tails, where E- = -phi0 rho/q is sensitive
    x = grid.x
    sign = 1.0 if np.any(v > 0) else -1.0
    with np.errstate(divide="ignore"):
        log_rho = ScalarField(grid, np.log(np.abs(v)))
    anchor = min(max(r, x[0]), x[-1])
    base = sign * integrate_exp_cumulative(log_rho, anchor).values
    if r < x[0]:
        base = base + _gauss_integral(model.rho, r, x[0])
    elif r > x[-1]:
        base = base - _gauss_integral(model.rho, x[-1], r)
    return base


def _kink_corrections(model, grid, r, rho, drho, breaks) -> np.ndarray:
    # the trapezoid rule is only first order across a jump or kink of rho;
    # replace the affected cells by a Gauss-Legendre integral split at the kink
    x, h = grid.x, grid.h
    out = np.zeros(grid.n)
    v = rho.values
    dv = drho.values if drho is not None else None
    cells = set()
    for b in breaks:
        if not (x[0] <= b <= x[-1]):
            continue
        k = int(round((b - x[0]) / h))
        if abs(b - x[k]) <= 1e-9 * h:
            # a jump sitting on a node spoils both neighbouring cells
            cells.update(j for j in (k - 1, k) if 0 <= j < grid.n - 1)
        else:
            cells.add(min(int((b - x[0]) // h), grid.n - 2))
    for j in sorted(cells):
        exact = _gauss_integral(model.rho, x[j], x[j + 1], breaks, panels=1)
        rule = 0.5 * h * (v[j] + v[j + 1])
        if dv is not None:
            rule -= h * h / 12.0 * (dv[j + 1] - dv[j])
        c = exact - rule
        out[j + 1:] += c
        if r >= x[j + 1]:
            out -= c
    return out


def beta_from_density(model: DensityModel, grid: Grid1D):
    """``beta = (rho/q - q/(eps phi0))/2`` and the cumulative charge ``q``.

    Nodes with ``|q|`` below ``Q_FLOOR * max|q|`` are masked in ``beta``.
    """
    q = cumulative_charge(model, grid)
    qmax = float(np.max(np.abs(q.values)))
    if qmax == 0.0:
        raise DegenerateDensityError("cumulative charge vanishes identically")
    low = np.abs(q.values) < Q_FLOOR * qmax
    rho = model.rho(grid.x)
    k = model.epsilon * model.phi0
    with np.errstate(all="ignore"):
        beta = 0.5 * (rho / q.values - q.values / k)
    return ScalarField(grid, beta, low), q


def _dbeta(model: DensityModel, grid: Grid1D, beta: ScalarField, q: ScalarField) -> ScalarField:
    # beta' = (rho'/q - (rho/q)^2 - rho/(eps phi0)) / 2, exact when rho' is known
    drho_fn = model.drho_function()
    if drho_fn is None:
        return differentiate(beta, 1)
    rho = model.rho(grid.x)
    k = model.epsilon * model.phi0
    with np.errstate(all="ignore"):
        ratio = rho / q.values
        vals = 0.5 * (drho_fn(grid.x) / q.values - ratio * ratio - rho / k)
    return ScalarField(grid, vals, beta.mask)


def fields_from_density(model: DensityModel, grid: Grid1D) -> FieldSolutionPair:
    beta, q = beta_from_density(model, grid)
    rho = model.rho(grid.x)
    e_plus = q * (1.0 / model.epsilon)
    with np.errstate(all="ignore"):
        e_minus = ScalarField(grid, -model.phi0 * rho / q.values, beta.mask)
    return FieldSolutionPair(e_plus, e_minus, q, beta, ScalarField(grid, rho),
                             _dbeta(model, grid, beta, q))


def potential_from_field(e: ScalarField, x_ref: float) -> ScalarField:
    """``phi(x) = -int_{x_ref}^x E``; ``x_ref`` may sit just outside the grid,
    in which case ``E`` is extrapolated linearly over the gap."""
    grid = e.grid
    x, h = grid.x, grid.h
    v = e.filled(0.0)
    if x[0] <= x_ref <= x[-1]:
        integral = integrate_cumulative(e, x_ref)
        return ScalarField(grid, -integral.values, e.mask)
    if x_ref < x[0]:
        gap = x[0] - x_ref
        e_ref = v[0] - (v[1] - v[0]) * gap / h
        head = 0.5 * gap * (v[0] + e_ref)
        return ScalarField(grid, -(integrate_cumulative(e).values + head), e.mask)
    gap = x_ref - x[-1]
    e_ref = v[-1] + (v[-1] - v[-2]) * gap / h
    head = 0.5 * gap * (v[-1] + e_ref)
    return ScalarField(grid, -(integrate_cumulative(e, x[-1]).values - head), e.mask)


def w_from_potential(phi: ScalarField, phi0: float, A: float) -> ScalarField:
    """``w = A exp(phi/phi0)``; nodes with ``|phi/phi0| > 700`` are masked."""
    if A == 0:
        raise InvalidArgumentError("A must be nonzero")
    z = phi.values / phi0
    over = np.abs(z) > EXP_LIMIT
    with np.errstate(over="ignore", under="ignore"):
        vals = A * np.exp(np.where(over, 0.0, z))
    return ScalarField(phi.grid, vals, phi.mask | over)


def _flag_negative(u2: np.ndarray, mask: np.ndarray) -> np.ndarray:
    scale = float(np.max(np.abs(u2[~mask]))) if (~mask).any() else 0.0
    return (u2 < -SQ_NEG_TOL * max(scale, 1e-300)) & ~mask


def seed_sq_from_w(w: ScalarField) -> ScalarField:
    """``u^2 = -w'``, evaluated as ``-w (ln|w|)'`` to keep relative accuracy
    where ``w`` is exponentially small.

    Raises :class:`InvalidKernelError` when more than 1% of the nodes show
    ``w`` increasing; fewer offending nodes are masked.
    """
    with np.errstate(divide="ignore"):
        logw = w.with_values(np.log(np.abs(w.values)))
    u2 = -(w * differentiate(logw, 1))
    bad = _flag_negative(u2.values, u2.mask)
    if bad.sum() > SQ_FLAG_FRACTION * w.grid.n:
        k = int(np.flatnonzero(bad)[0])
        raise InvalidKernelError(
            f"w increases on {int(bad.sum())} nodes (first near x = {w.x[k]:.6g})"
        )
    return u2.masked(bad)


def seed_from_w(w: ScalarField, epsilon: float = 0.0) -> SeedData:
    """Seed whose ``u^2 = -w'``, returned in log form.

    Sign-consistent nodes only; zero nodes of ``u^2`` map to ``-inf``.
    """
    u2 = seed_sq_from_w(w)
    vals = u2.values[u2.valid]
    sign = -1 if np.sum(vals < 0) > np.sum(vals > 0) else 1
    with np.errstate(divide="ignore", invalid="ignore"):
        log_u2 = np.log(sign * u2.values)
    wrong = (sign * u2.values < 0) & u2.valid
    return SeedData(ScalarField(w.grid, log_u2, u2.mask | wrong), sign, epsilon, False)


def density_from_kernel(kernel: ConfluentKernel, epsilon: float, phi0: float) -> ScalarField:
    """``rho = eps phi0 eta'``."""
    return kernel.deta * (epsilon * phi0)


def field_from_kernel(kernel: ConfluentKernel, phi0: float) -> ScalarField:
    """``E = phi0 eta``."""
    return kernel.eta * phi0


def fields_from_kernel(kernel: ConfluentKernel, epsilon: float, phi0: float) -> FieldSolutionPair:
    """Field pair implied by a kernel: ``q = eps phi0 eta`` plays the
    cumulative charge, so ``E+ = phi0 eta``."""
    k = epsilon * phi0
    rho = density_from_kernel(kernel, epsilon, phi0)
    q = kernel.eta * k
    qmax = float(np.max(np.abs(q.values[q.valid]))) if q.valid.any() else 0.0
    low = np.abs(q.values) < Q_FLOOR * max(qmax, 1e-300)
    with np.errstate(all="ignore"):
        e_minus = ScalarField(kernel.grid, -phi0 * rho.values / q.values, rho.mask | low)
    return FieldSolutionPair(q * (1.0 / epsilon), e_minus, q, kernel.beta, rho)


# ---------------------------------------------------------------------------
# density -> SUSY pipeline


@dataclass(frozen=True, eq=False)
class DensityPipeline:
    model: DensityModel
    fields: FieldSolutionPair
    phi: ScalarField
    w_field: ScalarField
    seed: SeedData
    kernel: ConfluentKernel
    pair: SusyPair
    amplitude: float
    notes: list = field(default_factory=list)


def _decays(log_f: ScalarField, side: str) -> bool:
    try:
        val = end_integral(log_f, side)
    except Exception:
        return False
    return math.isfinite(val)


def _sign_change(values: np.ndarray, valid: np.ndarray, x: np.ndarray) -> float | None:
    s = np.sign(values[valid])
    s = s[s != 0]
    if s.size == 0 or np.all(s == s[0]):
        return None
    xs = x[valid][np.sign(values[valid]) != 0]
    k = int(np.flatnonzero(s[1:] != s[:-1])[0])
    return float(0.5 * (xs[k] + xs[k + 1]))


def kernel_for_field(
    seed: SeedData, w_field: ScalarField, domain: tuple[float, float]
) -> ConfluentKernel:
    """Confluent kernel reproducing ``w_field`` from ``seed``.

    Where ``w`` dies out toward an infinite domain end and the seed is
    integrable there, the kernel is anchored at that infinity with
    ``w0 = 0``; otherwise at the grid end with the smaller ``|w|``.
    """
    v = np.abs(w_field.values)
    ok = w_field.valid
    wmax = float(np.max(v[ok]))
    ends = {"left": 0, "right": -1}
    inf_x = {"left": -math.inf, "right": math.inf}
    edge = {"left": domain[0], "right": domain[1]}
    for side in ("left", "right"):
        k = ends[side]
        if math.isinf(edge[side]) and ok[k] and v[k] < 1e-3 * wmax and _decays(seed.log_u2, side):
            return build_confluent_kernel(seed, 0.0, inf_x[side])
    k = 0 if (v[0] if ok[0] else math.inf) <= (v[-1] if ok[-1] else math.inf) else -1
    return build_confluent_kernel(seed, float(w_field.values[k]), float(w_field.x[k]))


def solve_density(model: DensityModel, grid: Grid1D, energy: float = 0.0) -> DensityPipeline:
    """Charge density to field pair, potential, seed, confluent kernel and
    SUSY partner potentials.

    The seed follows from ``u^2 = eta+ w`` with ``w = A exp(phi/phi0)``;
    ``A`` normalises ``u^2`` when it is integrable over the domain and is
    ``1`` otherwise.
    """
    fields = fields_from_density(model, grid)
    eta = fields.e_plus * (1.0 / model.phi0)
    where = _sign_change(eta.values, fields.beta.valid, grid.x)
    if where is not None:
        raise NodelessViolationError(
            f"cumulative charge changes sign near x = {where:.6g}; the seed would have a node",
            location=where,
        )
    r = model.reference_point(grid)
    phi = potential_from_field(fields.e_plus, r)
    eta_sign = 1 if np.sum(eta.values[fields.beta.valid] > 0) >= np.sum(eta.values[fields.beta.valid] < 0) else -1
    with np.errstate(divide="ignore"):
        log_abs_eta = np.log(np.abs(eta.values))
    log_u2 = ScalarField(grid, log_abs_eta + phi.values / model.phi0, fields.beta.mask)

    notes = []
    lo, hi = model.domain
    normalizable = all(
        _decays(log_u2, side) or math.isfinite(edge) for side, edge in (("left", lo), ("right", hi))
    )
    log_n = 0.0
    if normalizable:
        try:
            log_n = log_norm(log_u2, (min(lo, grid.x[0]), max(hi, grid.x[-1])))
        except InvalidArgumentError:
            normalizable = False
            log_n = 0.0
    if not normalizable:
        notes.append("seed is not square-integrable; A = 1")
    # u^2 = eta+ A exp(phi/phi0): a normalisable seed is made positive through A
    amplitude = eta_sign * math.exp(-log_n) if normalizable else 1.0
    sign_u2 = 1 if normalizable else eta_sign
    seed = SeedData(log_u2 - log_n, sign_u2, energy, normalizable, fields.beta, fields.dbeta)
    w_field = w_from_potential(phi, model.phi0, amplitude)
    kernel = kernel_for_field(seed, w_field, model.domain)
    pair = confluent_partners(seed, kernel)
    return DensityPipeline(model, fields, phi, w_field, seed, kernel, pair, amplitude, notes)


def round_trip_density(model: DensityModel, grid: Grid1D) -> ScalarField:
    """density -> E+ -> phi -> w -> u^2 -> kernel -> density.

    The seed is recovered from ``w`` alone (``u^2 = -w'``), so the result
    tests the whole chain rather than the closed-form shortcut used in
    :func:`solve_density`. The sign of ``A`` is free (``eta`` does not see
    it), so ``w`` is oriented to be non-increasing before ``u^2`` is taken.
    """
    run = solve_density(model, grid)
    w = run.w_field * float(run.seed.sign_u2)
    seed = seed_from_w(w)
    kernel = kernel_for_field(seed, w, model.domain)
    return density_from_kernel(kernel, model.epsilon, model.phi0)
