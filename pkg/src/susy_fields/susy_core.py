"""First-order and confluent second-order SUSY transformations.

Seeds are carried as ``ln|u^2|`` plus a sign, since every formula used here
needs only ``u^2`` or ``u'/u``. This keeps non-normalizable and formally
imaginary seeds (``u^2 < 0``) on the real line.

Conventions::

    beta  = u'/u = (ln u^2)'/2          alpha = -beta
    first order:  V1(-/+) = alpha^2 -/+ alpha' + eps
                  L1(-) = d/dx + alpha, L1(+) = -d/dx + alpha
    confluent:    w = w0 - int_{x0}^x u^2,  eta = -w'/w = u^2/w
                  V2(-) = beta' + beta^2 + eps,  V2(+) = V2(-) + 2 eta'
                  L2(-) = d2/dx2 + eta d/dx + gamma
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DeletedLevelError, InvalidArgumentError, NodelessViolationError
from .numerics import (
    Grid1D,
    ScalarField,
    TridiagonalOperator,
    differentiate,
    end_integral,
    integrate_exp_cumulative,
    is_divergent,
    window_integrals,
)

POTENTIAL_CAP = 1e6


@dataclass(frozen=True, eq=False)
class SeedData:
    """Seed solution ``u`` at factorization energy ``epsilon``.

    ``beta``/``dbeta`` optionally hold closed-form values of ``u'/u`` and
    its derivative; when absent they are obtained by differentiating
    ``log_u2``.
    """

    log_u2: ScalarField
    sign_u2: int = 1
    epsilon: float = 0.0
    normalized: bool = False
    beta: ScalarField | None = None
    dbeta: ScalarField | None = None

    def __post_init__(self):
        if self.sign_u2 not in (1, -1):
            raise InvalidArgumentError("sign_u2 must be +1 or -1")

    @property
    def grid(self) -> Grid1D:
        return self.log_u2.grid

    def u2(self) -> ScalarField:
        with np.errstate(under="ignore"):
            vals = self.sign_u2 * np.exp(self.log_u2.values)
        return ScalarField(self.grid, vals, self.log_u2.mask & ~(self.log_u2.values == -np.inf))

    def amplitude(self) -> ScalarField:
        """``|u|``; for ``sign_u2 = -1`` this is ``u / i``."""
        with np.errstate(under="ignore"):
            return self.log_u2.with_values(np.exp(0.5 * self.log_u2.values))

    def get_beta(self) -> ScalarField:
        if self.beta is not None:
            return self.beta
        return 0.5 * differentiate(self.log_u2, 1)

    def get_dbeta(self) -> ScalarField:
        if self.dbeta is not None:
            return self.dbeta
        if self.beta is not None:
            return differentiate(self.beta, 1)
        return 0.5 * differentiate(self.log_u2, 2)


def seed_from_log(
    grid: Grid1D, log_u2, sign: int = 1, epsilon: float = 0.0, normalize: bool = False,
    domain: tuple[float, float] | None = None,
) -> SeedData:
    """Seed from samples (or a callable) giving ``ln|u^2|``.

    With ``normalize`` the log is shifted so that ``int u^2 = 1`` over
    ``domain`` (default: the whole real line), using :func:`log_norm`.
    """
    field_ = log_u2 if isinstance(log_u2, ScalarField) else (
        ScalarField.from_function(grid, log_u2) if callable(log_u2) else ScalarField(grid, log_u2)
    )
    normalized = False
    if normalize:
        field_ = field_ - log_norm(field_, domain)
        normalized = True
    return SeedData(field_, sign, epsilon, normalized)


def seed_from_samples(grid: Grid1D, u, epsilon: float = 0.0) -> SeedData:
    """Seed from real samples of ``u``; rejects sign changes."""
    u = np.asarray(u(grid.x) if callable(u) else u, dtype=float)
    nz = u[u != 0.0]
    if nz.size and (np.any(nz > 0) and np.any(nz < 0)):
        k = int(np.flatnonzero(np.diff(np.sign(u)) != 0)[0])
        raise NodelessViolationError(
            f"seed changes sign near x = {grid.x[k]:.6g}", location=float(grid.x[k])
        )
    with np.errstate(divide="ignore"):
        log_u2 = 2.0 * np.log(np.abs(u))
    return SeedData(ScalarField(grid, log_u2), 1, epsilon, False)


def log_norm(log_f: ScalarField, domain: tuple[float, float] | None = None) -> float:
    """``ln int exp(log_f)`` over ``domain``.

    The grid part is integrated in log space; the stretches
    between the grid ends and the domain ends are added with
    :func:`end_integral`. Raises :class:`InvalidArgumentError` when the
    integral does not converge.
    """
    lo, hi = domain if domain is not None else (-math.inf, math.inf)
    x = log_f.grid.x
    if lo > x[0] or hi < x[-1]:
        raise InvalidArgumentError("normalisation domain must contain the grid")
    peak = float(np.max(log_f.values[log_f.valid]))
    shifted = log_f - peak
    total = integrate_exp_cumulative(shifted).values[-1]
    total += end_integral(shifted, "left", x[0] - lo)
    total += end_integral(shifted, "right", hi - x[-1])
    if not (np.isfinite(total) and total > 0):
        raise InvalidArgumentError("seed density is not integrable over the domain")
    return peak + math.log(total)


@dataclass(frozen=True, eq=False)
class ConfluentKernel:
    """``w``, ``eta = -w'/w`` and ``gamma`` of a confluent transformation.

    ``deta`` and ``d2eta`` are the closed-form derivatives obtained from
    the Bernoulli equation; the verification engine checks them against
    finite differences of ``eta``.
    """

    w: ScalarField
    eta: ScalarField
    gamma: ScalarField
    w0: float
    x0: float
    deta: ScalarField
    d2eta: ScalarField
    beta: ScalarField

    @property
    def grid(self) -> Grid1D:
        return self.w.grid


@dataclass(frozen=True, eq=False)
class SusyPair:
    v_minus: ScalarField
    v_plus: ScalarField
    order: int
    seed: SeedData
    epsilon: float
    kernel: ConfluentKernel | None = None
    limit_confluent: bool = False
    notes: list = field(default_factory=list)

    @property
    def grid(self) -> Grid1D:
        return self.v_minus.grid


def _cap(v: ScalarField, cap: float = POTENTIAL_CAP) -> ScalarField:
    return v.masked(np.abs(v.values) > cap)


def superpotential_from_seed(seed: SeedData) -> ScalarField:
    """``alpha = -u'/u``."""
    return -seed.get_beta()


def _check_nodeless(seed: SeedData) -> None:
    lg = seed.log_u2
    zero = lg.values == -np.inf
    zero[[0, -1]] = False
    if zero.any():
        k = int(np.flatnonzero(zero)[0])
        raise NodelessViolationError(
            f"seed vanishes at x = {lg.x[k]:.6g}", location=float(lg.x[k])
        )


def first_order_partners(seed: SeedData) -> SusyPair:
    """``V1(-/+) = alpha^2 -/+ alpha' + eps``."""
    _check_nodeless(seed)
    alpha = superpotential_from_seed(seed)
    dalpha = -seed.get_dbeta()
    eps = seed.epsilon
    v_minus = _cap(alpha * alpha - dalpha + eps)
    v_plus = _cap(alpha * alpha + dalpha + eps)
    return SusyPair(v_minus, v_plus, 1, seed, eps)


def _first_crossing(w: ScalarField) -> float | None:
    v = w.values[w.valid]
    x = w.x[w.valid]
    s = np.sign(v)
    if np.all(s == s[0]) and s[0] != 0:
        return None
    bad = np.flatnonzero((s[1:] != s[:-1]) | (s[1:] == 0))
    k = int(bad[0]) if bad.size else 0
    if s[k] == 0:
        return float(x[k])
    return float(x[k] - v[k] * (x[k + 1] - x[k]) / (v[k + 1] - v[k]))


def build_confluent_kernel(
    seed: SeedData, w0: float = 0.0, x0: float = -math.inf
) -> ConfluentKernel:
    """``w = w0 - int_{x0}^x u^2``, ``eta = u^2/w`` and ``gamma``.

    ``x0`` may be ``-inf``/``+inf``; the part of the integral beyond the
    grid is then added from the asymptotic end piece of ``ln u^2``.
    """
    grid = seed.grid
    if seed.normalized and w0 > 0.0 and w0 < 1.0 and (x0 == -math.inf or x0 <= grid.x[0]):
        raise NodelessViolationError(
            f"w0 = {w0} lies in (0, 1): w vanishes inside the domain for a normalized seed"
        )
    u2 = seed.u2()
    beta = seed.get_beta()
    dbeta = seed.get_dbeta()
    sgn = seed.sign_u2

    if x0 == -math.inf:
        tail = end_integral(seed.log_u2, "left")
        integral = (integrate_exp_cumulative(seed.log_u2) + tail) * sgn
    elif x0 == math.inf:
        tail = end_integral(seed.log_u2, "right")
        integral = (integrate_exp_cumulative(seed.log_u2, grid.x[-1]) - tail) * sgn
    else:
        integral = integrate_exp_cumulative(seed.log_u2, float(x0)) * sgn
    w = ScalarField(grid, w0 - integral.values, seed.log_u2.mask & (seed.log_u2.values != -np.inf))

    crossing = _first_crossing(w)
    if crossing is not None:
        raise NodelessViolationError(
            f"w changes sign near x = {crossing:.6g}; choose another w0", location=crossing
        )

    with np.errstate(all="ignore"):
        eta = ScalarField(grid, u2.filled(0.0) / w.values, w.mask)
        # eta' from the Bernoulli equation, eta'' from its derivative
        ratio = eta + 2.0 * beta  # = eta'/eta
        deta = eta * ratio
        d2eta = deta * (2.0 * eta + 2.0 * beta) + 2.0 * dbeta * eta
        # eta''/eta expanded as (eta'/eta)' + (eta'/eta)^2 to stay finite where eta -> 0
        dratio = deta + 2.0 * dbeta
        gamma = (eta * 0.5) ** 2 + deta * 0.5 + (ratio * 0.5) ** 2 - (dratio + ratio * ratio) * 0.5
    return ConfluentKernel(w, eta, gamma, float(w0), float(x0), deta, d2eta, beta)


def missing_state(kernel: ConfluentKernel, seed: SeedData) -> ScalarField:
    """Unnormalised partner solution ``u/w`` at the factorization energy."""
    return seed.amplitude() / kernel.w


def _limit_confluent(kernel: ConfluentKernel, seed: SeedData) -> bool:
    psi = missing_state(kernel, seed)
    return any(is_divergent(window_integrals(psi, side)) for side in ("left", "right"))


def confluent_partners(seed: SeedData, kernel: ConfluentKernel) -> SusyPair:
    """``V(-) = beta' + beta^2 + eps``, ``V(+) = V(-) + 2 eta'``."""
    if kernel.grid != seed.grid:
        raise InvalidArgumentError("kernel and seed live on different grids")
    beta = seed.get_beta()
    eps = seed.epsilon
    v_minus = _cap(seed.get_dbeta() + beta * beta + eps)
    v_plus = _cap(v_minus + 2.0 * kernel.deta)
    v_minus = v_minus.masked(v_plus.mask)
    return SusyPair(v_minus, v_plus, 2, seed, eps, kernel, _limit_confluent(kernel, seed))


# ---------------------------------------------------------------------------
# operators


def hamiltonian_matrix(v: ScalarField) -> TridiagonalOperator:
    """Three-point ``-d2/dx2 + V`` with Dirichlet ends."""
    if v.mask.any():
        k = int(np.flatnonzero(v.mask)[0])
        raise InvalidArgumentError(
            f"potential is masked at x = {v.x[k]:.6g}; restrict the grid first"
        )
    h = v.grid.h
    return TridiagonalOperator(2.0 / h**2 + v.values, np.full(v.grid.n - 1, -1.0 / h**2), v.grid)


def apply_hamiltonian(v: ScalarField, f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, hamiltonian_matrix(v).matvec(f), f.mask)


def apply_intertwiner(kernel: ConfluentKernel, f: ScalarField) -> ScalarField:
    """``L2(-) f = f'' + eta f' + gamma f``."""
    return differentiate(f, 2) + kernel.eta * differentiate(f, 1) + kernel.gamma * f


def apply_adjoint_intertwiner(kernel: ConfluentKernel, f: ScalarField) -> ScalarField:
    """``L2(+) f = f'' - (eta f)' + gamma f``."""
    return differentiate(f, 2) - differentiate(kernel.eta * f, 1) + kernel.gamma * f


def apply_first_order(seed: SeedData, f: ScalarField, sign: str = "-") -> ScalarField:
    """``L1(-) f = f' + alpha f`` or ``L1(+) f = -f' + alpha f``."""
    alpha = superpotential_from_seed(seed)
    df = differentiate(f, 1)
    return (df if sign == "-" else -df) + alpha * f


def _normalize(f: ScalarField) -> ScalarField:
    norm = math.sqrt(float(np.sum(f.filled(0.0) ** 2)) * f.grid.h)
    return f * (1.0 / norm)


def map_eigenstate(pair: SusyPair, psi_minus: ScalarField, energy: float) -> ScalarField:
    """Partner eigenstate ``L(-) psi(-)``, renormalised to unit grid norm."""
    if psi_minus.grid != pair.grid:
        raise InvalidArgumentError("state and pair live on different grids")
    near = abs(energy - pair.epsilon) <= 1e-8 * max(1.0, abs(pair.epsilon))
    if pair.order == 2:
        if near and pair.limit_confluent:
            raise DeletedLevelError(
                f"E = {energy} is the factorization energy removed from the partner spectrum"
            )
        mapped = apply_intertwiner(pair.kernel, psi_minus)
    else:
        mapped = apply_first_order(pair.seed, psi_minus, "-")
    size = math.sqrt(float(np.sum(mapped.filled(0.0) ** 2)) * pair.grid.h)
    ref = math.sqrt(float(np.sum(psi_minus.filled(0.0) ** 2)) * pair.grid.h)
    if near and size <= 1e-6 * max(ref, 1e-300) * max(1.0, abs(energy)):
        raise DeletedLevelError(f"E = {energy} is annihilated by the intertwiner")
    return _normalize(mapped)
