"""Worked examples: charged sheet, constant density, harmonic oscillator.

Each constructor runs the numerical pipeline and attaches closed-form
oracles evaluated independently of it, so that every intermediate quantity
can be compared against an exact expression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .electrostatics import (
    AnalyticDensity,
    ConstantSlab,
    DensityModel,
    FieldSolutionPair,
    GaussianSheet,
    fields_from_kernel,
    solve_density,
)
from .errors import InvalidArgumentError, UnderResolvedError
from .numerics import Grid1D, ScalarField, build_grid, erfc_eval, erfcx_eval
from .susy_core import (
    ConfluentKernel,
    SeedData,
    SusyPair,
    build_confluent_kernel,
    confluent_partners,
)

ORACLE_NAMES = ("rho", "e_plus", "e_minus", "v_minus", "v_plus", "u2", "w", "eta")


@dataclass(frozen=True, eq=False)
class ScenarioResult:
    scenario_id: str
    grid: Grid1D
    model: DensityModel
    fields: FieldSolutionPair
    pair: SusyPair
    kernel: ConfluentKernel
    oracles: dict
    params: dict
    notes: list = field(default_factory=list)

    def __post_init__(self):
        for name, f in self.oracles.items():
            if name not in ORACLE_NAMES:
                raise InvalidArgumentError(f"unknown oracle name {name!r}")
            if f.grid != self.grid:
                raise InvalidArgumentError(f"oracle {name!r} lives on another grid")

    @property
    def seed(self) -> SeedData:
        return self.pair.seed

    def computed(self) -> dict:
        """Pipeline values under the oracle vocabulary."""
        return {
            "rho": self.fields.rho,
            "e_plus": self.fields.e_plus,
            "e_minus": self.fields.e_minus,
            "v_minus": self.pair.v_minus,
            "v_plus": self.pair.v_plus,
            "u2": self.seed.u2(),
            "w": self.kernel.w,
            "eta": self.kernel.eta,
        }


def default_grid(scenario: str, n: int = 2001) -> Grid1D:
    if scenario in ("sheet", "constant"):
        return build_grid(0.0, 10.0, n, avoid_origin=True)
    return build_grid(-8.0, 8.0, n)


def _field(grid: Grid1D, values) -> ScalarField:
    return ScalarField(grid, np.broadcast_to(np.asarray(values, dtype=float), (grid.n,)).copy())


def sheet_scenario(
    sigma: float = 1.0,
    epsilon: float = 1.0,
    phi0: float = 1.0,
    mode: str = "exact",
    grid: Grid1D | None = None,
    s: float | None = None,
) -> ScenarioResult:
    """Infinite charged sheet at the origin.

    ``mode="exact"`` works on ``x > 0`` with the enclosed charge ``sigma``;
    ``mode="regularized"`` spreads the sheet over a Gaussian of width ``s``
    (default five grid steps) and runs the full numerical pipeline.
    """
    if not sigma > 0:
        raise InvalidArgumentError("sigma must be positive")
    if mode not in ("exact", "regularized"):
        raise InvalidArgumentError("mode must be 'exact' or 'regularized'")
    grid = grid or default_grid("sheet")
    x = grid.x
    k = sigma / (epsilon * phi0)
    params = {"sigma": sigma, "epsilon": epsilon, "phi0": phi0}
    notes = []

    if mode == "exact":
        if x[0] <= 0.0:
            raise InvalidArgumentError("exact sheet mode needs a grid on x > 0")
        model = DensityModel(None, [(0.0, sigma)], epsilon, phi0, (0.0, math.inf), "left")
        with np.errstate(over="ignore", under="ignore"):
            w = np.exp(-k * x)
        oracles = {
            "rho": _field(grid, 0.0),
            "e_plus": _field(grid, sigma / epsilon),
            "e_minus": _field(grid, 0.0),
            "v_minus": _field(grid, 0.25 * k * k),
            "v_plus": _field(grid, 0.25 * k * k),
            "u2": _field(grid, k * w),
            "w": _field(grid, w),
            "eta": _field(grid, k),
        }
    else:
        s = 5.0 * grid.h if s is None else float(s)
        if s < 2.0 * grid.h:
            raise UnderResolvedError(f"sheet width s = {s:g} is below two grid steps ({2 * grid.h:g})")
        params["s"] = s
        model = DensityModel(GaussianSheet(sigma, s), (), epsilon, phi0, (-math.inf, math.inf), "left")
        z = x / (s * math.sqrt(2.0))
        rho = model.rho(x)
        q = 0.5 * sigma * erfc_eval(-z)
        with np.errstate(all="ignore"):
            e_minus = np.where(q > 0, -phi0 * rho / q, np.nan)
        oracles = {
            "rho": _field(grid, rho),
            "e_plus": _field(grid, q / epsilon),
            "e_minus": ScalarField(grid, e_minus),
        }

    run = solve_density(model, grid)
    notes += run.notes
    return ScenarioResult(
        f"sheet-{mode}", grid, model, run.fields, run.pair, run.kernel, oracles, params, notes
    )


def constant_density_scenario(
    rho0: float = 1.0,
    epsilon: float = 1.0,
    phi0: float = -1.0,
    d: float | None = None,
    grid: Grid1D | None = None,
    continuity: bool = False,
) -> ScenarioResult:
    """Uniform density ``rho0`` on ``[-d, d]``, solved on the half-line ``x > 0``.

    ``d`` defaults to the right end of the grid so the density fills the
    whole computational domain. With ``continuity`` the potential scale is
    fixed to ``phi0 = -rho0 d^2 / eps``.
    """
    if not rho0 > 0:
        raise InvalidArgumentError("rho0 must be positive")
    grid = grid or default_grid("constant")
    x = grid.x
    if x[0] <= 0.0 or np.any(x == 0.0):
        raise InvalidArgumentError("constant-density scenario needs a half-line grid avoiding the origin")
    d = float(x[-1]) if d is None else float(d)
    if not d > 0:
        raise InvalidArgumentError("d must be positive")
    if continuity:
        phi0 = -rho0 * d * d / epsilon
    omega = rho0 / (epsilon * phi0)
    model = DensityModel(ConstantSlab(rho0, d), (), epsilon, phi0, (0.0, math.inf), "left")

    inside = x <= d
    xc = np.minimum(x, d)
    rho = np.where(inside, rho0, 0.0)
    q = rho0 * xc
    eta = omega * xc
    # log w = phi/phi0 with phi = -int_0^x E+
    log_w = np.where(inside, -0.5 * omega * x * x, -0.5 * omega * d * d - omega * d * (x - d))
    with np.errstate(over="ignore", under="ignore"):
        w = np.exp(log_w)
    beta = np.where(inside, 0.5 * (1.0 / x - omega * x), -0.5 * omega * d)
    v_minus = np.where(inside, 0.25 * omega**2 * x**2 - 0.25 / x**2 - omega, beta**2)
    v_plus = v_minus + 2.0 * np.where(inside, omega, 0.0)
    oracles = {
        "rho": _field(grid, rho),
        "e_plus": _field(grid, q / epsilon),
        "e_minus": _field(grid, -phi0 * rho / q),
        "v_minus": _field(grid, v_minus),
        "v_plus": _field(grid, v_plus),
        "u2": _field(grid, eta * w),
        "w": _field(grid, w),
        "eta": _field(grid, eta),
    }
    run = solve_density(model, grid)
    coefficient_gap = float(np.max(np.abs(0.75 * omega**2 * x[inside] ** 2)))
    notes = list(run.notes) + [
        "harmonic coefficient of V- follows from beta' + beta^2 as omega^2/4; "
        f"an omega^2 coefficient would differ by up to {coefficient_gap:.6g} on this grid",
        "E- is kept as the exterior solution assigned by the model; it solves only the "
        "algebraic consistency relation, not Gauss's law for this density",
    ]
    params = {"rho0": rho0, "epsilon": epsilon, "phi0": phi0, "d": d, "omega": omega}
    return ScenarioResult("constant", grid, model, run.fields, run.pair, run.kernel, oracles, params, notes)


def oscillator_scenario(
    omega: float = 1.0,
    epsilon: float = 1.0,
    phi0: float = 1.0,
    grid: Grid1D | None = None,
) -> ScenarioResult:
    """Shifted oscillator ``V- = omega^2 x^2 - omega`` with its ground state as seed.

    Runs in the inverse direction: seed to confluent kernel (``w0 = 0``,
    ``x0 = -inf``) to field and charge density.
    """
    if not omega > 0:
        raise InvalidArgumentError("omega must be positive")
    grid = grid or default_grid("oscillator")
    x = grid.x
    log_u2 = ScalarField(grid, 0.5 * math.log(omega / math.pi) - omega * x * x)
    seed = SeedData(log_u2, 1, 0.0, True, ScalarField(grid, -omega * x), _field(grid, -omega))
    kernel = build_confluent_kernel(seed, 0.0, -math.inf)
    pair = confluent_partners(seed, kernel)
    fields = fields_from_kernel(kernel, epsilon, phi0)

    sq = math.sqrt(omega)
    ratio = math.sqrt(omega / math.pi) / erfcx_eval(-sq * x)
    rho_fn = _oscillator_density(omega, epsilon, phi0)
    rho = rho_fn(x)
    v_minus = omega**2 * x**2 - omega
    oracles = {
        "rho": _field(grid, rho),
        "e_plus": _field(grid, -2.0 * phi0 * ratio),
        "e_minus": _field(grid, 2.0 * phi0 * (ratio + omega * x)),
        "v_minus": _field(grid, v_minus),
        "v_plus": _field(grid, v_minus + 2.0 * rho / (epsilon * phi0)),
        "u2": _field(grid, np.exp(log_u2.values)),
        "w": _field(grid, -0.5 * erfc_eval(-sq * x)),
        "eta": _field(grid, -2.0 * ratio),
    }
    model = DensityModel(AnalyticDensity(rho_fn), (), epsilon, phi0, (-math.inf, math.inf), "right")
    params = {"omega": omega, "epsilon": epsilon, "phi0": phi0}
    return ScenarioResult("oscillator", grid, model, fields, pair, kernel, oracles, params, [])


def _oscillator_density(omega: float, epsilon: float, phi0: float):
    sq = math.sqrt(omega)
    amp = math.sqrt(omega / math.pi)

    def rho(x):
        x = np.asarray(x, dtype=float)
        r = amp / erfcx_eval(-sq * x)
        return 4.0 * epsilon * phi0 * r * (omega * x + r)

    return rho


def custom_scenario(model: DensityModel, grid: Grid1D, scenario_id: str = "custom") -> ScenarioResult:
    """Run the density pipeline on a user model; only ``rho`` has an oracle."""
    run = solve_density(model, grid)
    oracles = {"rho": _field(grid, model.rho(grid.x))}
    params = {"epsilon": model.epsilon, "phi0": model.phi0}
    return ScenarioResult(scenario_id, grid, model, run.fields, run.pair, run.kernel, oracles, params,
                          list(run.notes))
