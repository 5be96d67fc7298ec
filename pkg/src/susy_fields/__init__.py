"""Confluent SUSY partner potentials from 1-D electrostatics."""

from ._backend import BACKEND
from .electrostatics import (
    AnalyticDensity,
    ConstantSlab,
    DensityModel,
    FieldSolutionPair,
    GaussianSheet,
    TabulatedDensity,
    beta_from_density,
    density_from_kernel,
    field_from_kernel,
    fields_from_density,
    potential_from_field,
    round_trip_density,
    seed_sq_from_w,
    solve_density,
    w_from_potential,
)
from .errors import (
    ConfigurationError,
    DegenerateDensityError,
    DeletedLevelError,
    IngestionError,
    InvalidArgumentError,
    InvalidKernelError,
    NodelessViolationError,
    NumericalFailureError,
    SusyFieldsError,
    UnderResolvedError,
)
from .numerics import (
    Grid1D,
    ScalarField,
    TridiagonalOperator,
    build_grid,
    differentiate,
    erf_eval,
    integrate_cumulative,
    lowest_eigenpairs,
)
from .scenarios import (
    ScenarioResult,
    constant_density_scenario,
    custom_scenario,
    oscillator_scenario,
    sheet_scenario,
)
from .susy_core import (
    ConfluentKernel,
    SeedData,
    SusyPair,
    apply_intertwiner,
    build_confluent_kernel,
    confluent_partners,
    first_order_partners,
    hamiltonian_matrix,
    map_eigenstate,
    missing_state,
    seed_from_log,
    superpotential_from_seed,
)
from .verify import CheckSpec, VerificationReport, run_checks, spectrum_match

__version__ = "0.1.0"
