"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line."""

import json
import math
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from susy_fields.cli import build_scenario, main, parse_config
from susy_fields.electrostatics import DensityModel, GaussianSheet, round_trip_density
from susy_fields.numerics import ScalarField, lowest_eigenpairs
from susy_fields.scenarios import (
    constant_density_scenario,
    default_grid,
    oscillator_scenario,
    sheet_scenario,
)
from susy_fields.susy_core import hamiltonian_matrix, log_norm, map_eigenstate, missing_state
from susy_fields.verify import CheckSpec, convergence_ratio, run_checks, square_integrability_probe

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def check(clauses, label, value, tol):
    """Record ``value <= tol`` as one clause."""
    clauses.append((label, bool(value <= tol), f"{value:.3e} vs {tol:.0e}"))
    return value


def rel_linf(computed, oracle):
    ok = computed.valid & oracle.valid
    return float(np.max(np.abs(computed.values[ok] - oracle.values[ok])) / np.max(np.abs(oracle.values[ok])))


def max_abs(values):
    return float(np.max(np.abs(values)))


def assert_clauses(clauses):
    failed = [c for c in clauses if not c[1]]
    assert not failed, failed


def test_criterion_1_sheet(criterion, sheet):
    x = sheet.grid.x
    check(criterion, "E+ = 1", max_abs(sheet.fields.e_plus.values - 1.0), 1e-10)
    check(criterion, "V- = 1/4", max_abs(sheet.pair.v_minus.values - 0.25), 1e-10)
    check(criterion, "V+ = 1/4", max_abs(sheet.pair.v_plus.values - 0.25), 1e-10)
    check(criterion, "u^2 = exp(-x)", max_abs(sheet.seed.u2().values / np.exp(-x) - 1.0), 1e-8)
    norm = math.exp(log_norm(sheet.seed.log_u2, (0.0, math.inf)))
    check(criterion, "int u^2 = 1", abs(norm - 1.0), 1e-8)
    assert_clauses(criterion)


def test_criterion_2_constant_density(criterion, constant):
    x = constant.grid.x
    check(criterion, "E+ = x", max_abs(constant.fields.e_plus.values - x), 1e-10)
    e_minus = constant.fields.e_minus
    check(criterion, "E- = 1/x", max_abs((e_minus.values - 1 / x)[e_minus.valid]), 1e-10)
    check(criterion, "V- oracle", rel_linf(constant.pair.v_minus, constant.oracles["v_minus"]), 1e-6)
    noted = any("omega^2/4" in n for n in constant.notes)
    criterion.append(("coefficient discrepancy reported", noted, "note present" if noted else "missing"))
    assert_clauses(criterion)


def test_criterion_3_oscillator(criterion, oscillator):
    rho = oscillator.fields.rho
    check(criterion, "rho vs closed form", rel_linf(rho, oscillator.oracles["rho"]), 1e-4)
    check(criterion, "rho(0) = 4/pi", abs(rho.at(0.0) - 4 / math.pi), 1e-6)
    check(criterion, "rho(-8) = 2", abs(rho.at(-8.0) - 2.0), 1e-3)
    check(criterion, "|rho(8)| small", abs(rho.at(8.0)), 1e-6)
    check(criterion, "w(0) = -1/2", abs(oscillator.kernel.w.at(0.0) + 0.5), 1e-9)
    assert_clauses(criterion)


BUILDERS = {
    "sheet": lambda n: sheet_scenario(grid=default_grid("sheet", n)),
    "constant": lambda n: constant_density_scenario(phi0=-1.0, grid=default_grid("constant", n)),
    "oscillator": lambda n: oscillator_scenario(grid=default_grid("oscillator", n)),
}
SPECS = [
    CheckSpec("bernoulli_plus", "bernoulli", 1e-3, options={"branch": "plus"}),
    CheckSpec("quadratic_plus", "quadratic_consistency", 1e-8, options={"branch": "plus"}),
    CheckSpec("quadratic_minus", "quadratic_consistency", 1e-8, options={"branch": "minus"}),
]


def test_criterion_4_bernoulli_and_quadratic(criterion):
    for name, build in BUILDERS.items():
        coarse = run_checks(build(2001), SPECS)
        fine = run_checks(build(4001), SPECS)
        b0 = coarse.entry("bernoulli_plus").value
        check(criterion, f"{name} Bernoulli(+)", b0, 1e-3)
        ratio = convergence_ratio(b0, fine.entry("bernoulli_plus").value)
        criterion.append((f"{name} halving h", ratio >= 3.0, f"ratio {ratio:.3g}"))
        for branch in ("plus", "minus"):
            check(criterion, f"{name} quadratic({branch})", coarse.entry(f"quadratic_{branch}").value, 1e-8)
    assert_clauses(criterion)


def test_criterion_5_operator_identities(criterion, oscillator):
    report = run_checks(oscillator, [
        CheckSpec("intertwining", "intertwining", 1e-2),
        CheckSpec("factorization", "factorization", 1e-2),
    ])
    for e in report.entries:
        check(criterion, e.name, e.value, 1e-2)
    assert_clauses(criterion)


def test_criterion_6_spectral_deletion(criterion, oscillator):
    minus = [lam for lam, _ in lowest_eigenpairs(hamiltonian_matrix(oscillator.pair.v_minus), 4)]
    plus = [lam for lam, _ in lowest_eigenpairs(hamiltonian_matrix(oscillator.pair.v_plus), 4)]
    check(criterion, "H- levels {0,2,4,6}", max_abs(np.array(minus) - [0, 2, 4, 6]), 1e-3)
    check(criterion, "H+ levels {2,4,6}", max_abs(np.array(plus[:3]) - [2, 4, 6]), 1e-2)
    gap = float(np.min(np.abs(plus)))
    criterion.append(("no H+ level near 0", gap > 0.5, f"min |E+| = {gap:.4g}"))
    assert_clauses(criterion)


def test_criterion_7_eigenstate_mapping(criterion, oscillator):
    pair = oscillator.pair
    pairs = lowest_eigenpairs(hamiltonian_matrix(pair.v_minus), 3)
    h_plus = hamiltonian_matrix(pair.v_plus)
    for level in (1, 2):
        energy, psi = pairs[level]
        mapped = map_eigenstate(pair, psi, energy)
        res = h_plus.matvec(mapped) - energy * mapped.values
        value = np.linalg.norm(res[2:-2]) / np.linalg.norm(mapped.values[2:-2])
        check(criterion, f"H+ residual at E = {energy:.4f}", value, 1e-3)
    ms = missing_state(oscillator.kernel, oscillator.seed)
    left = square_integrability_probe(ms, "left")[0]
    right = square_integrability_probe(ms, "right")[0]
    criterion.append(("missing state left divergent", left == "divergent", left))
    criterion.append(("missing state right convergent", right == "convergent", right))
    assert_clauses(criterion)


def test_criterion_8_round_trip(criterion, oscillator):
    grid = oscillator.grid
    back = round_trip_density(oscillator.model, grid)
    check(criterion, "oscillator density", rel_linf(back, oscillator.oracles["rho"]), 1e-3)
    model = DensityModel(GaussianSheet(1.0, 1.0), (), 1.0, 1.0)
    back = round_trip_density(model, grid)
    check(criterion, "Gaussian density", rel_linf(back, ScalarField(grid, model.rho(grid.x))), 1e-3)
    assert_clauses(criterion)


def test_criterion_9_cli(criterion, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    schema = json.loads(resources.files("susy_fields").joinpath("report_schema.json").read_text())
    for name in ("sheet", "constant", "oscillator"):
        status = main(["run", "--config", str(CONFIGS / f"{name}.json")])
        criterion.append((f"{name} config exits 0", status == 0, f"exit {status}"))
        try:
            jsonschema.validate(json.loads((tmp_path / "out" / f"{name}_report.json").read_text()), schema)
            criterion.append((f"{name} report schema", True, "valid"))
        except (OSError, jsonschema.ValidationError) as exc:
            criterion.append((f"{name} report schema", False, type(exc).__name__))

    emitted = tmp_path / "out" / "oscillator.csv"
    cfg = parse_config(json.dumps({
        "scenario": "custom",
        "density": {"csv": str(emitted), "reference": "right"},
        "grid": {"x_min": -8, "x_max": 8, "n": 2001},
    }))
    rerun = build_scenario(cfg)
    lines = emitted.read_text().splitlines()[1:]
    original = np.array([float(line.split(",")[2]) for line in lines])
    check(criterion, "CSV round trip e_plus", max_abs(rerun.fields.e_plus.values - original) / max_abs(original), 1e-3)
    assert_clauses(criterion)
