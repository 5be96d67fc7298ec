import json
from importlib import resources

import jsonschema
import numpy as np
import pytest

from susy_fields.errors import InvalidArgumentError
from susy_fields.numerics import ScalarField, build_grid
from susy_fields.scenarios import default_grid, sheet_scenario
from susy_fields.susy_core import missing_state
from susy_fields.verify import (
    CheckSpec,
    convergence_ratio,
    default_checks,
    run_checks,
    spectrum_match,
    square_integrability_probe,
)

FULL = build_grid(-8.0, 8.0, 2001)


@pytest.fixture(scope="module")
def schema():
    return json.loads(resources.files("susy_fields").joinpath("report_schema.json").read_text())


class TestDefaultSuites:
    @pytest.mark.parametrize("fixture", ["oscillator", "sheet", "constant"])
    def test_default_suite_passes(self, request, fixture):
        result = request.getfixturevalue(fixture)
        report = run_checks(result, default_checks(result))
        assert report.passed, [(e.name, e.value, e.detail) for e in report.failures()]

    def test_regularized_suite_passes(self):
        result = sheet_scenario(mode="regularized", grid=default_grid("oscillator"))
        report = run_checks(result, default_checks(result))
        assert report.passed, [(e.name, e.value) for e in report.failures()]

    def test_minus_branch_bernoulli_is_informational(self, constant):
        report = run_checks(constant, default_checks(constant))
        e = report.entry("bernoulli_minus")
        assert e.informational and not e.passed
        assert 0.1 < e.value < 10.0
        assert report.passed

    def test_spectrum_entry_reports_deletion(self, oscillator):
        report = run_checks(oscillator, default_checks(oscillator))
        assert report.entry("spectrum").detail.startswith("deletion")


class TestRunChecks:
    def test_empty_spec_list(self, oscillator):
        report = run_checks(oscillator, [])
        assert report.passed and report.entries == ()

    def test_unknown_kind(self, oscillator):
        with pytest.raises(InvalidArgumentError):
            run_checks(oscillator, [CheckSpec("x", "telepathy", 1.0)])

    def test_failure_is_data(self, oscillator):
        report = run_checks(oscillator, [CheckSpec("tight", "riccati", 1e-30)])
        assert not report.passed
        assert report.failures()[0].name == "tight"

    def test_pass_iff_within_tolerance(self, sheet):
        report = run_checks(sheet, default_checks(sheet))
        for e in report.entries:
            assert e.passed == (e.value <= e.tolerance)

    @pytest.mark.parametrize("kwargs", [{"tolerance": 0.0}, {"tolerance": 1.0, "norm": "L1"}])
    def test_invalid_spec(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            CheckSpec("bad", "riccati", **kwargs)

    def test_l2_norm(self, oscillator):
        report = run_checks(oscillator, [CheckSpec("r", "riccati", 1e-3, norm="L2")])
        assert report.passed

    def test_deterministic_json(self, oscillator):
        specs = default_checks(oscillator)
        assert run_checks(oscillator, specs).to_json() == run_checks(oscillator, specs).to_json()

    @pytest.mark.parametrize("fixture", ["oscillator", "sheet", "constant"])
    def test_report_matches_schema(self, request, schema, fixture):
        result = request.getfixturevalue(fixture)
        doc = json.loads(run_checks(result, default_checks(result)).to_json())
        jsonschema.validate(doc, schema)
        assert doc["grid"]["n"] == result.grid.n

    def test_nan_value_serializes_as_null(self, oscillator, schema):
        spec = CheckSpec("no_oracle", "oracle_match", 1e-3, options={"quantity": "rho"})
        shifted = build_grid(-8.0, 8.0, 2001)
        rho = ScalarField(shifted, np.full(shifted.n, np.nan))
        result = type(oscillator)(oscillator.scenario_id, oscillator.grid, oscillator.model,
                                  oscillator.fields, oscillator.pair, oscillator.kernel,
                                  {"rho": rho}, oscillator.params)
        doc = json.loads(run_checks(result, [spec]).to_json())
        assert doc["checks"][0]["value"] is None
        jsonschema.validate(doc, schema)


class TestSpectrumMatch:
    def test_oscillator_deletion(self, oscillator):
        e = spectrum_match(oscillator.pair.v_minus, oscillator.pair.v_plus, 0.0, 4, 1e-2)
        assert e.passed
        assert "deletion" in e.detail

    def test_zero_energy_absent_from_partner(self, oscillator):
        e = spectrum_match(oscillator.pair.v_minus, oscillator.pair.v_plus, 0.0, 4, 1e-2)
        gap = float(e.detail.rsplit("=", 1)[1])
        assert gap >= 1.0

    def test_identical_potentials(self):
        v = ScalarField(FULL, FULL.x**2)
        e = spectrum_match(v, v, -5.0, 3, 1e-12)
        assert e.passed and e.value == 0.0
        assert "isospectral" in e.detail

    def test_needs_two_levels(self):
        v = ScalarField(FULL, FULL.x**2)
        with pytest.raises(InvalidArgumentError):
            spectrum_match(v, v, 0.0, 1, 1e-2)


class TestSquareIntegrability:
    def test_missing_state(self, oscillator):
        ms = missing_state(oscillator.kernel, oscillator.seed)
        assert square_integrability_probe(ms, "left")[0] == "divergent"
        assert square_integrability_probe(ms, "right")[0] == "convergent"

    @pytest.mark.parametrize("side", ["left", "right"])
    def test_gaussian(self, side):
        f = ScalarField(FULL, np.exp(-FULL.x**2 / 2))
        assert square_integrability_probe(f, side)[0] == "convergent"

    def test_inverse_x(self):
        grid = build_grid(0.0, 1.0, 2001, avoid_origin=True)
        assert square_integrability_probe(ScalarField(grid, 1 / grid.x), "left")[0] == "divergent"


class TestConvergenceRatio:
    def test_plain(self):
        assert convergence_ratio(4e-4, 1e-4) == pytest.approx(4.0)

    def test_roundoff_floor(self):
        assert convergence_ratio(1e-13, 2e-13) == float("inf")

    def test_stalled(self):
        assert convergence_ratio(1e-4, 1e-4) == pytest.approx(1.0)
