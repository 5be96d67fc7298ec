import math

import numpy as np
import pytest

from susy_fields.errors import InvalidArgumentError, UnderResolvedError
from susy_fields.numerics import build_grid
from susy_fields.scenarios import (
    ORACLE_NAMES,
    constant_density_scenario,
    default_grid,
    oscillator_scenario,
    sheet_scenario,
)
from susy_fields.susy_core import log_norm


def rel_linf(computed, oracle):
    ok = computed.valid & oracle.valid
    ref = np.max(np.abs(oracle.values[ok]))
    return np.max(np.abs(computed.values[ok] - oracle.values[ok])) / (ref if ref > 0 else 1.0)


class TestSheet:
    def test_field_is_unit(self, sheet):
        np.testing.assert_allclose(sheet.fields.e_plus.values, 1.0, rtol=1e-10)

    def test_partner_potentials(self, sheet):
        np.testing.assert_allclose(sheet.pair.v_minus.values, 0.25, atol=1e-10)
        np.testing.assert_allclose(sheet.pair.v_plus.values, 0.25, atol=1e-10)

    def test_seed_normalized_on_half_line(self, sheet):
        u2 = sheet.seed.u2()
        np.testing.assert_allclose(u2.values, np.exp(-sheet.grid.x), rtol=1e-10)
        assert math.exp(log_norm(sheet.seed.log_u2, (0.0, math.inf))) == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("name", ORACLE_NAMES)
    def test_oracles(self, sheet, name):
        assert rel_linf(sheet.computed()[name], sheet.oracles[name]) <= 1e-10

    def test_scaled_parameters(self):
        r = sheet_scenario(sigma=2.0, epsilon=0.5, phi0=4.0)
        np.testing.assert_allclose(r.fields.e_plus.values, 4.0, rtol=1e-12)
        np.testing.assert_allclose(r.fields.beta.values, -0.5, rtol=1e-12)
        np.testing.assert_allclose(r.pair.v_minus.values, 0.25, atol=1e-9)

    def test_regularized_matches_oracles(self):
        r = sheet_scenario(mode="regularized", grid=default_grid("oscillator"))
        for name in r.oracles:
            assert rel_linf(r.computed()[name], r.oracles[name]) <= 1e-4
        assert r.params["s"] == pytest.approx(5 * r.grid.h)

    def test_regularized_under_resolved(self):
        grid = default_grid("oscillator")
        with pytest.raises(UnderResolvedError):
            sheet_scenario(mode="regularized", grid=grid, s=1.5 * grid.h)

    def test_exact_needs_positive_grid(self):
        with pytest.raises(InvalidArgumentError):
            sheet_scenario(grid=build_grid(-1.0, 1.0, 101))

    @pytest.mark.parametrize("kwargs", [{"sigma": 0.0}, {"mode": "smeared"}])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            sheet_scenario(**kwargs)


class TestConstantDensity:
    def test_fields(self, constant):
        x = constant.grid.x
        np.testing.assert_allclose(constant.fields.e_plus.values, x, rtol=1e-10)
        np.testing.assert_allclose(constant.fields.e_minus.values, 1 / x, rtol=1e-10)
        # E+ is linear, so interpolation to x = 2 is exact
        assert np.interp(2.0, x, constant.fields.e_plus.values) == pytest.approx(2.0, abs=1e-10)
        assert np.interp(2.0, x, constant.fields.e_minus.values) == pytest.approx(0.5, abs=1e-6)

    def test_omega(self, constant):
        assert constant.params["omega"] == -1.0

    @pytest.mark.parametrize("name", ORACLE_NAMES)
    def test_oracles(self, constant, name):
        assert rel_linf(constant.computed()[name], constant.oracles[name]) <= 1e-6

    def test_centrifugal_term(self, constant):
        x = constant.grid.x[:5]
        limit = constant.pair.v_minus.values[:5] * x**2
        np.testing.assert_allclose(limit, -0.25, rtol=1e-2)

    def test_discrepancy_noted(self, constant):
        assert any("omega^2/4" in n for n in constant.notes)

    def test_slab_edge_inside_grid(self):
        # the kink of ln u^2 at x = d costs the kernel quadrature some accuracy
        r = constant_density_scenario(phi0=1.0, d=4.0)
        for name in ("rho", "e_plus", "e_minus", "v_minus"):
            assert rel_linf(r.computed()[name], r.oracles[name]) <= 1e-10
        for name in ("u2", "w", "eta", "v_plus"):
            assert rel_linf(r.computed()[name], r.oracles[name]) <= 1e-5

    def test_continuity_convention(self):
        r = constant_density_scenario(rho0=2.0, epsilon=0.5, d=3.0, continuity=True)
        assert r.params["phi0"] == pytest.approx(-36.0)
        assert r.model.phi0 == pytest.approx(-36.0)

    def test_origin_on_grid_rejected(self):
        with pytest.raises(InvalidArgumentError):
            constant_density_scenario(grid=build_grid(0.0, 10.0, 101))


class TestOscillator:
    def test_w_at_origin(self, oscillator):
        assert oscillator.kernel.w.at(0.0) == pytest.approx(-0.5, abs=1e-9)

    def test_density_at_origin(self, oscillator):
        assert oscillator.fields.rho.at(0.0) == pytest.approx(4 / math.pi, abs=1e-6)

    def test_density_vanishes_right(self, oscillator):
        assert abs(oscillator.fields.rho.at(8.0)) <= 1e-6

    @pytest.mark.parametrize("x,ref", [
        (-4.0, 1.9468891770039991294),
        (-1.0, 1.686214512716970693),
        (0.504, 0.90874699693613830088),
        (2.0, 0.04153815435018602778),
    ])
    def test_density_values(self, oscillator, x, ref):
        assert oscillator.fields.rho.at(x) == pytest.approx(ref, rel=1e-5)

    @pytest.mark.parametrize("name", ORACLE_NAMES)
    def test_oracles(self, oscillator, name):
        assert rel_linf(oscillator.computed()[name], oscillator.oracles[name]) <= 1e-4

    def test_oracle_density_independent_values(self, oscillator):
        # mpmath reference values of the closed-form density
        rho = oscillator.oracles["rho"]
        assert rho.at(1.0) == pytest.approx(0.50128961801277436623, rel=1e-10)
        assert rho.at(4.0) == pytest.approx(5.079293948212306939e-7, rel=1e-8)

    def test_stiffer_oscillator(self):
        r = oscillator_scenario(omega=2.0)
        assert r.fields.rho.at(0.504) == pytest.approx(1.4717918842895117754, rel=1e-5)
        np.testing.assert_allclose(r.pair.v_minus.values, 4 * r.grid.x**2 - 2, atol=1e-12)

    def test_invalid_omega(self):
        with pytest.raises(InvalidArgumentError):
            oscillator_scenario(omega=-1.0)


def test_default_grids():
    assert default_grid("sheet").x[0] > 0
    assert default_grid("oscillator").h == pytest.approx(0.008)
