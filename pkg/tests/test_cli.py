import csv
import json
import math
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from susy_fields.cli import (
    CSV_COLUMNS,
    ConfigWarning,
    build_scenario,
    csv_text,
    custom_density_ingest,
    main,
    parse_config,
    run,
)
from susy_fields.errors import ConfigurationError, IngestionError
from susy_fields.numerics import build_grid
from susy_fields.scenarios import constant_density_scenario, custom_scenario

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
SHIPPED = ("sheet", "constant", "oscillator")


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_table(path, rows, header=("x", "rho")):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(header)
        w.writerows(rows)
    return path


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture(scope="module")
def schema():
    return json.loads(resources.files("susy_fields").joinpath("report_schema.json").read_text())


class TestParseConfig:
    def test_defaults_filled(self):
        cfg = parse_config('{"scenario": "oscillator", "params": {"omega": 1}}')
        assert cfg.params == {"omega": 1.0, "epsilon": 1.0, "phi0": 1.0}
        assert cfg.grid["n"] == 2001
        assert cfg.checks == "default"

    def test_constant_warns_about_phi0(self):
        with pytest.warns(ConfigWarning, match="phi0 = -1"):
            cfg = parse_config('{"scenario": "constant"}')
        assert cfg.params["rho0"] == 1.0 and cfg.params["phi0"] == 1.0

    def test_explicit_phi0_silent(self, recwarn):
        parse_config('{"scenario": "constant", "params": {"phi0": -1}}')
        assert not [w for w in recwarn if issubclass(w.category, ConfigWarning)]

    @pytest.mark.parametrize("text,path", [
        ('{"scenario": "sheet", "grid": {"n": 2}}', "grid.n"),
        ('{"scenario": "sheet", "grid": {"n": 10.5}}', "grid.n"),
        ('{"scenario": "dipole"}', "scenario"),
        ('{"scenario": "sheet", "params": {"omega": 1}}', "params.omega"),
        ('{"scenario": "sheet", "params": {"sigma": "one"}}', "params.sigma"),
        ('{"scenario": "sheet", "outputs": {"pdf": "a.pdf"}}', "outputs.pdf"),
        ('{"scenario": "sheet", "mode": "smeared"}', "mode"),
        ('{"scenario": "sheet", "grid": {"x_min": 5, "x_max": 1}}', "grid.x_max"),
        ('{"scenario": "custom"}', "density.csv"),
        ('{"scenario": "sheet", "colour": 1}', "colour"),
        ('{"scenario": ', "$"),
        ("[1, 2]", "$"),
    ])
    def test_errors_name_the_field(self, text, path):
        with pytest.raises(ConfigurationError) as info:
            parse_config(text)
        assert info.value.path == path

    def test_grid_override_from_environment(self, monkeypatch):
        monkeypatch.setenv("SUSY_FIELDS_GRID_N", "401")
        assert parse_config('{"scenario": "oscillator"}').grid["n"] == 401
        assert parse_config('{"scenario": "oscillator", "grid": {"n": 51}}').grid["n"] == 51

    def test_bad_environment_value(self, monkeypatch):
        monkeypatch.setenv("SUSY_FIELDS_GRID_N", "lots")
        with pytest.raises(ConfigurationError):
            parse_config('{"scenario": "oscillator"}')


class TestIngest:
    def test_two_rows_rejected(self, tmp_path):
        path = write_table(tmp_path / "d.csv", [(0, 1), (1, 1)])
        with pytest.raises(IngestionError):
            custom_density_ingest(path)

    def test_nan_row_reported(self, tmp_path):
        path = write_table(tmp_path / "d.csv", [(0, 1), (1, "nan"), (2, 1)])
        with pytest.raises(IngestionError) as info:
            custom_density_ingest(path)
        assert info.value.row == 3

    def test_non_monotone_row_reported(self, tmp_path):
        path = write_table(tmp_path / "d.csv", [(0, 1), (2, 1), (1, 1), (3, 1)])
        with pytest.raises(IngestionError) as info:
            custom_density_ingest(path)
        assert info.value.row == 4

    def test_headerless_table(self, tmp_path):
        path = write_table(tmp_path / "d.csv", [(0, 1), (1, 2), (2, 3)], header=None)
        model = custom_density_ingest(path)
        assert model.rho(np.array([0.5, 5.0])).tolist() == [1.5, 0.0]

    def test_columns_found_by_name(self, tmp_path):
        path = write_table(tmp_path / "d.csv", [(9, 1, 0), (8, 2, 1), (7, 3, 2)], header=("rho", "y", "x"))
        model = custom_density_ingest(path)
        assert model.rho(np.array([1.0])).tolist() == [8.0]

    def test_missing_file(self, tmp_path):
        with pytest.raises(IngestionError):
            custom_density_ingest(tmp_path / "absent.csv")

    def test_slab_table_matches_constant_scenario(self, tmp_path):
        xs = np.linspace(-1.0, 1.0, 201)
        path = write_table(tmp_path / "d.csv", [(x, 1.0) for x in xs])
        grid = build_grid(0.0, 10.0, 2001, avoid_origin=True)
        model = custom_density_ingest(path, 1.0, 1.0, "left", (0.0, math.inf))
        got = custom_scenario(model, grid)
        want = constant_density_scenario(phi0=1.0, d=1.0, grid=grid)
        err = np.max(np.abs(got.fields.e_plus.values - want.oracles["e_plus"].values))
        assert err <= 1e-3

    def test_gaussian_table_gives_increasing_field(self, tmp_path):
        xs = np.linspace(-5.0, 5.0, 301)
        path = write_table(tmp_path / "d.csv", [(x, math.exp(-x * x)) for x in xs])
        result = custom_scenario(custom_density_ingest(path), build_grid(-8.0, 8.0, 801))
        assert np.all(np.diff(result.fields.e_plus.values) >= 0)


class TestRun:
    @pytest.mark.parametrize("name", SHIPPED)
    def test_shipped_config_exits_zero(self, workdir, schema, name):
        assert main(["run", "--config", str(CONFIGS / f"{name}.json")]) == 0
        report = json.loads((workdir / "out" / f"{name}_report.json").read_text())
        jsonschema.validate(report, schema)
        rows = read_csv(workdir / "out" / f"{name}.csv")
        assert list(rows[0]) == list(CSV_COLUMNS)
        for suffix in ("fields", "potentials", "seed"):
            svg = (workdir / "out" / f"{name}_{suffix}.svg").read_text()
            assert svg.startswith("<svg") and "<polyline" in svg

    def test_oscillator_density_at_origin(self, workdir):
        main(["run", "--config", str(CONFIGS / "oscillator.json")])
        rows = read_csv(workdir / "out" / "oscillator.csv")
        row = min(rows, key=lambda r: abs(float(r["x"])))
        assert float(row["x"]) == 0.0
        assert float(row["rho"]) == pytest.approx(1.2732, abs=1e-4)

    def test_sheet_field_column(self, workdir):
        main(["run", "--config", str(CONFIGS / "sheet.json")])
        assert {float(r["e_plus"]) for r in read_csv(workdir / "out" / "sheet.csv")} == {1.0}

    def test_masked_cells_empty(self, workdir):
        (workdir / "s.json").write_text(json.dumps({
            "scenario": "sheet", "mode": "regularized",
            "grid": {"x_min": -8, "x_max": 8, "n": 2001},
            "outputs": {"csv": "s.csv"},
        }))
        main(["run", "--config", "s.json"])
        rows = read_csv(workdir / "s.csv")
        assert rows[0]["e_minus"] == ""

    def test_zero_density_exits_two(self, workdir, capsys):
        write_table(workdir / "zero.csv", [(x, 0.0) for x in (-1, 0, 1, 2)])
        (workdir / "c.json").write_text(json.dumps({
            "scenario": "custom", "density": {"csv": "zero.csv"},
            "grid": {"x_min": -4, "x_max": 4, "n": 201},
        }))
        assert main(["run", "--config", "c.json"]) == 2
        assert "error" in capsys.readouterr().err

    def test_unreadable_config_exits_two(self, workdir):
        assert main(["run", "--config", "nope.json"]) == 2

    def test_failing_check_exits_one(self, workdir):
        cfg = parse_config(json.dumps({"scenario": "oscillator", "grid": {"n": 41}}))
        assert run(cfg) == 1

    def test_csv_round_trip(self, workdir):
        assert main(["run", "--config", str(CONFIGS / "oscillator.json")]) == 0
        emitted = workdir / "out" / "oscillator.csv"
        cfg = parse_config(json.dumps({
            "scenario": "custom",
            "density": {"csv": str(emitted), "reference": "right"},
            "grid": {"x_min": -8, "x_max": 8, "n": 2001},
        }))
        rerun = build_scenario(cfg)
        original = np.array([float(r["e_plus"]) for r in read_csv(emitted)])
        err = np.max(np.abs(rerun.fields.e_plus.values - original)) / np.max(np.abs(original))
        assert err <= 1e-3

    def test_csv_precision(self, constant):
        line = csv_text(constant).splitlines()[1].split(",")
        assert float(line[0]) == constant.grid.x[0]


class TestSubcommands:
    def test_verify_writes_report(self, workdir, schema):
        assert main(["verify", "--scenario", "sheet", "--report", "r.json"]) == 0
        jsonschema.validate(json.loads((workdir / "r.json").read_text()), schema)

    def test_verify_with_params(self, workdir, capsys):
        assert main(["verify", "--scenario", "oscillator", "--param", "omega=2"]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_bad_param(self, workdir):
        assert main(["verify", "--scenario", "oscillator", "--param", "omega"]) == 2

    def test_spectrum(self, capsys):
        assert main(["spectrum", "--scenario", "oscillator", "--levels", "3"]) == 0
        out = capsys.readouterr().out.splitlines()
        minus = [float(v) for v in out[0].split()[1:]]
        plus = [float(v) for v in out[1].split()[1:]]
        np.testing.assert_allclose(minus, [0, 2, 4], atol=1e-3)
        np.testing.assert_allclose(plus, [2, 4, 6], atol=1e-2)
