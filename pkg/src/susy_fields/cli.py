"""Command-line front end.

    susy-fields run --config CONFIG.json
    susy-fields verify --scenario NAME [--param k=v ...] [--report PATH]
    susy-fields spectrum --scenario NAME [--levels K] [--param k=v ...]

Exit status: 0 when every gating check passes, 1 when a check fails, 2 on
configuration, input or I/O errors. ``SUSY_FIELDS_GRID_N`` overrides the
default number of grid nodes.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .electrostatics import DensityModel, TabulatedDensity
from .errors import ConfigurationError, IngestionError, SusyFieldsError
from .numerics import ScalarField, build_grid, lowest_eigenpairs
from .scenarios import (
    constant_density_scenario,
    custom_scenario,
    oscillator_scenario,
    sheet_scenario,
)
from .susy_core import hamiltonian_matrix
from .verify import default_checks, run_checks

CSV_COLUMNS = ("x", "rho", "e_plus", "e_minus", "v_minus", "v_plus", "u2", "w", "eta")
SCENARIOS = ("sheet", "constant", "oscillator", "custom")
PARAMS = {
    "sheet": {"sigma": 1.0, "epsilon": 1.0, "phi0": 1.0, "s": None},
    "constant": {"rho0": 1.0, "epsilon": 1.0, "phi0": 1.0, "d": None},
    "oscillator": {"omega": 1.0, "epsilon": 1.0, "phi0": 1.0},
    "custom": {"epsilon": 1.0, "phi0": 1.0},
}
DEFAULT_N = 2001


class ConfigWarning(UserWarning):
    pass


@dataclass
class RunConfig:
    scenario: str
    params: dict
    grid: dict
    outputs: dict = field(default_factory=dict)
    checks: object = "default"
    mode: str = "exact"
    continuity: bool = False
    density: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)


def default_n() -> int:
    raw = os.environ.get("SUSY_FIELDS_GRID_N")
    if raw is None:
        return DEFAULT_N
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError("must be an integer", "SUSY_FIELDS_GRID_N") from None
    if n < 3:
        raise ConfigurationError("must be at least 3", "SUSY_FIELDS_GRID_N")
    return n


def _number(value, path: str, allow_none: bool = False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigurationError("must be a finite number", path)
    return float(value)


def _default_grid(scenario: str) -> dict:
    if scenario in ("sheet", "constant"):
        return {"x_min": 0.0, "x_max": 10.0, "avoid_origin": True}
    return {"x_min": -8.0, "x_max": 8.0, "avoid_origin": False}


def parse_config(text: str, base_dir: Path | None = None) -> RunConfig:
    """Validate a JSON run configuration and fill in defaults.

    Raises :class:`ConfigurationError` naming the offending field.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"malformed JSON ({exc.msg} at line {exc.lineno})", "$") from None
    if not isinstance(doc, dict):
        raise ConfigurationError("top level must be an object", "$")
    known = {"scenario", "params", "grid", "outputs", "checks", "mode", "continuity", "density"}
    for key in doc:
        if key not in known:
            raise ConfigurationError("unknown field", key)

    scenario = doc.get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigurationError(f"must be one of {', '.join(SCENARIOS)}", "scenario")

    raw_params = doc.get("params", {})
    if not isinstance(raw_params, dict):
        raise ConfigurationError("must be an object", "params")
    params = dict(PARAMS[scenario])
    for key, value in raw_params.items():
        if key not in params:
            raise ConfigurationError(f"not a parameter of the {scenario} scenario", f"params.{key}")
        params[key] = _number(value, f"params.{key}", allow_none=True)
    if scenario == "constant" and "phi0" not in raw_params:
        warnings.warn("phi0 defaults to 1; the reference constant-density figure uses phi0 = -1",
                      ConfigWarning, stacklevel=2)

    raw_grid = doc.get("grid", {})
    if not isinstance(raw_grid, dict):
        raise ConfigurationError("must be an object", "grid")
    grid = _default_grid(scenario)
    grid["n"] = default_n()
    for key, value in raw_grid.items():
        if key == "avoid_origin":
            if not isinstance(value, bool):
                raise ConfigurationError("must be true or false", "grid.avoid_origin")
            grid[key] = value
        elif key == "n":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigurationError("must be an integer", "grid.n")
            grid[key] = value
        elif key in ("x_min", "x_max"):
            grid[key] = _number(value, f"grid.{key}")
        else:
            raise ConfigurationError("unknown field", f"grid.{key}")
    if grid["n"] < 3:
        raise ConfigurationError("must be at least 3", "grid.n")
    if not grid["x_min"] < grid["x_max"]:
        raise ConfigurationError("x_min must be below x_max", "grid.x_max")

    outputs = doc.get("outputs", {})
    if not isinstance(outputs, dict):
        raise ConfigurationError("must be an object", "outputs")
    for key, value in outputs.items():
        if key not in ("csv", "svg", "report"):
            raise ConfigurationError("unknown output", f"outputs.{key}")
        if not isinstance(value, str) or not value:
            raise ConfigurationError("must be a non-empty path", f"outputs.{key}")

    checks = doc.get("checks", "default")
    if checks != "default":
        if not isinstance(checks, list) or not all(isinstance(c, str) for c in checks):
            raise ConfigurationError('must be "default" or a list of check names', "checks")

    mode = doc.get("mode", "exact")
    if mode not in ("exact", "regularized"):
        raise ConfigurationError('must be "exact" or "regularized"', "mode")
    continuity = doc.get("continuity", False)
    if not isinstance(continuity, bool):
        raise ConfigurationError("must be true or false", "continuity")

    density = doc.get("density", {})
    if scenario == "custom":
        if not isinstance(density, dict) or "csv" not in density:
            raise ConfigurationError("custom scenario needs density.csv", "density.csv")
        if density.get("reference", "left") not in ("left", "right", "center"):
            raise ConfigurationError('must be "left", "right" or "center"', "density.reference")
        dom = density.get("domain", [None, None])
        if not (isinstance(dom, list) and len(dom) == 2):
            raise ConfigurationError("must be a two-element list", "density.domain")
        for i, v in enumerate(dom):
            _number(v, f"density.domain[{i}]", allow_none=True)

    return RunConfig(scenario, params, grid, dict(outputs), checks, mode, continuity,
                     dict(density), base_dir or Path.cwd())


def custom_density_ingest(path, epsilon: float = 1.0, phi0: float = 1.0,
                          reference: str = "left", domain=(-math.inf, math.inf)) -> DensityModel:
    """Tabulated density from a CSV file with ``x`` and ``rho`` columns.

    A header row naming the columns is used when present; otherwise the
    first two columns are taken. Errors cite the file line number.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc.strerror}") from None
    ix, ir, start = 0, 1, 0
    if rows and rows[0] and not _is_float(rows[0][0]):
        header = [c.strip().lower() for c in rows[0]]
        if "x" not in header or "rho" not in header:
            raise IngestionError("header must name 'x' and 'rho' columns", row=1)
        ix, ir, start = header.index("x"), header.index("rho"), 1
    xs, rhos = [], []
    for line, row in enumerate(rows[start:], start=start + 1):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            x, rho = float(row[ix]), float(row[ir])
        except (ValueError, IndexError):
            raise IngestionError("x and rho must be numbers", row=line) from None
        if math.isnan(x) or math.isnan(rho):
            raise IngestionError("NaN value", row=line)
        if xs and x <= xs[-1]:
            raise IngestionError("x must be strictly increasing", row=line)
        xs.append(x)
        rhos.append(rho)
    if len(xs) < 3:
        raise IngestionError(f"need at least 3 rows, found {len(xs)}")
    return DensityModel(TabulatedDensity(np.array(xs), np.array(rhos)), (), epsilon, phi0,
                        tuple(domain), reference)


def _is_float(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _resolve(config: RunConfig, path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else config.base_dir / p


def build_scenario(config: RunConfig):
    g = config.grid
    grid = build_grid(g["x_min"], g["x_max"], g["n"], g.get("avoid_origin", False))
    p = config.params
    if config.scenario == "sheet":
        return sheet_scenario(p["sigma"], p["epsilon"], p["phi0"], config.mode, grid, p["s"])
    if config.scenario == "constant":
        return constant_density_scenario(p["rho0"], p["epsilon"], p["phi0"], p["d"], grid,
                                          config.continuity)
    if config.scenario == "oscillator":
        return oscillator_scenario(p["omega"], p["epsilon"], p["phi0"], grid)
    dens = config.density
    lo, hi = dens.get("domain", [None, None])
    model = custom_density_ingest(
        _resolve(config, dens["csv"]), p["epsilon"], p["phi0"], dens.get("reference", "left"),
        (-math.inf if lo is None else lo, math.inf if hi is None else hi),
    )
    return custom_scenario(model, grid)


def select_checks(config: RunConfig, result) -> list:
    specs = default_checks(result)
    if config.checks == "default":
        return specs
    by_name = {s.name: s for s in specs}
    chosen = []
    for i, name in enumerate(config.checks):
        if name not in by_name:
            raise ConfigurationError(f"unknown check {name!r} for this scenario", f"checks[{i}]")
        chosen.append(by_name[name])
    return chosen


# ---------------------------------------------------------------------------
# output writers


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(result) -> str:
    cols = result.computed()
    lines = [",".join(CSV_COLUMNS)]
    x = result.grid.x
    for k in range(result.grid.n):
        cells = ["%.17g" % x[k]]
        for name in CSV_COLUMNS[1:]:
            f = cols[name]
            cells.append("" if f.mask[k] else "%.17g" % f.values[k])
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


_COLORS = ("#1f77b4", "#d62728", "#2ca02c")


def _ticks(lo: float, hi: float, count: int = 5) -> np.ndarray:
    return np.linspace(lo, hi, count)


def svg_plot(x: np.ndarray, series: dict, title: str, width: int = 640, height: int = 400) -> str:
    """Line plot of several series against ``x`` with simple axis ticks.

    The vertical range spans the 1st to 99th percentile of all finite
    values, so isolated singular samples do not flatten the curves.
    """
    left, right, top, bottom = 70, 20, 30, 40
    pw, ph = width - left - right, height - top - bottom
    finite = np.concatenate([v[np.isfinite(v)] for v in series.values()] or [np.zeros(1)])
    if finite.size == 0:
        finite = np.zeros(1)
    lo, hi = np.percentile(finite, [1, 99])
    if hi - lo < 1e-12 * max(1.0, abs(hi)):
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    xlo, xhi = float(x[0]), float(x[-1])

    def sx(v):
        return left + (v - xlo) / (xhi - xlo) * pw

    def sy(v):
        return top + (hi - np.clip(v, lo, hi)) / (hi - lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{width / 2}" y="18" text-anchor="middle" font-size="14">{title}</text>',
    ]
    for t in _ticks(xlo, xhi):
        out.append(f'<line x1="{sx(t):.1f}" y1="{top + ph}" x2="{sx(t):.1f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{sx(t):.1f}" y="{top + ph + 18}" text-anchor="middle" font-size="11">{t:.3g}</text>')
    for t in _ticks(lo, hi):
        out.append(f'<line x1="{left - 5}" y1="{sy(t):.1f}" x2="{left}" y2="{sy(t):.1f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{sy(t) + 4:.1f}" text-anchor="end" font-size="11">{t:.3g}</text>')
    for i, (name, v) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        ok = np.isfinite(v)
        # break the polyline at masked samples
        runs = np.split(np.flatnonzero(ok), np.flatnonzero(np.diff(np.flatnonzero(ok)) > 1) + 1)
        for run in runs:
            if run.size < 2:
                continue
            pts = " ".join(f"{sx(x[k]):.2f},{sy(v[k]):.2f}" for k in run)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{left + 10}" y="{top + 16 + 14 * i}" font-size="12" fill="{color}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _masked_nan(f: ScalarField) -> np.ndarray:
    return np.where(f.mask, np.nan, f.values)


def write_svgs(result, stem: Path) -> list:
    cols = {k: _masked_nan(v) for k, v in result.computed().items()}
    x = result.grid.x
    plots = {
        "fields": ({"rho": cols["rho"], "e_plus": cols["e_plus"]}, "charge density and field"),
        "potentials": ({"v_minus": cols["v_minus"], "v_plus": cols["v_plus"]}, "partner potentials"),
        "seed": ({"u2": cols["u2"], "w": cols["w"]}, "seed density and w"),
    }
    written = []
    for suffix, (series, title) in plots.items():
        path = stem.with_name(f"{stem.name}_{suffix}.svg")
        _atomic_write(path, svg_plot(x, series, f"{result.scenario_id}: {title}"))
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# commands


def _print_report(report, stream=None) -> None:
    stream = stream or sys.stdout
    for e in report.entries:
        status = "PASS" if e.passed else ("info" if e.informational else "FAIL")
        print(f"{status:4}  {e.name:24} {e.value:.3e}  (tol {e.tolerance:.0e})  {e.detail}", file=stream)
    print(f"{report.scenario_id}: {'all gating checks passed' if report.passed else 'FAILED'}",
          file=stream)


def run(config: RunConfig, stream=None) -> int:
    """Build the scenario, run its checks and write the requested outputs."""
    try:
        result = build_scenario(config)
        specs = select_checks(config, result)
    except SusyFieldsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = run_checks(result, specs)
    try:
        out = config.outputs
        if "csv" in out:
            _atomic_write(_resolve(config, out["csv"]), csv_text(result))
        if "report" in out:
            _atomic_write(_resolve(config, out["report"]), report.to_json() + "\n")
        if "svg" in out:
            stem = _resolve(config, out["svg"])
            write_svgs(result, stem.with_suffix("") if stem.suffix == ".svg" else stem)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 2
    _print_report(report, stream)
    return 0 if report.passed else 1


def _params_from_args(scenario: str, pairs) -> dict:
    params = {}
    for item in pairs or ():
        if "=" not in item:
            raise ConfigurationError("expected k=v", f"--param {item}")
        key, value = item.split("=", 1)
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise ConfigurationError("value must be a number", f"params.{key.strip()}") from None
    return params


def _config_from_args(args) -> RunConfig:
    if args.scenario == "custom":
        raise ConfigurationError("the custom scenario needs a config file (use run --config)", "scenario")
    doc = {"scenario": args.scenario, "params": _params_from_args(args.scenario, args.param)}
    if getattr(args, "mode", None):
        doc["mode"] = args.mode
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConfigWarning)
        return parse_config(json.dumps(doc))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="susy-fields", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured scenario and write outputs")
    p_run.add_argument("--config", required=True, help="JSON run configuration")

    p_ver = sub.add_parser("verify", help="run the default checks of a scenario")
    p_ver.add_argument("--scenario", required=True, choices=SCENARIOS[:3])
    p_ver.add_argument("--param", action="append", metavar="K=V")
    p_ver.add_argument("--mode", choices=("exact", "regularized"))
    p_ver.add_argument("--report", help="write the JSON report here")

    p_spec = sub.add_parser("spectrum", help="lowest levels of both partner Hamiltonians")
    p_spec.add_argument("--scenario", required=True, choices=SCENARIOS[:3])
    p_spec.add_argument("--levels", type=int, default=4)
    p_spec.add_argument("--param", action="append", metavar="K=V")
    p_spec.add_argument("--mode", choices=("exact", "regularized"))

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            path = Path(args.config)
            try:
                text = path.read_text()
            except OSError as exc:
                print(f"error: cannot read {path}: {exc.strerror}", file=sys.stderr)
                return 2
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", ConfigWarning)
                config = parse_config(text)
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)
            return run(config)

        config = _config_from_args(args)
        if args.command == "verify":
            if args.report:
                config.outputs["report"] = args.report
            return run(config)

        result = build_scenario(config)
        for label, v in (("H-", result.pair.v_minus), ("H+", result.pair.v_plus)):
            levels = [lam for lam, _ in lowest_eigenpairs(hamiltonian_matrix(v), args.levels)]
            print(f"{label}: " + " ".join(f"{lam:.8g}" for lam in levels))
        return 0
    except SusyFieldsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
