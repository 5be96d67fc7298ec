"""Residual and spectral checks over a :class:`ScenarioResult`.

Every check reduces to a number compared against a tolerance; a failing
check is reported, never raised. Residuals are evaluated on interior
unmasked nodes (two nodes dropped at each end, where one-sided stencils
pollute the operators).

Default tolerances: algebraic identities 1e-8, identities involving a
finite-difference derivative 1e-3, operator and spectral identities 1e-2.
The operator checks use Gaussian bumps ``exp(-(x - c)^2 / (2 s^2))`` with
``s = 0.7`` centred at the grid midpoint and 1.5 to either side.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError
from .numerics import (
    ScalarField,
    differentiate,
    is_divergent,
    lowest_eigenpairs,
    window_integrals,
)
from .susy_core import (
    apply_adjoint_intertwiner,
    apply_first_order,
    apply_intertwiner,
    hamiltonian_matrix,
    missing_state,
)

KINDS = (
    "riccati",
    "bernoulli",
    "quadratic_consistency",
    "partner_offset",
    "schrodinger_seed",
    "intertwining",
    "factorization",
    "spectrum_match",
    "oracle_match",
    "square_integrability",
)
NORMS = ("Linf", "L2")

TOL_ALGEBRAIC = 1e-8
TOL_DIFFERENTIATED = 1e-3
TOL_OPERATOR = 1e-2
DIVERGENCE_RATIO = 1.5
BOUNDARY_SKIP = 2
TEST_WIDTH = 0.7
TEST_OFFSETS = (-1.5, 0.0, 1.5)


@dataclass(frozen=True)
class CheckSpec:
    """One check. ``options`` carries kind-specific settings:

    ``branch`` ("plus"/"minus") for bernoulli and quadratic_consistency,
    ``quantity`` for oracle_match, ``side``/``expect``/``target`` for
    square_integrability, ``levels`` for spectrum_match, and ``window``
    (``(a, b)``) to restrict the nodes any residual is taken over.
    """

    name: str
    kind: str
    tolerance: float
    norm: str = "Linf"
    informational: bool = False
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.tolerance > 0:
            raise InvalidArgumentError("tolerance must be positive")
        if self.norm not in NORMS:
            raise InvalidArgumentError(f"norm must be one of {NORMS}")


@dataclass(frozen=True)
class CheckEntry:
    name: str
    kind: str
    norm: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""
    informational: bool = False

    def to_dict(self) -> dict:
        value = self.value if math.isfinite(self.value) else None
        return {
            "name": self.name,
            "kind": self.kind,
            "norm": self.norm,
            "value": value,
            "tol": self.tolerance,
            "pass": self.passed,
            "info": self.detail,
            "informational": self.informational,
        }


@dataclass(frozen=True)
class VerificationReport:
    scenario_id: str
    grid: dict
    entries: tuple = ()

    @property
    def passed(self) -> bool:
        """True when every gating (non-informational) check passed."""
        return all(e.passed for e in self.entries if not e.informational)

    def failures(self) -> list:
        return [e for e in self.entries if not e.passed and not e.informational]

    def entry(self, name: str) -> CheckEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario_id,
            "grid": dict(self.grid),
            "checks": [e.to_dict() for e in self.entries],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# ---------------------------------------------------------------------------
# helpers


def _interior(grid, window=None) -> np.ndarray:
    keep = np.ones(grid.n, dtype=bool)
    keep[:BOUNDARY_SKIP] = False
    keep[grid.n - BOUNDARY_SKIP:] = False
    if window is not None:
        a, b = window
        keep &= (grid.x >= a) & (grid.x <= b)
    return keep


def _norm(r: ScalarField, keep: np.ndarray, norm: str) -> float:
    sel = keep & r.valid
    if not sel.any():
        return math.nan
    v = r.values[sel]
    if norm == "L2":
        return float(math.sqrt(np.sum(v * v) * r.grid.h))
    return float(np.max(np.abs(v)))


def _ratio(num: ScalarField, den: ScalarField, keep: np.ndarray) -> float:
    sel = keep & num.valid & den.valid
    d = math.sqrt(float(np.sum(den.values[sel] ** 2)))
    return math.sqrt(float(np.sum(num.values[sel] ** 2))) / d if d > 0 else math.nan


def _entry(spec: CheckSpec, value: float, detail: str = "") -> CheckEntry:
    passed = bool(math.isfinite(value) and value <= spec.tolerance)
    return CheckEntry(spec.name, spec.kind, spec.norm, float(value), spec.tolerance, passed,
                      detail, spec.informational)


def bump_functions(grid) -> list:
    """The Gaussian bumps used by the operator checks."""
    mid = 0.5 * (grid.x_min + grid.x_max)
    return [
        ScalarField(grid, np.exp(-((grid.x - mid - c) ** 2) / (2.0 * TEST_WIDTH**2)))
        for c in TEST_OFFSETS
    ]


def _apply_h(v: ScalarField, f: ScalarField) -> ScalarField:
    # masked potential samples are zeroed; their neighbours are masked instead
    op = hamiltonian_matrix(ScalarField(v.grid, v.filled(0.0)))
    bad = v.mask.copy()
    bad[1:] |= v.mask[:-1]
    bad[:-1] |= v.mask[1:]
    return ScalarField(f.grid, op.matvec(f.filled(0.0)), f.mask | bad)


def _eta(result, branch: str) -> ScalarField:
    e = result.fields.e_plus if branch == "plus" else result.fields.e_minus
    return e * (1.0 / result.model.phi0)


# ---------------------------------------------------------------------------
# individual checks


def _riccati(result, spec, keep):
    pair = result.pair
    eps = pair.epsilon
    if pair.order == 1:
        alpha = -pair.seed.get_beta()
        r = alpha * alpha - differentiate(alpha, 1) - (pair.v_minus - eps)
    else:
        beta = pair.seed.get_beta()
        r = differentiate(beta, 1) + beta * beta + eps - pair.v_minus
    return _entry(spec, _norm(r, keep, spec.norm))


def _bernoulli(result, spec, keep):
    branch = spec.options.get("branch", "plus")
    eta = _eta(result, branch)
    beta = result.fields.beta
    r = differentiate(eta, 1) - eta * eta - 2.0 * beta * eta
    return _entry(spec, _norm(r, keep, spec.norm), f"branch {branch}")


def _quadratic(result, spec, keep):
    branch = spec.options.get("branch", "plus")
    eta = _eta(result, branch)
    source = result.fields.rho * (1.0 / (result.model.epsilon * result.model.phi0))
    r = eta * eta + 2.0 * result.fields.beta * eta - source
    sel = keep & r.valid
    scale = max(1.0, float(np.max(np.abs(source.values[sel]))) if sel.any() else 1.0,
                float(np.max(eta.values[sel] ** 2)) if sel.any() else 1.0)
    return _entry(spec, _norm(r, keep, spec.norm) / scale, f"branch {branch}, scale {scale:.3g}")


def _partner_offset(result, spec, keep):
    pair = result.pair
    if pair.order == 1:
        shift = 2.0 * differentiate(-pair.seed.get_beta(), 1)
    else:
        shift = 2.0 * differentiate(pair.kernel.eta, 1)
    r = pair.v_plus - pair.v_minus - shift
    return _entry(spec, _norm(r, keep, spec.norm))


def _schrodinger_seed(result, spec, keep):
    pair = result.pair
    u = pair.seed.amplitude()
    r = _apply_h(pair.v_minus, u) - u * pair.epsilon
    return _entry(spec, _ratio(r, u, keep), "||(H- - eps) u|| / ||u||")


def _intertwining(result, spec, keep):
    pair = result.pair
    worst = 0.0
    for f in bump_functions(result.grid):
        if pair.order == 2:
            lf = apply_intertwiner(pair.kernel, f)
            lhf = apply_intertwiner(pair.kernel, _apply_h(pair.v_minus, f))
        else:
            lf = apply_first_order(pair.seed, f, "-")
            lhf = apply_first_order(pair.seed, _apply_h(pair.v_minus, f), "-")
        worst = max(worst, _ratio(_apply_h(pair.v_plus, lf) - lhf, f, keep))
    return _entry(spec, worst, "max over test bumps of ||(H+ L- - L- H-) f|| / ||f||")


def _factorization(result, spec, keep):
    pair = result.pair
    eps = pair.epsilon
    worst = 0.0
    for f in bump_functions(result.grid):
        hf = _apply_h(pair.v_minus, f) - f * eps
        if pair.order == 2:
            lhs = apply_adjoint_intertwiner(pair.kernel, apply_intertwiner(pair.kernel, f))
            rhs = _apply_h(pair.v_minus, hf) - hf * eps
        else:
            lhs = apply_first_order(pair.seed, apply_first_order(pair.seed, f, "-"), "+")
            rhs = hf
        worst = max(worst, _ratio(lhs - rhs, f, keep))
    return _entry(spec, worst, "max over test bumps of ||(L+ L- - (H- - eps)^k) f|| / ||f||")


def spectrum_match(v_minus: ScalarField, v_plus: ScalarField, epsilon: float, k: int,
                   tol: float, name: str = "spectrum") -> CheckEntry:
    """Compare the lowest ``k`` levels of both discretised Hamiltonians.

    When ``H-`` has a level at ``epsilon`` that ``H+`` lacks, that level is
    treated as deleted and the remaining ``k - 1`` levels of ``H-`` are
    matched against the lowest ``k - 1`` of ``H+``; otherwise the spectra
    are matched level by level.
    """
    if k < 2:
        raise InvalidArgumentError("spectrum_match needs k >= 2")
    lm = np.array([lam for lam, _ in lowest_eigenpairs(hamiltonian_matrix(v_minus), k)])
    lp = np.array([lam for lam, _ in lowest_eigenpairs(hamiltonian_matrix(v_plus), k)])
    gap = float(np.min(np.abs(lp - epsilon)))
    at_eps = np.abs(lm - epsilon) <= tol
    if at_eps.any() and gap > tol:
        keep = ~at_eps
        m = int(keep.sum())
        value = float(np.max(np.abs(lm[keep] - lp[:m]))) if m else 0.0
        mode = "deletion"
    else:
        value = float(np.max(np.abs(lm - lp)))
        mode = "isospectral"
    detail = (f"{mode}; H- {np.array2string(lm, precision=6)}; "
              f"H+ {np.array2string(lp, precision=6)}; min |E+ - eps| = {gap:.6g}")
    passed = bool(value <= tol)
    return CheckEntry(name, "spectrum_match", "Linf", value, tol, passed, detail)


def _spectrum(result, spec, keep):
    entry = spectrum_match(result.pair.v_minus, result.pair.v_plus, result.pair.epsilon,
                           int(spec.options.get("levels", 4)), spec.tolerance, spec.name)
    return CheckEntry(entry.name, entry.kind, spec.norm, entry.value, entry.tolerance,
                      entry.passed, entry.detail, spec.informational)


def _oracle(result, spec, keep):
    name = spec.options.get("quantity")
    if name not in result.oracles:
        raise InvalidArgumentError(f"scenario {result.scenario_id!r} has no oracle {name!r}")
    got = result.computed()[name]
    want = result.oracles[name]
    sel = keep & got.valid & want.valid
    if not sel.any():
        return _entry(spec, math.nan, f"{name}: no comparable nodes")
    scale = float(np.max(np.abs(want.values[sel])))
    err = float(np.max(np.abs(got.values[sel] - want.values[sel])))
    value = err / scale if scale > 0 else err
    return _entry(spec, value, f"{name}: relative max error over {int(sel.sum())} nodes")


def square_integrability_probe(f: ScalarField, direction: str,
                               ratio: float = DIVERGENCE_RATIO) -> tuple[str, np.ndarray]:
    """Classify ``f`` as "divergent" or "convergent" toward one end from the
    growth of ``int |f|^2`` over nested windows."""
    integrals = window_integrals(f, direction)
    return ("divergent" if is_divergent(integrals, ratio) else "convergent"), integrals


def _square_integrability(result, spec, keep):
    side = spec.options.get("side", "left")
    expect = spec.options.get("expect", "divergent")
    target = spec.options.get("target", "missing_state")
    if target == "missing_state":
        f = missing_state(result.kernel, result.seed)
    elif target == "seed":
        f = result.seed.amplitude()
    else:
        raise InvalidArgumentError(f"unknown probe target {target!r}")
    verdict, integrals = square_integrability_probe(f, side)
    tail = ", ".join(f"{v:.4g}" for v in integrals[-3:])
    return _entry(spec, 0.0 if verdict == expect else 1.0,
                  f"{target} toward {side}: {verdict} (expected {expect}); last windows {tail}")


_DISPATCH = {
    "riccati": _riccati,
    "bernoulli": _bernoulli,
    "quadratic_consistency": _quadratic,
    "partner_offset": _partner_offset,
    "schrodinger_seed": _schrodinger_seed,
    "intertwining": _intertwining,
    "factorization": _factorization,
    "spectrum_match": _spectrum,
    "oracle_match": _oracle,
    "square_integrability": _square_integrability,
}


def run_checks(result, specs: Sequence[CheckSpec]) -> VerificationReport:
    """Evaluate ``specs`` in order; failures are recorded, not raised."""
    for spec in specs:
        if spec.kind not in _DISPATCH:
            raise InvalidArgumentError(f"unknown check kind {spec.kind!r}")
    entries = []
    for spec in specs:
        keep = _interior(result.grid, spec.options.get("window"))
        try:
            entry = _DISPATCH[spec.kind](result, spec, keep)
        except InvalidArgumentError:
            raise
        except Exception as exc:  # a numerical breakdown is a failed check
            entry = CheckEntry(spec.name, spec.kind, spec.norm, math.nan, spec.tolerance,
                               False, f"{type(exc).__name__}: {exc}", spec.informational)
        entries.append(entry)
    return VerificationReport(result.scenario_id, result.grid.summary(), tuple(entries))


# ---------------------------------------------------------------------------
# default suites

ORACLE_TOLERANCE = {
    "sheet-exact": 1e-10,
    "constant": 1e-6,
    "oscillator": 1e-4,
    "sheet-regularized": 1e-4,
}

# the centrifugal term of the constant-density potential and the growth of
# its seed are resolved on a 0.008 grid only away from the origin and the
# far end; derivative checks there run over this window
CONSTANT_WINDOW = (0.5, 6.0)


def default_checks(result) -> list:
    sid = result.scenario_id
    if sid == "sheet-regularized":
        return _regularized_checks(result)
    window = CONSTANT_WINDOW if sid == "constant" else None
    opt = {"window": window} if window else {}
    specs = [
        CheckSpec("riccati", "riccati", TOL_DIFFERENTIATED, options=dict(opt)),
        CheckSpec("bernoulli_plus", "bernoulli", TOL_DIFFERENTIATED, options={"branch": "plus"}),
        CheckSpec("bernoulli_minus", "bernoulli", TOL_DIFFERENTIATED, informational=True,
                  options={"branch": "minus", **opt}),
        CheckSpec("quadratic_plus", "quadratic_consistency", TOL_ALGEBRAIC, options={"branch": "plus"}),
        CheckSpec("quadratic_minus", "quadratic_consistency", TOL_ALGEBRAIC, options={"branch": "minus"}),
        CheckSpec("partner_offset", "partner_offset", TOL_DIFFERENTIATED, options=dict(opt)),
        CheckSpec("schrodinger_seed", "schrodinger_seed", TOL_DIFFERENTIATED, options=dict(opt)),
    ]
    if sid in ("oscillator", "constant", "sheet-exact"):
        specs += [
            CheckSpec("intertwining", "intertwining", TOL_OPERATOR),
            CheckSpec("factorization", "factorization", TOL_OPERATOR),
        ]
    if sid == "oscillator":
        specs += [
            CheckSpec("spectrum", "spectrum_match", TOL_OPERATOR, options={"levels": 4}),
            CheckSpec("missing_state_left", "square_integrability", 0.5,
                      options={"side": "left", "expect": "divergent"}),
            CheckSpec("missing_state_right", "square_integrability", 0.5,
                      options={"side": "right", "expect": "convergent"}),
        ]
    tol = ORACLE_TOLERANCE.get(sid, 1e-8)
    for name in result.oracles:
        specs.append(CheckSpec(f"oracle_{name}", "oracle_match", tol, options={"quantity": name}))
    return specs


def _regularized_checks(result) -> list:
    # a sheet a few grid steps wide is resolved only to O(h^2/s^2): derivative
    # based residuals are reported without gating
    specs = [
        CheckSpec("quadratic_plus", "quadratic_consistency", TOL_ALGEBRAIC, options={"branch": "plus"}),
        CheckSpec("quadratic_minus", "quadratic_consistency", TOL_ALGEBRAIC, options={"branch": "minus"}),
        CheckSpec("bernoulli_plus", "bernoulli", TOL_DIFFERENTIATED, informational=True,
                  options={"branch": "plus"}),
        CheckSpec("partner_offset", "partner_offset", TOL_DIFFERENTIATED, informational=True),
    ]
    tol = ORACLE_TOLERANCE["sheet-regularized"]
    for name in result.oracles:
        specs.append(CheckSpec(f"oracle_{name}", "oracle_match", tol, options={"quantity": name}))
    return specs


def convergence_ratio(coarse: float, fine: float, floor: float = 1e-11) -> float:
    """Reduction factor of a residual when ``h`` is halved.

    Residuals already at the rounding floor cannot shrink further; when
    both sit below ``floor`` the ratio is reported as infinite.
    """
    if coarse <= floor and fine <= floor:
        return math.inf
    return coarse / fine if fine > 0 else math.inf
