#!/usr/bin/env python3
"""End-to-end acceptance checks behind ``zgkn verify``.

Each check is a small function registered with the ``check`` decorator; it
returns whether it passed, the measured value and the threshold it was held
to. ``--quick`` runs only the checks marked quick (no eigenvalue sweeps and
no quadratures). Checks run in a bounded thread pool and share the expensive
eigenstates through a lazily filled context.

Example:
    >>> from zgkn.geometry import ModelParams
    >>> from zgkn.verify import VerifyContext, run_checks
    >>> ctx = VerifyContext(ModelParams.hydrogenic(a=0.05, gamma=-0.25), seed=1)
    >>> results = run_checks(ctx, names=["toggle_antisymmetry"])
    >>> results[0].passed
    True
"""

import argparse
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .bohm import EigenstateField, integrate_trajectory
from .colors import get_colors
from .config import (
    RunConfig,
    add_common_arguments,
    add_model_arguments,
    config_from_args,
    default_workers,
)
from .dirac_op import cartan_frame, mhat, mhat_eigenvalues, structure_equation_residual
from .errors import EXIT_NUMERICAL, ConfigError, NoGapError, ZgknError
from .fields import gauss_flux, phi_kn, psi_kn
from .geometry import (
    FINE_STRUCTURE,
    TWO_PI,
    ModelParams,
    SpacetimePoint,
    conical_angle_ratio,
    cyl_to_os,
    os_to_cyl,
    rho_squared,
    sheet_swap,
)
from .interaction import ORDER_RANGE, interaction_report, source_point
from .results import ResultEnvelope, emit_result
from .spectral import (
    angular_eigenvalues_dense,
    continue_to_sommerfeld,
    eigenstate_residual,
    load_state,
    mirror_partner,
    radial_conservation_check,
    solve_angular,
    solve_eigenvalue,
    spectrum_scan,
)

logger = logging.getLogger(__name__)

DEFAULT_SEED = 20240611
GEOMETRY_SAMPLES = 1_000_000
TOGGLE_SAMPLES = 100_000
ANGULAR_TRIPLES = 20
SCAN_WINDOW = (-0.995, 0.995)
SCAN_LEVELS = 6
CIRCULATION_STEPS = 1000
SOMMERFELD_LADDER = (1e-4, 1e-5, 1e-6)
# Ring-centered (xi, eta, phi): on and off the axis, both sheets.
INTERACTION_POINTS = (
    (2.0, 1.0, 0.0),
    (2.0, 0.3, 0.0),
    (-2.0, 0.3, 0.0),
    (1.0, 0.9, 0.0),
    (-1.5, -0.5, 1.0),
)
INTERACTION_TOLERANCE = 1e-2


@dataclass
class CheckResult:
    """Outcome of one check.

    Attributes:
        name: Registered check name.
        passed: Whether the measured value met the threshold.
        value: The measured quantity (NaN if the check raised).
        threshold: Human-readable pass condition.
        detail: Extra context, or the error message of a failed run.
        seconds: Wall time.
    """

    name: str
    passed: bool
    value: float
    threshold: str
    detail: str = ""
    seconds: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "value": None if math.isnan(self.value) else self.value,
            "threshold": self.threshold,
            "detail": self.detail,
            "seconds": round(self.seconds, 3),
        }


Outcome = tuple[bool, float, str, str]


@dataclass(frozen=True)
class Check:
    name: str
    quick: bool
    run: Callable[["VerifyContext"], Outcome]


CHECKS: dict[str, Check] = {}


def check(name: str, quick: bool = False) -> Callable:
    """Register a check function under name."""

    def decorator(func: Callable[["VerifyContext"], Outcome]) -> Callable:
        if name in CHECKS:
            raise ValueError(f"Duplicate check name: {name}")
        CHECKS[name] = Check(name=name, quick=quick, run=func)
        return func

    return decorator


class VerifyContext:
    """Parameters, seed and shared eigenstates for one verify run.

    The ground state and the level scan are computed once, by whichever
    check asks first; the other threads wait on the lock.
    """

    def __init__(self, params: ModelParams, seed: int = DEFAULT_SEED, state=None):
        self.params = params
        self.seed = seed
        self._state = state
        self._scan = None
        self._lock = threading.Lock()

    def rng(self, salt: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])

    def ground_state(self):
        """The state given with --state-file, else kappa = -1/2 on branch -1."""
        with self._lock:
            if self._state is None:
                self._state = solve_eigenvalue(self.params, -0.5, -1)
            return self._state

    def scan(self) -> list:
        with self._lock:
            if self._scan is None:
                self._scan = spectrum_scan(
                    self.params, (-0.5, 0.5), SCAN_WINDOW, max_levels=SCAN_LEVELS, workers=1
                )
            return self._scan


def _off_ring_samples(rng: np.random.Generator, n: int, a: float) -> tuple[np.ndarray, np.ndarray]:
    """Random BL (r, theta) spread over many scales, kept away from the ring."""
    A = abs(a) or 1.0
    r = A * np.sinh(rng.uniform(-6.0, 6.0, n))
    theta = np.arccos(rng.uniform(-1.0, 1.0, n))
    keep = rho_squared(r, theta, a) >= 1e-2 * A * A
    return r[keep], theta[keep]


# --- quick checks --------------------------------------------------------------------------


@check("geometry_roundtrip", quick=True)
def _geometry_roundtrip(ctx: VerifyContext) -> Outcome:
    a = ctx.params.a
    r, theta = _off_ring_samples(ctx.rng(1), GEOMETRY_SAMPLES, a)
    rho, z, _ = os_to_cyl(r, theta, 0.0, a)
    error = 0.0
    for sheet in (1, -1):
        mask = np.sign(r) == sheet
        r2, theta2 = cyl_to_os(rho[mask], z[mask], sheet, a)
        scale = np.maximum(np.abs(r[mask]), max(abs(a), 1.0))
        error = max(error, float(np.max(np.abs(r2 - r[mask]) / scale)))
        error = max(error, float(np.max(np.abs(theta2 - theta[mask]))))
    return error <= 1e-12, error, "<= 1e-12", f"{r.size} points"


@check("sheet_swap", quick=True)
def _sheet_swap(ctx: VerifyContext) -> Outcome:
    a = ctx.params.a
    rng = ctx.rng(2)
    r, theta = _off_ring_samples(rng, GEOMETRY_SAMPLES, a)
    phi = rng.uniform(0.0, TWO_PI, r.size)
    error, flipped = 0.0, 0
    for p in (SpacetimePoint(0.0, *args) for args in zip(r, theta, phi)):
        swapped = sheet_swap(p)
        twice = sheet_swap(swapped)
        flipped += swapped.sheet == -p.sheet
        scale = max(float(np.linalg.norm(p.cartesian(a))), abs(a), 1.0)
        error = max(
            error,
            abs(twice.r - p.r) / max(abs(p.r), 1.0),
            abs(twice.theta - p.theta),
            abs(twice.phi - p.phi),
            float(np.linalg.norm(swapped.cartesian(a) - p.cartesian(a))) / scale,
        )
    passed = flipped == r.size and error <= 1e-12
    return passed, error, "<= 1e-12", f"{flipped}/{r.size} sheets flipped"


@check("conical_angle", quick=True)
def _conical_angle(ctx: VerifyContext) -> Outcome:
    ratio = conical_angle_ratio(1e-3 * abs(ctx.params.a), ctx.params.a)
    error = abs(ratio / (2.0 * TWO_PI) - 1.0)
    return error <= 1e-2, ratio, "4 pi within 1%", ""


@check("mhat_eigenvalues", quick=True)
def _mhat_eigenvalues(ctx: VerifyContext) -> Outcome:
    a = ctx.params.a
    r, theta = _off_ring_samples(ctx.rng(3), 200, a)
    error = 0.0
    for ri, ti in zip(r, theta, strict=True):
        p = SpacetimePoint(0.0, float(ri), float(ti), 0.0)
        plus, minus = mhat_eigenvalues(p, a)
        computed = np.linalg.eigvalsh(mhat(p, a))
        expected = np.sort([minus, minus, plus, plus])
        error = max(error, float(np.max(np.abs(computed - expected))))
    return error <= 1e-12, error, "<= 1e-12", "1 +- a sin(theta)/varpi"


@check("toggle_antisymmetry", quick=True)
def _toggle_antisymmetry(ctx: VerifyContext) -> Outcome:
    rng = ctx.rng(4)
    xi = rng.uniform(-5.0, 5.0, TOGGLE_SAMPLES)
    eta = rng.uniform(-1.0, 1.0, TOGGLE_SAMPLES)
    p = ctx.params
    error = 0.0
    for potential in (phi_kn, psi_kn):
        values = potential(xi, eta, p.charge, p.a)
        toggled = potential(-xi, -eta, p.charge, p.a)
        error = max(error, float(np.max(np.abs(values + toggled))))
    return error == 0.0, error, "== 0", "phi_KN and psi_KN"


@check("gauss_flux", quick=True)
def _gauss_flux(ctx: VerifyContext) -> Outcome:
    p = ctx.params
    expected = 2.0 * TWO_PI * p.charge
    radius = 1e3 * abs(p.a)
    error = 0.0
    for sheet in (1, -1):
        flux = gauss_flux(p, radius, sheet)
        error = max(error, abs(flux - sheet * expected) / max(abs(expected), 1e-300))
    return error <= 1e-3, error, "+-4 pi Q within 0.1%", f"radius {radius:g}"


@check("cartan_frame", quick=True)
def _cartan_frame(ctx: VerifyContext) -> Outcome:
    a = ctx.params.a
    rng = ctx.rng(5)
    A = abs(a) or 1.0
    error = 0.0
    for _ in range(40):
        r = float(A * rng.uniform(-3.0, 3.0))
        theta = float(rng.uniform(0.2, math.pi - 0.2))
        if r * r + (a * math.cos(theta)) ** 2 < 0.25 * A * A:
            continue
        p = SpacetimePoint(0.0, r, theta, float(rng.uniform(0.0, TWO_PI)))
        error = max(error, cartan_frame(p, a).duality_error(), structure_equation_residual(p, a))
    return error <= 1e-6, error, "<= 1e-6", "duality and structure equations"


@check("angular_oracle", quick=True)
def _angular_oracle(ctx: VerifyContext) -> Outcome:
    rng = ctx.rng(6)
    error = 0.0
    for _ in range(ANGULAR_TRIPLES):
        am, aE = (float(v) for v in rng.uniform(-0.3, 0.3, 2))
        kappa = float(rng.choice([-1.5, -0.5, 0.5, 1.5]))
        branch = int(rng.choice([-2, -1, 1, 2]))
        lam = solve_angular(am, aE, kappa, branch, tabulate=False).lam
        dense = angular_eigenvalues_dense(am, aE, kappa)
        error = max(error, float(np.min(np.abs(dense - lam))))
    return error <= 1e-6, error, "<= 1e-6", f"{ANGULAR_TRIPLES} random triples"


@check("no_gap_window", quick=True)
def _no_gap_window(ctx: VerifyContext) -> Outcome:
    m = ctx.params.m
    try:
        spectrum_scan(ctx.params, (-0.5,), (-1.5 * m, 1.5 * m))
    except NoGapError:
        return True, 0.0, "NoGapError", "window beyond the mass gap rejected"
    return False, 1.0, "NoGapError", "window beyond the mass gap accepted"


# --- full checks ---------------------------------------------------------------------------


@check("sommerfeld_limit")
def _sommerfeld_limit(ctx: VerifyContext) -> Outcome:
    params = ModelParams.hydrogenic(a=SOMMERFELD_LADDER[0], gamma=-FINE_STRUCTURE)
    comparison = continue_to_sommerfeld(params, -0.5, -1, a_ladder=SOMMERFELD_LADDER)
    d = comparison.deviations
    decreasing = all(later <= earlier or later < 1e-13 for earlier, later in zip(d, d[1:]))
    return decreasing and d[-1] <= 1e-5, d[-1], "decreasing, <= 1e-5 at a = 1e-6", ""


@check("spectral_symmetry")
def _spectral_symmetry(ctx: VerifyContext) -> Outcome:
    states = ctx.scan()
    if not states:
        return False, math.nan, "<= 1e-10 m", "scan found no levels"
    error = max(abs(mirror_partner(s).E + s.E) for s in states)
    return error <= 1e-10 * ctx.params.m, error, "<= 1e-10 m", f"{len(states)} levels"


@check("gap_confinement")
def _gap_confinement(ctx: VerifyContext) -> Outcome:
    states = ctx.scan()
    m = ctx.params.m
    worst = max((abs(s.E) for s in states), default=math.nan)
    return bool(states) and worst < m, worst, "|E| < m", f"{len(states)} levels"


@check("radial_conservation")
def _radial_conservation(ctx: VerifyContext) -> Outcome:
    states = [ctx.ground_state(), *ctx.scan()]
    drift = max(radial_conservation_check(s).drift for s in states)
    return drift <= 1e-8, drift, "<= 1e-8", f"{len(states)} states"


@check("eigenstate_residual")
def _eigenstate_residual(ctx: VerifyContext) -> Outcome:
    norms = eigenstate_residual(ctx.ground_state())
    partner_ok = norms["C_hat"] <= 10.0 * max(norms["H"], 1e-12)
    passed = norms["H"] <= 1e-6 and partner_ok
    return passed, norms["H"], "<= 1e-6, C_hat within x10", f"C_hat {norms['C_hat']:.3g}"


@check("eigenstate_circulation")
def _eigenstate_circulation(ctx: VerifyContext) -> Outcome:
    state = ctx.ground_state()
    p = state.params
    r0 = 1.0 / math.sqrt(p.m * p.m - state.E * state.E)
    theta0 = 1.0
    cadence = 0.01 * r0
    w = integrate_trajectory(
        EigenstateField(state),
        SpacetimePoint(0.0, r0, theta0, 0.0),
        (0.0, CIRCULATION_STEPS * cadence),
        cadence,
    )
    drift = max(
        float(np.max(np.abs(w.r - r0))) / max(1.0, r0), float(np.max(np.abs(w.theta - theta0)))
    )
    passed = drift <= 1e-6 and float(np.max(w.speed)) <= 1.0
    return passed, drift, "r, theta fixed to 1e-6, speed <= 1", f"{len(w.tau)} samples"


def _interaction_check(values: tuple[float, float, float]) -> Callable[[VerifyContext], Outcome]:
    def run(ctx: VerifyContext) -> Outcome:
        q_pt = source_point(list(values), ctx.params.a)
        report = interaction_report(q_pt, ctx.params)
        worst, notes, passed = 0.0, [], True
        for name, result in report.items():
            passed &= result.within(INTERACTION_TOLERANCE)
            if not math.isnan(result.rel_error):
                worst = max(worst, result.rel_error)
                passed &= ORDER_RANGE[0] <= result.order <= ORDER_RANGE[1]
            notes.append(f"{name} order {result.order:.2f}")
        low, high = ORDER_RANGE
        return passed, worst, f"<= 1%, order in [{low}, {high}]", ", ".join(notes)

    return run


for _point in INTERACTION_POINTS:
    check("interaction[{:g},{:g},{:g}]".format(*_point))(_interaction_check(_point))


# --- runner --------------------------------------------------------------------------------


def select_checks(quick: bool = False, names: list[str] | None = None) -> list[Check]:
    if names:
        unknown = [n for n in names if n not in CHECKS]
        if unknown:
            raise ConfigError(f"Unknown checks: {', '.join(unknown)}", choices=sorted(CHECKS))
        return [CHECKS[n] for n in names]
    return [c for c in CHECKS.values() if c.quick or not quick]


def _run_one(ctx: VerifyContext, item: Check) -> CheckResult:
    start = time.perf_counter()
    try:
        passed, value, threshold, detail = item.run(ctx)
    except ZgknError as e:
        logger.warning("Check %s raised %s: %s", item.name, type(e).__name__, e.message)
        passed, value, threshold, detail = False, math.nan, "", f"{type(e).__name__}: {e.message}"
    seconds = time.perf_counter() - start
    logger.info("%s: %s in %.2fs", item.name, "pass" if passed else "FAIL", seconds)
    return CheckResult(item.name, bool(passed), float(value), threshold, detail, seconds)


def run_checks(
    ctx: VerifyContext,
    quick: bool = False,
    names: list[str] | None = None,
    workers: int | None = None,
) -> list[CheckResult]:
    """Run the selected checks; results come back in registration order."""
    selected = select_checks(quick, names)
    with ThreadPoolExecutor(max_workers=workers or default_workers()) as pool:
        return list(pool.map(lambda item: _run_one(ctx, item), selected))


def render_table(results: list[CheckResult], no_color: bool = False) -> str:
    c = get_colors(no_color)
    width = max((len(r.name) for r in results), default=10)
    lines = [c.bold(f"{'check':<{width}}  {'status':<6} {'value':>12}  threshold")]
    for r in results:
        lines.append(f"{r.name:<{width}}  {c.status(r.passed):<6} {r.value:>12.4g}  {r.threshold}")
        if r.detail:
            lines.append(c.dim(f"{'':<{width}}  {r.detail}"))
    failed = sum(not r.passed for r in results)
    summary = f"{len(results) - failed}/{len(results)} checks passed"
    lines.append(c.success(summary) if failed == 0 else c.error(summary))
    return "\n".join(lines)


# --- command line --------------------------------------------------------------------------

VERIFY_COLUMNS = ("name", "passed", "value", "threshold", "detail", "seconds")
_VERIFY_KEYS = ("quick", "checks", "state_file", "workers", "seed")


def add_verify_arguments(parser: argparse.ArgumentParser) -> None:
    """Add verify command arguments to a parser."""
    add_model_arguments(parser)
    parser.add_argument(
        "--quick", action="store_true", default=None, help="Run the fast subset only"
    )
    parser.add_argument("--checks", help="Comma-separated check names (default: all)")
    parser.add_argument("--state-file", help="Use a saved state for the eigenstate checks")
    parser.add_argument(
        "--force", action="store_true", help="Accept a state file with other parameters"
    )
    parser.add_argument(
        "--seed", type=int, help=f"Seed for randomized checks (default: {DEFAULT_SEED})"
    )
    parser.add_argument("--workers", type=int, help="Worker threads for the checks")
    add_common_arguments(parser)


def _verify_config(args: argparse.Namespace) -> RunConfig:
    if getattr(args, "config", None) or getattr(args, "a", None) is not None:
        return config_from_args(args, "verify", _VERIFY_KEYS)
    if getattr(args, "gamma", None) is None:
        args.gamma = -0.25
    args.a = 0.05
    return config_from_args(args, "verify", _VERIFY_KEYS)


def run_verify(args: argparse.Namespace) -> None:
    """Execute the verify command; exits 3 when any check fails."""
    config = _verify_config(args)
    opts = config.section("verify")
    state = None
    if opts.get("state_file"):
        force = bool(getattr(args, "force", False))
        state = load_state(opts["state_file"], config.model_hash(), force)
    seed = opts.get("seed", config.seed if config.seed is not None else DEFAULT_SEED)
    ctx = VerifyContext(config.params, seed=int(seed), state=state)
    names = [n.strip() for n in opts["checks"].split(",")] if opts.get("checks") else None
    results = run_checks(ctx, bool(opts.get("quick")), names, opts.get("workers"))
    envelope = ResultEnvelope(
        command="verify",
        config_hash=config.config_hash(),
        payload=[r.to_dict() for r in results],
        diagnostics={"passed": all(r.passed for r in results), "model_hash": config.model_hash()},
        warnings=config.warnings,
    )
    rows = [r.to_dict() for r in results]
    emit_result(envelope, args, rows, VERIFY_COLUMNS, render_table(results, args.no_color))
    if not all(r.passed for r in results):
        raise SystemExit(EXIT_NUMERICAL)
