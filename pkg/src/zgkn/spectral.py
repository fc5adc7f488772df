#!/usr/bin/env python3
"""Separated eigenstates by coupled angular and radial Prüfer shooting.

In the separable case the eigen-bi-spinor factorizes into a radial pair
(R, Omega) and an angular pair (S, Theta). Each angle obeys a first-order
phase equation; eigenvalues are found by shooting the phase from both ends
and matching in the middle:

* angular: from the poles to the equator, root-finding the separation
  constant lambda at fixed (am, aE, kappa);
* radial: from the two decaying saddles at r = -R_max and r = +R_max to the
  disc r = 0, root-finding E with lambda refreshed at every E.

Example:
    >>> from zgkn.geometry import ModelParams
    >>> from zgkn.spectral import solve_eigenvalue
    >>> params = ModelParams.hydrogenic(a=0.05, gamma=-0.25)
    >>> state = solve_eigenvalue(params, kappa=-0.5, branch=-1)
    >>> round(state.E, 2)
    0.97
"""

import argparse
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np
from numpy.polynomial.legendre import leggauss
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, linalg, optimize
from scipy.interpolate import CubicSpline

from .bispinor import eigenstate_components
from .config import (
    ENV_WORKERS,
    add_common_arguments,
    add_model_arguments,
    config_from_args,
    default_workers,
    parse_float_list,
)
from .dirac_op import GridBiSpinor, RadialThetaGrid, residual_norm, symmetry_apply
from .errors import (
    ConfigError,
    InvalidQuantumNumbersError,
    NoConvergenceError,
    NoGapError,
    NonSeparableError,
    NoRootInBracketError,
    OutOfGridError,
    PoleEvaluationError,
    StiffnessFailureError,
)
from .geometry import TWO_PI, ModelParams, _scalar_or_array
from .results import ResultEnvelope, emit_result

logger = logging.getLogger(__name__)

POLE_OFFSET = 1e-6
ODE_RTOL = 1e-11
ODE_ATOL = 1e-12
TAIL_DECAY_LENGTHS = 50.0
R_MAX_CAP = 1e7
TOL_E = 1e-12
TOL_MATCH = 1e-10
LAMBDA_XTOL = 1e-12
EDGE_CLEARANCE = 1e-6
DEDUP_TOLERANCE = 1e-9
TABLE_SUBDIVISIONS = 6
DENSE_IMAG_TOLERANCE = 1e-8

_WEYL_PHASE_SIGNS = np.array([-1.0, 1.0, 1.0, -1.0])


def _check_kappa(kappa: float) -> None:
    twice = 2.0 * kappa
    if kappa == 0 or abs(twice - round(twice)) > 1e-12:
        raise InvalidQuantumNumbersError("kappa must be a non-zero multiple of 1/2", kappa=kappa)


def _warn_integer_kappa(kappa: float) -> None:
    if round(2.0 * kappa) % 2 == 0:
        logger.warning("kappa = %g is an integer; the default quantization is half-odd", kappa)


def _check_branch(branch: int) -> None:
    if int(branch) != branch or branch == 0:
        raise InvalidQuantumNumbersError("branch must be a non-zero integer", branch=branch)


def _check_energy(E: float, m: float) -> None:
    if abs(E) >= m:
        raise NoGapError(f"|E| = {abs(E):.12g} is not inside the gap (-m, m)", E=E, m=m)


def sommerfeld_energy(n: int, kappa: int, alpha: float, m: float = 1.0) -> float:
    """Dirac-Coulomb level m [1 + alpha^2/(n - |kappa| + sqrt(kappa^2 - alpha^2))^2]^(-1/2).

    Args:
        n: Principal quantum number, n >= 1.
        kappa: Dirac quantum number, a non-zero integer with |kappa| <= n, kappa != n.
        alpha: Coupling, 0 <= alpha < |kappa|.
        m: Mass.

    Raises:
        InvalidQuantumNumbersError: Any of the ranges above is violated.
    """
    if int(n) != n or n < 1:
        raise InvalidQuantumNumbersError("n must be a positive integer", n=n)
    if int(kappa) != kappa or kappa == 0:
        raise InvalidQuantumNumbersError("Dirac kappa must be a non-zero integer", kappa=kappa)
    k = abs(int(kappa))
    if k > n or kappa == n:
        raise InvalidQuantumNumbersError(f"No level with n={n}, kappa={kappa}", n=n, kappa=kappa)
    if alpha < 0 or alpha >= k:
        raise InvalidQuantumNumbersError("Coupling must satisfy 0 <= alpha < |kappa|", alpha=alpha)
    root = math.sqrt(k * k - alpha * alpha)
    return m / math.sqrt(1.0 + (alpha / (n - k + root)) ** 2)


def sommerfeld_seed(params: ModelParams, kappa: float, branch: int) -> float:
    """Lowest Sommerfeld level for the Dirac label kappa_D = sign(n)(|kappa| - 1/2 + |n|)."""
    kappa_dirac = int(math.copysign(abs(kappa) - 0.5 + abs(branch), branch))
    n = abs(kappa_dirac) + (1 if kappa_dirac > 0 else 0)
    alpha = min(abs(params.gamma), abs(kappa_dirac) * (1.0 - 1e-9))
    energy = sommerfeld_energy(n, kappa_dirac, alpha, params.m)
    return -energy if params.gamma > 0 else energy


# --- angular problem -----------------------------------------------------------------------


def _angular_coefficients(theta: ArrayLike, am: float, aE: float, kappa: float) -> tuple:
    theta = np.asarray(theta, dtype=float)
    if np.any((theta <= 0.0) | (theta >= math.pi)):
        raise PoleEvaluationError("The angular equations are singular at the poles")
    st = np.sin(theta)
    return am * np.cos(theta), aE * st - kappa / st


def angular_rhs(
    theta: ArrayLike, Theta: ArrayLike, lam: float, am: float, aE: float, kappa: float
) -> Any:
    """dTheta/dtheta = 2 lam - 2 mu cos(Theta) + 2 q sin(Theta).

    Here mu = am cos(theta) and q = aE sin(theta) - kappa/sin(theta).

    Raises:
        PoleEvaluationError: theta at or beyond a pole.
    """
    mu, q = _angular_coefficients(theta, am, aE, kappa)
    Theta = np.asarray(Theta, dtype=float)
    return _scalar_or_array(2.0 * lam - 2.0 * mu * np.cos(Theta) + 2.0 * q * np.sin(Theta))


def angular_log_amplitude_rhs(
    theta: ArrayLike, Theta: ArrayLike, am: float, aE: float, kappa: float
) -> Any:
    """d(ln S)/dtheta = -q cos(Theta) - mu sin(Theta)."""
    mu, q = _angular_coefficients(theta, am, aE, kappa)
    Theta = np.asarray(Theta, dtype=float)
    return _scalar_or_array(-q * np.cos(Theta) - mu * np.sin(Theta))


def _solve_ivp(
    rhs: Callable, span: tuple[float, float], y0: list, dense: bool = False, what: str = "ODE"
):
    sol = integrate.solve_ivp(
        rhs, span, y0, method="DOP853", rtol=ODE_RTOL, atol=ODE_ATOL, dense_output=dense
    )
    if sol.status != 0:
        raise StiffnessFailureError(
            f"{what} integration failed: {sol.message}", location=float(sol.t[-1]), span=span
        )
    return sol


def _dense_samples(sol, per_step: int = TABLE_SUBDIVISIONS) -> tuple[NDArray, NDArray]:
    """Sample a dense solution at per_step points inside every accepted step."""
    t = sol.t
    frac = np.arange(per_step) / per_step
    inner = (t[:-1, None] + (t[1:] - t[:-1])[:, None] * frac).ravel()
    points = np.append(inner, t[-1])
    return points, np.atleast_2d(sol.sol(points))


class _AngularShooter:
    """Pole-to-equator integrations of the angular phase at fixed (am, aE, kappa).

    Regularity at theta = 0 fixes Theta(0) = 0 for kappa > 0 and pi for
    kappa < 0, with Theta(pi) the other one; the first-order slope at either
    pole is 2(lam - am sign(kappa))/(1 + 2|kappa|).
    """

    def __init__(self, am: float, aE: float, kappa: float, theta_start: float = POLE_OFFSET):
        self.am = am
        self.aE = aE
        self.kappa = kappa
        self.theta_start = theta_start
        self.calls = 0

    def pole_values(self, lam: float) -> tuple[float, float]:
        sign = 1.0 if self.kappa > 0 else -1.0
        slope = 2.0 * (lam - self.am * sign) / (1.0 + 2.0 * abs(self.kappa))
        left = 0.0 if self.kappa > 0 else math.pi
        right = math.pi if self.kappa > 0 else 0.0
        return left + slope * self.theta_start, right - slope * self.theta_start

    def _rhs(self, lam: float, with_amplitude: bool) -> Callable:
        am, aE, kappa = self.am, self.aE, self.kappa

        def rhs(theta: float, y: NDArray) -> list[float]:
            st = math.sin(theta)
            q = aE * st - kappa / st
            mu = am * math.cos(theta)
            c, s = math.cos(y[0]), math.sin(y[0])
            d_phase = 2.0 * lam - 2.0 * mu * c + 2.0 * q * s
            if with_amplitude:
                return [d_phase, -q * c - mu * s]
            return [d_phase]

        return rhs

    def mismatch(self, lam: float) -> float:
        """F(lam) = Theta_L(pi/2) - Theta_R(pi/2), increasing in lam."""
        self.calls += 1
        left0, right0 = self.pole_values(lam)
        rhs = self._rhs(lam, with_amplitude=False)
        half = 0.5 * math.pi
        left = _solve_ivp(rhs, (self.theta_start, half), [left0], what="Angular")
        right = _solve_ivp(rhs, (math.pi - self.theta_start, half), [right0], what="Angular")
        return float(left.y[0, -1] - right.y[0, -1])

    def target(self, branch: int) -> float:
        k0 = math.floor(self.mismatch(0.0) / TWO_PI)
        return TWO_PI * (k0 + (branch if branch > 0 else branch + 1))

    def tabulate(self, lam: float, target: float) -> tuple[NDArray, NDArray, NDArray]:
        """(theta, Theta, ln S) on (0, pi), Theta continuous and int S^2 dtheta = 1."""
        left0, right0 = self.pole_values(lam)
        rhs = self._rhs(lam, with_amplitude=True)
        half = 0.5 * math.pi
        ln0 = abs(self.kappa) * math.log(self.theta_start)
        left = _solve_ivp(rhs, (self.theta_start, half), [left0, ln0], dense=True, what="Angular")
        right = _solve_ivp(
            rhs, (math.pi - self.theta_start, half), [right0, ln0], dense=True, what="Angular"
        )
        t_l, y_l = _dense_samples(left)
        t_r, y_r = _dense_samples(right)
        t_r, y_r = t_r[::-1][1:], y_r[:, ::-1][:, 1:]
        theta = np.concatenate([t_l, t_r])
        Theta = np.concatenate([y_l[0], y_r[0] + target])
        ln_s = np.concatenate([y_l[1], y_r[1] + (y_l[1, -1] - right.y[1, -1])])
        ln_s -= ln_s.max()
        ln_s -= 0.5 * math.log(integrate.simpson(np.exp(2.0 * ln_s), x=theta))
        return theta, Theta, ln_s


@dataclass
class AngularSolution:
    """A solved angular eigenproblem with its tables.

    Attributes:
        lam: Separation constant.
        branch: Branch index n (n != 0).
        target: Matching value of Theta_L(pi/2) - Theta_R(pi/2).
        iterations: Root-finder iterations.
        theta, Theta, ln_s: Tables; empty when not tabulated.
    """

    lam: float
    am: float
    aE: float
    kappa: float
    branch: int
    target: float
    iterations: int = 0
    theta: NDArray = field(default_factory=lambda: np.empty(0))
    Theta: NDArray = field(default_factory=lambda: np.empty(0))
    ln_s: NDArray = field(default_factory=lambda: np.empty(0))

    def to_dict(self, tables: bool = False) -> dict[str, Any]:
        data: dict[str, Any] = {
            "lambda": self.lam,
            "am": self.am,
            "aE": self.aE,
            "kappa": self.kappa,
            "branch": self.branch,
            "target": self.target,
            "iterations": self.iterations,
        }
        if tables:
            data["theta"] = self.theta.tolist()
            data["Theta"] = self.Theta.tolist()
            data["ln_s"] = self.ln_s.tolist()
        return data


def _angular_bracket(
    f: Callable[[float], float],
    kappa: float,
    branch: int,
    am: float,
    aE: float,
    guess: float | None,
) -> tuple[float, float]:
    if guess is not None:
        step = 1e-6 * (1.0 + abs(guess))
        for _ in range(8):
            lo, hi = guess - step, guess + step
            if f(lo) <= 0.0 <= f(hi):
                return lo, hi
            step *= 8.0
    center = math.copysign(abs(kappa) - 0.5 + abs(branch), branch)
    half = abs(am) + abs(aE) + 1.0
    f_lo = f_hi = math.nan
    for _ in range(12):
        lo, hi = center - half, center + half
        f_lo, f_hi = f(lo), f(hi)
        if f_lo <= 0.0 <= f_hi:
            return lo, hi
        half *= 2.0
    raise NoRootInBracketError(
        "Could not bracket the angular eigenvalue",
        kappa=kappa,
        branch=branch,
        bracket=(lo, hi),
        values=(f_lo, f_hi),
    )


def solve_angular(
    am: float,
    aE: float,
    kappa: float,
    branch: int,
    lam_guess: float | None = None,
    target: float | None = None,
    tabulate: bool = True,
) -> AngularSolution:
    """Solve the angular eigenproblem T_ang S = lam S on branch n.

    Args:
        am, aE, kappa: Equation coefficients.
        branch: n >= 1 counts eigenvalues upward, n <= -1 downward, from the
            gap of the matching function at lam = 0.
        lam_guess: Previous eigenvalue on the same branch; tightens the bracket.
        target: Matching target from an earlier solve on the same branch, which
            keeps the branch fixed along a continuation.
        tabulate: Also build the (Theta, ln S) tables.

    Raises:
        InvalidQuantumNumbersError: kappa not a multiple of 1/2 or branch = 0.
        NoRootInBracketError: The bracket search failed.
    """
    _check_kappa(kappa)
    _check_branch(branch)
    shooter = _AngularShooter(am, aE, kappa)
    if target is None:
        target = shooter.target(branch)

    def f(lam: float) -> float:
        return shooter.mismatch(lam) - target

    lo, hi = _angular_bracket(f, kappa, branch, am, aE, lam_guess)
    lam, info = optimize.brentq(f, lo, hi, xtol=LAMBDA_XTOL, full_output=True)
    solution = AngularSolution(
        lam=float(lam),
        am=am,
        aE=aE,
        kappa=kappa,
        branch=int(branch),
        target=target,
        iterations=info.iterations,
    )
    if tabulate:
        solution.theta, solution.Theta, solution.ln_s = shooter.tabulate(lam, target)
    logger.debug("lambda(%g, %g, %g, n=%d) = %.15g", am, aE, kappa, branch, lam)
    return solution


def angular_eigenvalues_dense(am: float, aE: float, kappa: float, n_nodes: int = 400) -> NDArray:
    """Real eigenvalues of T_ang by Legendre-Gauss collocation in x = cos(theta).

    Both components are written as g_i = sin^alpha_i(theta/2) cos^beta_i(theta/2) p_i(x)
    with the pole exponents of a regular solution, and the polynomial parts
    are differentiated with the barycentric differentiation matrix.
    """
    _check_kappa(kappa)
    x, w = leggauss(n_nodes)
    bary = (-1.0) ** np.arange(n_nodes) * np.sqrt((1.0 - x * x) * w)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (bary[None, :] / bary[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))

    theta = np.arccos(x)
    sh, ch = np.sin(0.5 * theta), np.cos(0.5 * theta)
    k = abs(kappa)
    a1, b1, a2, b2 = (k, k + 1, k + 1, k) if kappa > 0 else (k + 1, k, k, k + 1)
    dlog1 = 0.5 * a1 * ch / sh - 0.5 * b1 * sh / ch
    dlog2 = 0.5 * a2 * ch / sh - 0.5 * b2 * sh / ch
    ratio = sh ** (a2 - a1) * ch ** (b2 - b1)
    st = np.sin(theta)
    mu = am * x
    q = aE * st - kappa / st

    upper = ratio[:, None] * (np.diag(dlog2 - q) - st[:, None] * D)
    lower = -(1.0 / ratio)[:, None] * (np.diag(dlog1 + q) - st[:, None] * D)
    matrix = np.block([[np.diag(mu), upper], [lower, -np.diag(mu)]])
    values = linalg.eigvals(matrix)
    keep = np.abs(values.imag) <= DENSE_IMAG_TOLERANCE * np.maximum(1.0, np.abs(values.real))
    return np.sort(values.real[keep])


# --- radial problem ------------------------------------------------------------------------


def radial_rhs(
    r: ArrayLike,
    Omega: ArrayLike,
    m: float,
    a: float,
    gamma: float,
    kappa: float,
    lam: float,
    E: float,
) -> Any:
    """Phase equation of the radial problem, with w^2 = r^2 + a^2.

    dOmega/dr = 2(mr/w) cos(Omega) + 2(lam/w) sin(Omega) + 2(a kappa + gamma r)/w^2 - 2E
    """
    r = np.asarray(r, dtype=float)
    Omega = np.asarray(Omega, dtype=float)
    w2 = r * r + a * a
    w = np.sqrt(w2)
    return _scalar_or_array(
        2.0 * (m * r / w) * np.cos(Omega)
        + 2.0 * (lam / w) * np.sin(Omega)
        + 2.0 * (a * kappa + gamma * r) / w2
        - 2.0 * E
    )


def radial_log_amplitude_rhs(r: ArrayLike, Omega: ArrayLike, m: float, a: float, lam: float) -> Any:
    """d(ln R)/dr = (mr/w) sin(Omega) - (lam/w) cos(Omega)."""
    r = np.asarray(r, dtype=float)
    Omega = np.asarray(Omega, dtype=float)
    w = np.hypot(r, a)
    return _scalar_or_array((m * r / w) * np.sin(Omega) - (lam / w) * np.cos(Omega))


def radial_saddles(E: float, m: float) -> tuple[float, float]:
    """Decaying saddle phases (Omega_+inf, Omega_-inf) = (-arccos(E/m), -arccos(-E/m)).

    Raises:
        NoGapError: |E| >= m.
    """
    _check_energy(E, m)
    return -math.acos(E / m), -math.acos(-E / m)


@dataclass(frozen=True)
class RadialShot:
    """Result of one radial shooting pass at fixed (lam, E)."""

    E: float
    lam: float
    omega_left: float
    omega_right: float
    r_max: float

    @property
    def total(self) -> float:
        """D(E) = Omega_L(0) - Omega_R(0), decreasing in E."""
        return self.omega_left - self.omega_right

    @property
    def winding(self) -> int:
        return round(self.total / TWO_PI)

    @property
    def mismatch(self) -> float:
        return self.total - TWO_PI * self.winding

    def to_dict(self) -> dict[str, Any]:
        return {
            "E": self.E,
            "lambda": self.lam,
            "D": self.total,
            "winding": self.winding,
            "mismatch": self.mismatch,
            "r_max": self.r_max,
        }


class _RadialShooter:
    def __init__(self, params: ModelParams, kappa: float):
        if params.a == 0:
            raise ConfigError("The radial problem needs a ring of non-zero radius")
        self.m = params.m
        self.a = params.a
        self.gamma = params.gamma
        self.kappa = kappa

    def r_max(self, E: float) -> float:
        gap = math.sqrt(self.m * self.m - E * E)
        floor = max(TAIL_DECAY_LENGTHS / gap, TAIL_DECAY_LENGTHS * abs(self.a))
        return min(floor, R_MAX_CAP / self.m)

    def _rhs(self, lam: float, E: float, with_amplitude: bool) -> Callable:
        m, a, gamma, kappa = self.m, self.a, self.gamma, self.kappa
        a2 = a * a

        def rhs(r: float, y: NDArray) -> list[float]:
            w2 = r * r + a2
            w = math.sqrt(w2)
            c, s = math.cos(y[0]), math.sin(y[0])
            d_phase = (
                2.0 * (m * r / w) * c
                + 2.0 * (lam / w) * s
                + 2.0 * (a * kappa + gamma * r) / w2
                - 2.0 * E
            )
            if with_amplitude:
                return [d_phase, (m * r / w) * s - (lam / w) * c]
            return [d_phase]

        return rhs

    def _tail_start(self, lam: float, E: float, r_end: float, saddle: float) -> float:
        """Fixed point of the frozen right-hand side at r_end, near the saddle."""
        w = math.hypot(r_end, self.a)
        mr, lw = self.m * r_end / w, lam / w
        shift = (self.a * self.kappa + self.gamma * r_end) / (w * w) - E

        def f(om: float) -> float:
            return mr * math.cos(om) + lw * math.sin(om) + shift

        def fprime(om: float) -> float:
            return -mr * math.sin(om) + lw * math.cos(om)

        try:
            root = optimize.newton(f, saddle, fprime=fprime, tol=1e-14, maxiter=50)
        except (RuntimeError, ZeroDivisionError):
            return saddle
        if not math.isfinite(root) or abs(root - saddle) > 0.5:
            return saddle
        return float(root)

    def _starts(self, lam: float, E: float) -> tuple[float, float, float]:
        r_max = self.r_max(E)
        plus, minus = radial_saddles(E, self.m)
        return (
            r_max,
            self._tail_start(lam, E, -r_max, minus),
            self._tail_start(lam, E, r_max, plus),
        )

    def shoot(self, lam: float, E: float) -> RadialShot:
        r_max, start_l, start_r = self._starts(lam, E)
        rhs = self._rhs(lam, E, with_amplitude=False)
        left = _solve_ivp(rhs, (-r_max, 0.0), [start_l], what="Radial")
        right = _solve_ivp(rhs, (r_max, 0.0), [start_r], what="Radial")
        return RadialShot(E, lam, float(left.y[0, -1]), float(right.y[0, -1]), r_max)

    def tabulate(self, lam: float, E: float, winding: int) -> tuple[NDArray, NDArray, NDArray]:
        """(r, Omega, ln R) on [-R_max, R_max], Omega lifted by 2 pi winding on r > 0."""
        r_max, start_l, start_r = self._starts(lam, E)
        rhs = self._rhs(lam, E, with_amplitude=True)
        left = _solve_ivp(rhs, (-r_max, 0.0), [start_l, 0.0], dense=True, what="Radial")
        right = _solve_ivp(rhs, (r_max, 0.0), [start_r, 0.0], dense=True, what="Radial")
        r_l, y_l = _dense_samples(left)
        r_r, y_r = _dense_samples(right)
        r_r, y_r = r_r[::-1][1:], y_r[:, ::-1][:, 1:]
        r = np.concatenate([r_l, r_r])
        omega = np.concatenate([y_l[0], y_r[0] + TWO_PI * winding])
        ln_r = np.concatenate([y_l[1], y_r[1] + (y_l[1, -1] - right.y[1, -1])])
        return r, omega, ln_r - ln_r.max()


def solve_radial(lam: float, params: ModelParams, kappa: float, E: float) -> RadialShot:
    """Shoot Omega inward from both decaying saddles and report the mismatch at r = 0.

    Raises:
        NoGapError: |E| >= m.
        StiffnessFailureError: The integrator gave up; details carry the location.
    """
    _check_energy(E, params.m)
    return _RadialShooter(params, kappa).shoot(lam, E)


# --- eigenstates ---------------------------------------------------------------------------


@dataclass
class ShootingReport:
    """Diagnostics of a nested (E, lambda) solve."""

    E: float | None = None
    lam: float | None = None
    winding: int | None = None
    mismatch: float = math.nan
    tolerance: float = math.nan
    outer_iterations: int = 0
    lambda_solves: int = 0
    bracket_history: list[tuple[float, float]] = field(default_factory=list)
    residual_norms: dict[str, float] = field(default_factory=dict)
    converged: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "E": self.E,
            "lambda": self.lam,
            "winding": self.winding,
            "mismatch": self.mismatch,
            "tolerance": self.tolerance,
            "outer_iterations": self.outer_iterations,
            "lambda_solves": self.lambda_solves,
            "bracket_history": [list(b) for b in self.bracket_history],
            "residual_norms": dict(self.residual_norms),
            "converged": self.converged,
        }


def _pole_value(value: float) -> float:
    return round(value / math.pi) * math.pi


@dataclass
class SeparatedState:
    """A separated eigenstate with its radial and angular tables.

    Attributes:
        E: Energy in (-m, m).
        lam: Angular separation constant.
        kappa: Azimuthal quantum number.
        winding: Radial winding w with D(E) = 2 pi w.
        branch: Angular branch index.
        params: Model parameters.
        r, Omega, ln_r: Radial table on [-R_max, R_max].
        theta, Theta, ln_s: Angular table on [theta_start, pi - theta_start].
        report: Solver diagnostics when the state came from a solve.
    """

    E: float
    lam: float
    kappa: float
    winding: int
    branch: int
    params: ModelParams
    r: NDArray
    Omega: NDArray
    ln_r: NDArray
    theta: NDArray
    Theta: NDArray
    ln_s: NDArray
    report: ShootingReport | None = None

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    @property
    def handedness(self) -> int:
        """Sign of the total radial phase advance Omega(+R_max) - Omega(-R_max)."""
        return int(np.sign(self.Omega[-1] - self.Omega[0]))

    @cached_property
    def _omega_spline(self) -> CubicSpline:
        return CubicSpline(self.r, self.Omega)

    @cached_property
    def _ln_r_spline(self) -> CubicSpline:
        return CubicSpline(self.r, self.ln_r)

    @cached_property
    def _theta_spline(self) -> CubicSpline:
        return CubicSpline(self.theta, self.Theta)

    @cached_property
    def _ln_s_spline(self) -> CubicSpline:
        return CubicSpline(self.theta, self.ln_s)

    def radial_at(self, r: ArrayLike) -> tuple[Any, Any]:
        """(R, Omega) at r.

        Raises:
            OutOfGridError: |r| beyond the tabulated R_max.
        """
        r = np.asarray(r, dtype=float)
        if np.any(np.abs(r) > self.r_max):
            raise OutOfGridError("r lies outside the radial table", r_max=self.r_max)
        R = np.exp(self._ln_r_spline(r))
        return _scalar_or_array(R), _scalar_or_array(self._omega_spline(r))

    def angular_at(self, theta: ArrayLike) -> tuple[Any, Any]:
        """(S, Theta) at theta in [0, pi]; pole series inside theta_start."""
        theta = np.asarray(theta, dtype=float)
        if np.any((theta < 0.0) | (theta > math.pi)):
            raise OutOfGridError("theta lies outside [0, pi]")
        t0 = float(self.theta[0])
        k = abs(self.kappa)
        inner = np.clip(theta, t0, math.pi - t0)
        left, right = theta < t0, theta > math.pi - t0
        tau_l, tau_r = theta / t0, (math.pi - theta) / t0
        first, last = float(self.Theta[0]), float(self.Theta[-1])
        Theta = np.where(
            left,
            _pole_value(first) + (first - _pole_value(first)) * tau_l,
            np.where(
                right,
                _pole_value(last) + (last - _pole_value(last)) * tau_r,
                self._theta_spline(inner),
            ),
        )
        with np.errstate(divide="ignore"):
            ln_s = np.where(
                left,
                self.ln_s[0] + k * np.log(tau_l),
                np.where(right, self.ln_s[-1] + k * np.log(tau_r), self._ln_s_spline(inner)),
            )
        return _scalar_or_array(np.exp(ln_s)), _scalar_or_array(Theta)

    def radial_derivatives(self, r: ArrayLike) -> tuple[Any, Any]:
        """(d ln R/dr, dOmega/dr) from the ODE right-hand sides."""
        p = self.params
        _, omega = self.radial_at(r)
        return (
            radial_log_amplitude_rhs(r, omega, p.m, p.a, self.lam),
            radial_rhs(r, omega, p.m, p.a, p.gamma, self.kappa, self.lam, self.E),
        )

    def angular_derivatives(self, theta: ArrayLike) -> tuple[Any, Any]:
        """(d ln S/dtheta, dTheta/dtheta) from the ODE right-hand sides, theta in (0, pi)."""
        p = self.params
        am, aE = p.a * p.m, p.a * self.E
        _, Theta = self.angular_at(theta)
        return (
            angular_log_amplitude_rhs(theta, Theta, am, aE, self.kappa),
            angular_rhs(theta, Theta, self.lam, am, aE, self.kappa),
        )

    def norm_squared(self) -> float:
        """<Psi, M^ Psi> from the tables by Simpson quadrature."""
        a = self.params.a
        R2 = np.exp(2.0 * self.ln_r)
        S2 = np.exp(2.0 * self.ln_s)
        radial = integrate.simpson(R2, x=self.r)
        cross_r = integrate.simpson(R2 * np.sin(self.Omega) / np.hypot(self.r, a), x=self.r)
        angular = integrate.simpson(S2, x=self.theta)
        cross_t = integrate.simpson(S2 * np.sin(self.theta) * np.sin(self.Theta), x=self.theta)
        return float(4.0 * math.pi * (radial * angular + a * cross_r * cross_t))

    def to_grid(self, grid: RadialThetaGrid) -> tuple[GridBiSpinor, tuple[NDArray, NDArray]]:
        """Sample the eigen-bi-spinor and its exact r and theta derivatives on a grid.

        Raises:
            OutOfGridError: The grid reaches beyond R_max.
        """

        R, Omega = (np.asarray(v) for v in self.radial_at(grid.r))
        S, Theta = (np.asarray(v) for v in self.angular_at(grid.theta))
        d_ln_r, d_omega = (np.asarray(v) for v in self.radial_derivatives(grid.r))
        d_ln_s, d_theta_phase = (np.asarray(v) for v in self.angular_derivatives(grid.theta))

        values = eigenstate_components(R[:, None], Omega[:, None], S[None, :], Theta[None, :])
        d_r = values * (d_ln_r[:, None, None] + 0.5j * d_omega[:, None, None] * _WEYL_PHASE_SIGNS)

        c, s = np.cos(0.5 * Theta), np.sin(0.5 * Theta)
        dS = S * d_ln_s
        dc = dS * c - 0.5 * S * s * d_theta_phase
        ds = dS * s + 0.5 * S * c * d_theta_phase
        minus = (R * np.exp(-0.5j * Omega))[:, None]
        plus = (R * np.exp(0.5j * Omega))[:, None]
        d_theta = np.stack(
            [minus * dc[None, :], plus * ds[None, :], plus * dc[None, :], minus * ds[None, :]],
            axis=-1,
        )
        psi = GridBiSpinor(grid, values, self.kappa, metadata=self.summary())
        return psi, (d_r, d_theta)

    def summary(self) -> dict[str, Any]:
        return {
            "E": self.E,
            "lambda": self.lam,
            "kappa": self.kappa,
            "winding": self.winding,
            "branch": self.branch,
            "handedness": self.handedness,
            "r_max": self.r_max,
            "params": self.params.to_dict(),
        }

    def to_dict(self, tables: bool = True) -> dict[str, Any]:
        data = self.summary()
        if self.report is not None:
            data["report"] = self.report.to_dict()
        if tables:
            data["radial"] = {
                "r": self.r.tolist(),
                "Omega": self.Omega.tolist(),
                "ln_r": self.ln_r.tolist(),
            }
            data["angular"] = {
                "theta": self.theta.tolist(),
                "Theta": self.Theta.tolist(),
                "ln_s": self.ln_s.tolist(),
            }
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SeparatedState":
        try:
            radial, angular = data["radial"], data["angular"]
            return cls(
                E=float(data["E"]),
                lam=float(data["lambda"]),
                kappa=float(data["kappa"]),
                winding=int(data["winding"]),
                branch=int(data["branch"]),
                params=ModelParams.from_dict(data["params"]),
                r=np.asarray(radial["r"], dtype=float),
                Omega=np.asarray(radial["Omega"], dtype=float),
                ln_r=np.asarray(radial["ln_r"], dtype=float),
                theta=np.asarray(angular["theta"], dtype=float),
                Theta=np.asarray(angular["Theta"], dtype=float),
                ln_s=np.asarray(angular["ln_s"], dtype=float),
            )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"Malformed separated-state data: {e}") from e


class _EigenSolver:
    """Outer root find on E with the angular eigenvalue refreshed at every E."""

    def __init__(
        self, params: ModelParams, kappa: float, branch: int, tol_E: float, tol_match: float
    ):
        if not params.is_separable:
            raise NonSeparableError(
                "The KN-anomalous case Q != I pi a does not separate", anomaly=params.anomaly
            )
        _check_kappa(kappa)
        _check_branch(branch)
        self.params = params
        self.kappa = kappa
        self.branch = int(branch)
        self.tol_E = tol_E
        self.tol_match = tol_match
        self.radial = _RadialShooter(params, kappa)
        self.report = ShootingReport()
        self._lam: dict[float, float] = {}
        self._target: float | None = None

    def lam_at(self, E: float) -> float:
        cached = self._lam.get(E)
        if cached is not None:
            return cached
        guess = None
        if self._lam:
            guess = self._lam[min(self._lam, key=lambda e: abs(e - E))]
        p = self.params
        sol = solve_angular(
            p.a * p.m,
            p.a * E,
            self.kappa,
            self.branch,
            lam_guess=guess,
            target=self._target,
            tabulate=False,
        )
        self._target = sol.target
        self._lam[E] = sol.lam
        self.report.lambda_solves += 1
        return sol.lam

    def total(self, E: float) -> float:
        _check_energy(E, self.params.m)
        return self.radial.shoot(self.lam_at(E), E).total

    def refine(self, lo: float, hi: float, winding: int) -> float:
        def g(E: float) -> float:
            return self.total(E) - TWO_PI * winding

        root, info = optimize.brentq(
            g, lo, hi, xtol=self.tol_E * self.params.m, maxiter=200, full_output=True
        )
        self.report.outer_iterations += info.iterations
        self.report.bracket_history.append((lo, hi))
        logger.debug(
            "E root %.15g for winding %d after %d iterations", root, winding, info.iterations
        )
        return float(root)

    def bracket(self, seed: float, winding: int) -> tuple[float, float]:
        """Geometric search outward from the seed for a sign change of D - 2 pi w."""
        limit = self.params.m * (1.0 - EDGE_CLEARANCE)
        seed = min(max(seed, -limit), limit)
        g0 = self.total(seed) - TWO_PI * winding
        if g0 == 0.0:
            return seed, seed
        first = 1.0 if g0 > 0 else -1.0
        for direction in (first, -first):
            prev_E, prev_g = seed, g0
            step = 1e-2 * (self.params.m - abs(seed)) + 1e-9 * self.params.m
            for _ in range(80):
                E = min(max(prev_E + direction * step, -limit), limit)
                g = self.total(E) - TWO_PI * winding
                if g == 0.0 or (g > 0) != (prev_g > 0):
                    return (min(prev_E, E), max(prev_E, E))
                if abs(E) >= limit:
                    break
                prev_E, prev_g = E, g
                step *= 2.0
            side = "higher" if direction > 0 else "lower"
            logger.warning("No sign change toward %s from E=%.12g", side, seed)
        raise NoRootInBracketError(
            "Could not bracket the energy eigenvalue", seed=seed, winding=winding, kappa=self.kappa
        )

    def finish(self, E: float, winding: int, slope: float) -> SeparatedState:
        lam = self.lam_at(E)
        shot = self.radial.shoot(lam, E)
        report = self.report
        report.E, report.lam, report.winding = E, lam, winding
        report.mismatch = shot.total - TWO_PI * winding
        report.tolerance = max(self.tol_match, 10.0 * abs(slope) * self.tol_E * self.params.m)
        report.converged = abs(report.mismatch) <= report.tolerance
        if not report.converged:
            raise NoConvergenceError(
                f"Mismatch {report.mismatch:.3g} above tolerance {report.tolerance:.3g}",
                report=report,
            )
        p = self.params
        angular = _AngularShooter(p.a * p.m, p.a * E, self.kappa)
        target = self._target if self._target is not None else 0.0
        theta, Theta, ln_s = angular.tabulate(lam, target)
        r, omega, ln_r = self.radial.tabulate(lam, E, winding)
        state = SeparatedState(
            E=E,
            lam=lam,
            kappa=self.kappa,
            winding=winding,
            branch=self.branch,
            params=p,
            r=r,
            Omega=omega,
            ln_r=ln_r,
            theta=theta,
            Theta=Theta,
            ln_s=ln_s,
            report=replace(report, bracket_history=list(report.bracket_history)),
        )
        state.ln_r = ln_r - 0.5 * math.log(state.norm_squared())
        return state


def _slope(solver: _EigenSolver, lo: float, hi: float) -> float:
    if hi <= lo:
        return 0.0
    return abs(solver.total(hi) - solver.total(lo)) / (hi - lo)


def solve_eigenvalue(
    params: ModelParams,
    kappa: float,
    branch: int,
    winding: int | None = None,
    seed: float | None = None,
    bracket: tuple[float, float] | None = None,
    tol_E: float = TOL_E,
    tol_match: float = TOL_MATCH,
) -> SeparatedState:
    """Find a separated eigenstate by nested (E, lambda) shooting.

    Args:
        params: Separable model parameters.
        kappa: Azimuthal quantum number.
        branch: Angular branch index.
        winding: Radial winding target; the winding nearest the seed when None.
        seed: Starting energy; the lowest Sommerfeld level of the branch when None.
        bracket: Explicit (lo, hi) energy bracket, skipping the search.
        tol_E: Energy tolerance in units of m.
        tol_match: Phase mismatch tolerance.

    Raises:
        NonSeparableError: Q != I pi a.
        NoGapError: The seed or bracket reaches |E| >= m.
        NoRootInBracketError: No sign change found.
        NoConvergenceError: The final mismatch is above tolerance.
    """
    _check_kappa(kappa)
    _warn_integer_kappa(kappa)
    for message in params.admissibility_warnings():
        logger.warning("Parameters outside the admissible region: %s", message)
    solver = _EigenSolver(params, kappa, branch, tol_E, tol_match)
    if seed is None:
        seed = bracket[0] if bracket is not None else sommerfeld_seed(params, kappa, branch)
    if winding is None:
        winding = round(solver.total(seed) / TWO_PI)
    if bracket is None:
        lo, hi = solver.bracket(seed, winding)
    else:
        lo, hi = sorted(bracket)
        for E in (lo, hi):
            _check_energy(E, params.m)
    E = lo if lo == hi else solver.refine(lo, hi, winding)
    state = solver.finish(E, winding, _slope(solver, lo, hi))
    logger.info("E = %.15g (kappa=%g, branch=%d, winding=%d)", state.E, kappa, branch, winding)
    return state


def mirror_partner(state: SeparatedState) -> SeparatedState:
    """Solve for the partner at (-kappa, -branch) seeded at -E."""
    return solve_eigenvalue(state.params, -state.kappa, -state.branch, seed=-state.E)


def _clip_window(window: tuple[float, float], m: float) -> tuple[float, float]:
    lo, hi = sorted(float(v) for v in window)
    if lo < -m or hi > m:
        raise NoGapError("The energy window reaches into the continuum", window=(lo, hi), m=m)
    limit = m * (1.0 - EDGE_CLEARANCE)
    return max(lo, -limit), min(hi, limit)


@dataclass(frozen=True)
class SkippedLevel:
    """A bracketed level whose refinement failed during a scan."""

    kappa: float
    branch: int
    winding: int
    reason: str

    def message(self) -> str:
        return (
            f"Skipped level kappa={self.kappa:g}, branch={self.branch}, "
            f"winding={self.winding}: {self.reason}"
        )


def _scan_cell(
    params: ModelParams,
    kappa: float,
    branch: int,
    window: tuple[float, float],
    winding_range: tuple[int, int] | None,
    n_samples: int,
    tol_E: float,
    tol_match: float,
) -> tuple[list[SeparatedState], list[SkippedLevel]]:
    solver = _EigenSolver(params, kappa, branch, tol_E, tol_match)
    energies = np.linspace(window[0], window[1], n_samples)
    totals = np.array([solver.total(float(E)) for E in energies])
    if np.any(np.diff(totals) > 0):
        logger.warning("D(E) is not monotone for kappa=%g, branch=%d", kappa, branch)
    states, skipped = [], []
    for i in range(n_samples - 1):
        e0, e1 = float(energies[i]), float(energies[i + 1])
        d0, d1 = totals[i], totals[i + 1]
        slope = abs(d1 - d0) / (e1 - e0)
        for w in range(math.floor(min(d0, d1) / TWO_PI) + 1, math.floor(max(d0, d1) / TWO_PI) + 1):
            if winding_range is not None and not winding_range[0] <= w <= winding_range[1]:
                continue
            try:
                E = solver.refine(e0, e1, w)
                states.append(solver.finish(E, w, slope))
            except ConfigError:
                raise
            except (NoConvergenceError, ValueError) as e:
                skipped.append(SkippedLevel(kappa, branch, w, str(e)))
                logger.warning("%s", skipped[-1].message())
    return states, skipped


def spectrum_scan(
    params: ModelParams,
    kappas: Iterable[float],
    window: tuple[float, float],
    winding_range: tuple[int, int] | None = None,
    branches: Iterable[int] = (-1, 1),
    n_samples: int = 16,
    workers: int | None = None,
    max_levels: int = 64,
    tol_E: float = TOL_E,
    tol_match: float = TOL_MATCH,
    skipped: list[SkippedLevel] | None = None,
) -> list[SeparatedState]:
    """Enumerate eigenstates in an energy window by winding-cell sign changes.

    Each (kappa, branch) cell samples D(E) on n_samples energies; every
    multiple of 2 pi crossed between neighbours brackets one level, which is
    refined and tabulated. Cells run in a thread pool. Levels whose
    refinement fails are appended to ``skipped`` when a list is given.

    Returns:
        States sorted by E, deduplicated per (kappa, branch) within 1e-9 m.

    Raises:
        NoGapError: The window is not inside [-m, m].
    """
    lo, hi = _clip_window(window, params.m)
    kappas = list(kappas)
    branches = list(branches)
    for kappa in kappas:
        _check_kappa(kappa)
        _warn_integer_kappa(kappa)
    for branch in branches:
        _check_branch(branch)
    if n_samples < 2:
        raise ConfigError("A scan needs at least two samples", n_samples=n_samples)
    for message in params.admissibility_warnings():
        logger.warning("Parameters outside the admissible region: %s", message)
    cells = [(k, b) for k in kappas for b in branches]

    def run(cell: tuple[float, int]) -> tuple[list[SeparatedState], list[SkippedLevel]]:
        kappa, branch = cell
        return _scan_cell(
            params, kappa, branch, (lo, hi), winding_range, n_samples, tol_E, tol_match
        )

    with ThreadPoolExecutor(max_workers=workers or default_workers()) as pool:
        outcomes = list(pool.map(run, cells))
    found = [s for cell_states, _ in outcomes for s in cell_states]
    if skipped is not None:
        skipped.extend(level for _, cell_skipped in outcomes for level in cell_skipped)

    found.sort(key=lambda s: (s.E, s.kappa, s.branch))
    unique: list[SeparatedState] = []
    for state in found:
        if any(
            u.kappa == state.kappa
            and u.branch == state.branch
            and abs(u.E - state.E) <= DEDUP_TOLERANCE * params.m
            for u in unique
        ):
            continue
        unique.append(state)
    if len(unique) > max_levels:
        logger.warning("Scan found %d levels, keeping the first %d", len(unique), max_levels)
        unique = unique[:max_levels]
    return unique


def handedness_summary(states: list[SeparatedState]) -> dict[str, Any]:
    """Counts of (sign E, handedness) pairs and their mean product."""
    counts = {"positive_right": 0, "positive_left": 0, "negative_right": 0, "negative_left": 0}
    for s in states:
        key = ("positive" if s.E > 0 else "negative") + ("_right" if s.handedness > 0 else "_left")
        counts[key] += 1
    products = [math.copysign(1.0, s.E) * s.handedness for s in states]
    return {"counts": counts, "correlation": float(np.mean(products)) if products else math.nan}


# --- checks --------------------------------------------------------------------------------


@dataclass(frozen=True)
class ConservationCheck:
    """Linear-system cross-check of a radial table.

    Attributes:
        drift: max | |R1|^2 - |R2|^2 | relative to max(|R1|^2 + |R2|^2).
        agreement: max |R_linear - R_pruefer| relative to max |R_pruefer|.
    """

    drift: float
    agreement: float

    @property
    def ok(self) -> bool:
        return self.drift <= 1e-8

    def to_dict(self) -> dict[str, Any]:
        return {"drift": self.drift, "agreement": self.agreement, "ok": self.ok}


def radial_conservation_check(state: SeparatedState, n_points: int = 400) -> ConservationCheck:
    """Integrate the linear (R1, R2) system from the table's tail values and compare."""
    p = state.params
    a, m, gamma, kappa, lam, E = p.a, p.m, p.gamma, state.kappa, state.lam, state.E

    def rhs(r: float, f: NDArray) -> list[complex]:
        w2 = r * r + a * a
        w = math.sqrt(w2)
        shift = E - (a * kappa + gamma * r) / w2
        return [
            1j * shift * f[0] - ((1j * m * r + lam) / w) * f[1],
            -1j * shift * f[1] + ((1j * m * r - lam) / w) * f[0],
        ]

    drift = agreement = 0.0
    for start in (float(state.r[0]), float(state.r[-1])):
        sample = np.linspace(start, 0.0, n_points)
        R, omega = state.radial_at(sample)
        expected = np.stack([R * np.exp(-0.5j * omega), R * np.exp(0.5j * omega)])
        scale = float(np.max(np.abs(expected)))
        sol = integrate.solve_ivp(
            rhs,
            (start, 0.0),
            expected[:, 0],
            method="DOP853",
            t_eval=sample,
            rtol=ODE_RTOL,
            atol=ODE_RTOL * 1e-3 * scale,
        )
        if sol.status != 0:
            raise StiffnessFailureError(
                f"Linear radial integration failed: {sol.message}", location=float(sol.t[-1])
            )
        f = sol.y
        total = np.abs(f[0]) ** 2 + np.abs(f[1]) ** 2
        difference = np.abs(np.abs(f[0]) ** 2 - np.abs(f[1]) ** 2)
        drift = max(drift, float(np.max(difference) / np.max(total)))
        agreement = max(agreement, float(np.max(np.abs(f - expected))) / scale)
    return ConservationCheck(drift=drift, agreement=agreement)


@dataclass
class SommerfeldComparison:
    """Adiabatic continuation of one level toward a -> 0."""

    kappa: float
    branch: int
    kappa_dirac: int
    n_principal: int
    a_values: list[float]
    energies: list[float]
    lambdas: list[float]
    reference: float
    deviations: list[float]
    order: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "kappa": self.kappa,
            "branch": self.branch,
            "kappa_dirac": self.kappa_dirac,
            "n": self.n_principal,
            "a": list(self.a_values),
            "E": list(self.energies),
            "lambda": list(self.lambdas),
            "E_sommerfeld": self.reference,
            "deviation": list(self.deviations),
            "order": self.order,
        }


def _nearest_sommerfeld(E: float, kappa_dirac: int, alpha: float, m: float) -> tuple[int, float]:
    n_min = abs(kappa_dirac) + (1 if kappa_dirac > 0 else 0)
    levels = [(n, sommerfeld_energy(n, kappa_dirac, alpha, m)) for n in range(n_min, n_min + 40)]
    n, level = min(levels, key=lambda item: abs(item[1] - abs(E)))
    return n, math.copysign(level, E)


def continue_to_sommerfeld(
    params: ModelParams,
    kappa: float,
    branch: int,
    seed: float | None = None,
    a_ladder: Iterable[float] = (1e-2, 1e-3, 1e-4),
) -> SommerfeldComparison:
    """Follow a level along a decreasing ladder of ring radii and compare with Sommerfeld.

    The Dirac label is kappa_D = sign(E) round(lambda) at the smallest radius;
    the principal number is the one whose Sommerfeld level is nearest. The
    order is the slope of log|E - E_S| against log a.
    """
    a_values, energies, lambdas = [], [], []
    E = seed
    for a in a_ladder:
        scaled = params.with_radius(math.copysign(a, params.a or 1.0))
        state = solve_eigenvalue(scaled, kappa, branch, seed=E)
        E = state.E
        a_values.append(abs(a))
        energies.append(state.E)
        lambdas.append(state.lam)
    kappa_dirac = int(math.copysign(round(abs(lambdas[-1])), energies[-1] * lambdas[-1]))
    if kappa_dirac == 0:
        raise InvalidQuantumNumbersError(
            "The continued level has lambda near zero", lam=lambdas[-1]
        )
    n, reference = _nearest_sommerfeld(energies[-1], kappa_dirac, abs(params.gamma), params.m)
    deviations = [abs(e - reference) for e in energies]
    usable = [(a, d) for a, d in zip(a_values, deviations) if d > 0]
    order = math.nan
    if len(usable) >= 2:
        xs, ys = zip(*usable)
        order = float(np.polyfit(np.log(xs), np.log(ys), 1)[0])
    return SommerfeldComparison(
        kappa=kappa,
        branch=branch,
        kappa_dirac=kappa_dirac,
        n_principal=n,
        a_values=a_values,
        energies=energies,
        lambdas=lambdas,
        reference=reference,
        deviations=deviations,
        order=order,
    )


def eigenstate_residual(
    state: SeparatedState, n_r: int = 64, n_theta: int = 32
) -> dict[str, float]:
    """Residuals of H Psi = E Psi and of its C_hat partner with exact derivatives.

    The grid is symmetric under the sheet swap and stays inside half of R_max.
    """
    p = state.params
    gap = math.sqrt(p.m * p.m - state.E * state.E)
    grid = RadialThetaGrid(n_r, n_theta, r_scale=1.0 / gap, r_max=0.5 * state.r_max)
    psi, derivatives = state.to_grid(grid)
    partner = symmetry_apply(psi, "C_hat")
    partner_derivatives = tuple(
        -symmetry_apply(psi.with_values(d), "C_hat").values for d in derivatives
    )
    return {
        "H": residual_norm(psi, state.E, p, derivatives),
        "C_hat": residual_norm(partner, -state.E, p, partner_derivatives),
    }


def load_state(
    path: str | Path, model_hash: str | None = None, force: bool = False
) -> SeparatedState:
    """Read a state file written by the ``state`` subcommand.

    Raises:
        ConfigError: Not a state file, or its model hash differs from
            model_hash and force is False.
    """
    envelope = ResultEnvelope.load(path)
    if envelope.command != "state":
        raise ConfigError(
            f"{path} holds a '{envelope.command}' result, not a state", path=str(path)
        )
    stored = envelope.diagnostics.get("model_hash")
    if model_hash is not None and stored != model_hash:
        if not force:
            raise ConfigError(
                f"{path} was computed for different parameters (use --force to accept it)",
                stored=stored,
                active=model_hash,
            )
        logger.warning("Using %s although its parameters differ from the active ones", path)
    return SeparatedState.from_dict(envelope.payload)


# --- command line --------------------------------------------------------------------------

SPECTRUM_COLUMNS = ("E", "lambda", "kappa", "branch", "winding", "handedness", "residual")
_SPECTRUM_KEYS = (
    "kappa_list",
    "branches",
    "window",
    "winding_range",
    "samples",
    "tol",
    "max_levels",
    "workers",
    "residual",
)


def add_spectrum_arguments(parser: argparse.ArgumentParser) -> None:
    """Add spectrum command arguments to a parser."""
    add_model_arguments(parser)
    parser.add_argument("--kappa-list", help="Comma-separated kappa values (default: -0.5,0.5)")
    parser.add_argument("--branches", help="Comma-separated angular branches (default: -1,1)")
    parser.add_argument("--window", help="Energy window lo,hi inside (-m, m) (default: -1,1)")
    parser.add_argument("--winding-range", help="Inclusive winding range lo,hi")
    parser.add_argument("--samples", type=int, help="D(E) samples per cell (default: 16)")
    parser.add_argument("--tol", type=float, help=f"Energy tolerance (default: {TOL_E})")
    parser.add_argument("--max-levels", type=int, help="Cap on reported levels (default: 64)")
    parser.add_argument(
        "--workers", type=int, help=f"Worker threads (default: ${ENV_WORKERS} or min(4, cpus))"
    )
    parser.add_argument(
        "--residual", action="store_true", default=None, help="Compute eigenstate residuals"
    )
    add_common_arguments(parser)


def _pair(text: str | list | None, cast: Callable = float) -> tuple | None:
    if text is None:
        return None
    values = parse_float_list(text)
    if len(values) != 2:
        raise ConfigError(f"Expected two comma-separated values, got '{text}'")
    return cast(values[0]), cast(values[1])


def _render_spectrum(rows: list[dict[str, Any]]) -> str:
    if not rows:
        return "No levels found in the window."
    lines = [f"{'E':>20} {'lambda':>14} {'kappa':>6} {'branch':>6} {'winding':>7} {'hand':>4}"]
    for row in rows:
        lines.append(
            f"{row['E']:>20.15f} {row['lambda']:>14.9f} {row['kappa']:>6g} {row['branch']:>6d} "
            f"{row['winding']:>7d} {row['handedness']:>4d}"
        )
    return "\n".join(lines)


def run_spectrum(args: argparse.Namespace) -> None:
    """Execute the spectrum command with parsed arguments."""
    config = config_from_args(args, "spectrum", _SPECTRUM_KEYS)
    opts = config.section("spectrum")
    params = config.params
    tol_E = float(opts.get("tol") or config.tolerance("tol_E", TOL_E))
    skipped: list[SkippedLevel] = []
    states = spectrum_scan(
        params,
        parse_float_list(opts.get("kappa_list", "-0.5,0.5")),
        _pair(opts.get("window", "-1,1")),
        winding_range=_pair(opts.get("winding_range"), int),
        branches=[int(b) for b in parse_float_list(opts.get("branches", "-1,1"))],
        n_samples=int(opts.get("samples", 16)),
        workers=opts.get("workers"),
        max_levels=int(opts.get("max_levels", 64)),
        tol_E=tol_E,
        tol_match=config.tolerance("tol_match", TOL_MATCH),
        skipped=skipped,
    )
    rows = []
    for state in states:
        residual = eigenstate_residual(state)["H"] if opts.get("residual") else None
        row = {k: v for k, v in state.summary().items() if k != "params"}
        rows.append({**row, "residual": residual})
    envelope = ResultEnvelope(
        command="spectrum",
        config_hash=config.config_hash(),
        payload=rows,
        diagnostics={
            "handedness": handedness_summary(states),
            "model_hash": config.model_hash(),
            "skipped": [asdict(level) for level in skipped],
        },
        warnings=config.warnings + [level.message() for level in skipped],
    )
    emit_result(envelope, args, rows, SPECTRUM_COLUMNS, _render_spectrum(rows))


_ANGULAR_KEYS = ("energy", "kappa", "branch", "dense_nodes", "tables")


def add_angular_arguments(parser: argparse.ArgumentParser) -> None:
    """Add angular command arguments to a parser."""
    add_model_arguments(parser)
    parser.add_argument("--energy", type=float, help="Energy entering aE (default: 0)")
    parser.add_argument("--kappa", type=float, help="Azimuthal quantum number (default: -0.5)")
    parser.add_argument("--branch", type=int, help="Angular branch index (default: -1)")
    parser.add_argument(
        "--dense-nodes", type=int, help="Also run the dense collocation check with N nodes"
    )
    parser.add_argument(
        "--tables", action="store_true", default=None, help="Include Theta and ln S tables"
    )
    add_common_arguments(parser)


def run_angular(args: argparse.Namespace) -> None:
    """Execute the angular command with parsed arguments."""
    config = config_from_args(args, "angular", _ANGULAR_KEYS)
    opts = config.section("angular")
    p = config.params
    am, aE = p.a * p.m, p.a * float(opts.get("energy", 0.0))
    kappa = float(opts.get("kappa", -0.5))
    tables = bool(opts.get("tables"))
    solution = solve_angular(am, aE, kappa, int(opts.get("branch", -1)), tabulate=tables)
    payload = solution.to_dict(tables=tables)
    text = (
        f"lambda = {solution.lam:.15g}  "
        f"(am={am:g}, aE={aE:g}, kappa={kappa:g}, n={solution.branch})"
    )
    if opts.get("dense_nodes"):
        dense = angular_eigenvalues_dense(am, aE, kappa, int(opts["dense_nodes"]))
        nearest = float(dense[np.argmin(np.abs(dense - solution.lam))])
        difference = abs(nearest - solution.lam)
        payload["dense"] = {"nearest": nearest, "difference": difference}
        text += f"\ndense collocation: {nearest:.15g} (difference {difference:.3g})"
    envelope = ResultEnvelope(
        command="angular",
        config_hash=config.config_hash(),
        payload=payload,
        warnings=config.warnings,
    )
    emit_result(envelope, args, text=text)


_STATE_KEYS = ("kappa", "branch", "winding", "seed_energy", "grid", "grid_size")


def add_state_arguments(parser: argparse.ArgumentParser) -> None:
    """Add state command arguments to a parser."""
    add_model_arguments(parser)
    parser.add_argument("--kappa", type=float, help="Azimuthal quantum number (default: -0.5)")
    parser.add_argument("--branch", type=int, help="Angular branch index (default: -1)")
    parser.add_argument("--winding", type=int, help="Radial winding (default: nearest to the seed)")
    parser.add_argument(
        "--seed-energy", type=float, help="Starting energy (default: Sommerfeld level)"
    )
    parser.add_argument("--grid", help="Also write the bi-spinor to this grid container")
    parser.add_argument("--grid-size", help="Grid size n_r,n_theta (default: 64,32)")
    add_common_arguments(parser)


def run_state(args: argparse.Namespace) -> None:
    """Execute the state command: solve one level and write the separated-state file."""
    config = config_from_args(args, "state", _STATE_KEYS)
    opts = config.section("state")
    state = solve_eigenvalue(
        config.params,
        float(opts.get("kappa", -0.5)),
        int(opts.get("branch", -1)),
        winding=opts.get("winding"),
        seed=opts.get("seed_energy"),
        tol_E=config.tolerance("tol_E", TOL_E),
        tol_match=config.tolerance("tol_match", TOL_MATCH),
    )
    residuals = eigenstate_residual(state)
    if state.report is not None:
        state.report.residual_norms = residuals
    if opts.get("grid"):
        n_r, n_theta = _pair(opts.get("grid_size", "64,32"), int)
        gap = math.sqrt(config.params.m**2 - state.E**2)
        grid = RadialThetaGrid(n_r, n_theta, r_scale=1.0 / gap, r_max=0.5 * state.r_max)
        psi, _ = state.to_grid(grid)
        psi.metadata["config_hash"] = config.config_hash()
        psi.save(opts["grid"])
    envelope = ResultEnvelope(
        command="state",
        config_hash=config.config_hash(),
        payload=state.to_dict(tables=True),
        diagnostics={"model_hash": config.model_hash(), "residual_norms": residuals},
        warnings=config.warnings,
    )
    text = (
        f"E = {state.E:.15g}, lambda = {state.lam:.12g}, kappa = {state.kappa:g}, "
        f"branch = {state.branch}, winding = {state.winding}, residual = {residuals['H']:.2e}"
    )
    emit_result(envelope, args, text=text)
