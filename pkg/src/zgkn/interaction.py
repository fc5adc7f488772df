#!/usr/bin/env python3
"""Interaction energy-momentum of the ring and a point charge by field quadrature.

The cross terms of the field energy and momentum densities,

    4 pi P0  = int E_pt . E_KN d^3s,
    4 pi P_j = int (E_pt x B_KN)_j d^3s,

are integrated over both sheets with a thin torus of projected radius eps
removed around the ring, for a decreasing ladder of eps.

The ring potentials grow as d^(-1/2) at distance d from the ring while
phi_pt carries a d^(1/2) term there, so the flux of the integrand's vector
field through the torus surface stays finite as eps -> 0. On the double cover
that surface term equals minus half of the point-charge term, and the excised
volume integral alone tends to half the closed form. Each rung therefore also
integrates the torus surface term; volume minus surface is extrapolated to
eps -> 0 and compared with the closed forms Q' phi_KN(q_pt) and Q' A_KN(q_pt).

Quadrature layout in ring-centered coordinates (xi = r/|a|, eta = cos theta):

- a square patch |xi|, |eta| <= P around the ring, in polar coordinates with a
  log-radius rule starting at the exact excision boundary;
- rectangles in (arctan xi, eta) outside the patch, graded geometrically
  toward the point charge, its mirror point and the axis;
- the azimuth relative to the point charge, graded toward zero;
- the torus surface as the curve d = eps in the (xi, eta) plane, which winds
  once around the origin and so covers the ring's 4 pi of meridional angle.

Only the patch and the surface depend on eps; the outer region is computed once.

Example:
    >>> from zgkn.geometry import ModelParams, SpacetimePoint
    >>> from zgkn.interaction import interaction_P0
    >>> params = ModelParams(a=1.0, charge=1.0, point_charge=1.0)
    >>> q_pt = SpacetimePoint.from_ring_centered(2.0, 1.0, 0.0, 1.0)
    >>> result = interaction_P0(q_pt, params)
    >>> round(result.closed_form, 6)
    0.4
"""

import argparse
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Any

import numpy as np
from numpy.polynomial.legendre import leggauss
from numpy.typing import NDArray
from scipy import optimize

from .config import (
    add_common_arguments,
    add_model_arguments,
    config_from_args,
    default_workers,
    parse_float_list,
)
from .errors import ConfigError, QuadratureDivergenceError
from .fields import phi_kn, phi_pt_ring_centered, vector_potential
from .geometry import ModelParams, SpacetimePoint, check_off_ring
from .results import ResultEnvelope, emit_result

logger = logging.getLogger(__name__)

DEFAULT_EPS_LADDER = tuple(10.0 ** (-1.0 - 0.2 * k) for k in range(11))
SHEET_CHOICES = ("both", "+", "-")
QUANTITIES = ("P0", "Pj")
NOISE_FLOOR = 1e-9
TARGET_TOLERANCE = 1e-2
ORDER_RANGE = (0.7, 1.3)
FOUR_PI = 4.0 * math.pi


@lru_cache(maxsize=None)
def _legendre(n: int) -> tuple[NDArray, NDArray]:
    return leggauss(n)


def _gauss(lo: float, hi: float, n: int) -> tuple[NDArray, NDArray]:
    x, w = _legendre(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def _panels(breaks: list[float], n: int) -> tuple[NDArray, NDArray]:
    parts = [_gauss(lo, hi, n) for lo, hi in zip(breaks[:-1], breaks[1:]) if hi > lo]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _graded_breaks(
    lo: float, hi: float, levels_lo: int, levels_hi: int, ratio: float
) -> list[float]:
    """Panel breakpoints on [lo, hi] shrinking geometrically toward graded ends."""
    if levels_lo and levels_hi:
        mid = 0.5 * (lo + hi)
        return _graded_breaks(lo, mid, levels_lo, 0, ratio)[:-1] + _graded_breaks(
            mid, hi, 0, levels_hi, ratio
        )
    length = hi - lo
    if levels_lo:
        return [lo] + [lo + length * ratio**j for j in range(levels_lo, 0, -1)] + [hi]
    if levels_hi:
        return [lo] + [hi - length * ratio**j for j in range(1, levels_hi + 1)] + [hi]
    return [lo, 0.5 * (lo + hi), hi]


@dataclass(frozen=True)
class QuadratureConfig:
    """Excision ladder and quadrature resolution.

    Attributes:
        eps_ladder: Excision radii in units of |a|, strictly decreasing.
        patch: Half-width P of the (xi, eta) patch around the ring.
        n_radial: Log-radius Gauss nodes per patch ray.
        n_sector: Angular Gauss nodes in each of the eight patch sectors.
        n_panel: Gauss nodes per panel elsewhere.
        grading_ratio: Panel ratio toward the point charge and its mirror.
        grading_levels: Graded panels toward the point charge and its mirror.
        axis_levels: Graded panels toward eta = +-1.
        azimuth_ratio: Panel ratio toward the point charge's azimuth.
        azimuth_levels: Graded azimuth panels.
        fd_step: Relative step of the fourth-order differences of phi_pt.
        sheets: "both", or "+" / "-" to integrate a single sheet.
        workers: Worker threads (default from ZGKN_WORKERS).
    """

    eps_ladder: tuple[float, ...] = DEFAULT_EPS_LADDER
    patch: float = 0.75
    n_radial: int = 24
    n_sector: int = 8
    n_panel: int = 6
    grading_ratio: float = 0.2
    grading_levels: int = 6
    axis_levels: int = 3
    azimuth_ratio: float = 0.25
    azimuth_levels: int = 6
    fd_step: float = 5e-3
    sheets: str = "both"
    workers: int | None = None

    def __post_init__(self):
        ladder = tuple(float(e) for e in self.eps_ladder)
        object.__setattr__(self, "eps_ladder", ladder)
        if len(ladder) < 3:
            raise ConfigError("The eps ladder needs at least three values", eps_ladder=ladder)
        if any(e <= 0 for e in ladder) or any(b >= a for a, b in zip(ladder, ladder[1:])):
            raise ConfigError(
                "The eps ladder must be positive and strictly decreasing", eps_ladder=ladder
            )
        if not 0.0 < self.patch < 1.0:
            raise ConfigError("patch must lie in (0, 1)", patch=self.patch)
        if ladder[0] >= self.patch_clearance():
            raise ConfigError(
                "The largest excision reaches the patch boundary",
                eps=ladder[0],
                clearance=self.patch_clearance(),
            )
        if min(self.n_radial, self.n_sector, self.n_panel) < 2:
            raise ConfigError("Quadrature orders must be at least 2")
        if not 0.0 < self.grading_ratio < 1.0 or not 0.0 < self.azimuth_ratio < 1.0:
            raise ConfigError("Grading ratios must lie in (0, 1)")
        if not 0.0 < self.fd_step <= 0.1:
            raise ConfigError("fd_step must lie in (0, 0.1]", fd_step=self.fd_step)
        if self.sheets not in SHEET_CHOICES:
            choices = ", ".join(SHEET_CHOICES)
            raise ConfigError(f"sheets must be one of {choices}", sheets=self.sheets)

    def patch_clearance(self) -> float:
        """Smallest projected ring distance (units of |a|) on the patch boundary."""
        psi = np.linspace(0.0, 2.0 * math.pi, 257)[:-1]
        edge = self.patch / np.maximum(np.abs(np.cos(psi)), np.abs(np.sin(psi)))
        return float(np.min(_ring_distance(edge * np.cos(psi), edge * np.sin(psi))))

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["eps_ladder"] = list(self.eps_ladder)
        return data


def _ring_distance(xi: NDArray, eta: NDArray) -> NDArray:
    """Projected distance to the ring in units of |a|."""
    rho = np.sqrt(1.0 + xi * xi) * np.sqrt(np.clip(1.0 - eta * eta, 0.0, None))
    return np.hypot(rho - 1.0, xi * eta)


def _ring_distance_gradient(xi: float, eta: float) -> tuple[float, float]:
    """(d/dxi, d/deta) of the projected ring distance, off the ring and the axis."""
    root = math.sqrt(1.0 + xi * xi)
    q = math.sqrt(1.0 - eta * eta)
    rho = root * q
    d = math.hypot(rho - 1.0, xi * eta)
    d_xi = ((rho - 1.0) * xi * q / root + xi * eta * eta) / d
    d_eta = (-(rho - 1.0) * eta * root / q + xi * xi * eta) / d
    return d_xi, d_eta


def _excision_radius(c: float, s: float, eps: float, edge: float) -> float:
    """Polar radius along (cos, sin) = (c, s) at which the ring distance reaches eps."""
    return optimize.brentq(
        lambda r: float(_ring_distance(np.array(r * c), np.array(r * s))) - eps,
        1e-14,
        edge,
        xtol=1e-15,
    )


@dataclass(frozen=True)
class _Setup:
    A: float
    Q: float
    k: float
    Qprime: float
    xi_s: float
    eta_s: float
    fd_step: float

    @property
    def theta_s(self) -> float:
        return math.acos(self.eta_s)


@dataclass(frozen=True)
class _Cell:
    """Tensor block of area nodes times azimuth nodes; weights include dxi deta."""

    xi: NDArray
    eta: NDArray
    weight: NDArray
    delta: NDArray
    delta_weight: NDArray


def _pt_gradient(setup: _Setup, xi: NDArray, theta: NDArray, delta: NDArray, with_delta: bool):
    """Fourth-order differences of phi_pt in xi, theta and (optionally) the azimuth."""
    A = setup.A
    source = (setup.xi_s, setup.eta_s, 0.0)

    def f(x, t, d):
        return phi_pt_ring_centered(x, np.cos(t), d, source, setup.Qprime, A)

    st = np.sin(theta)
    eta = np.cos(theta)
    rho = np.sqrt(1.0 + xi * xi) * st
    rho_s = math.sqrt(1.0 + setup.xi_s**2) * math.sin(setup.theta_s)
    dz = xi * eta - setup.xi_s * setup.eta_s
    dist = np.sqrt(rho * rho + rho_s * rho_s - 2.0 * rho * rho_s * np.cos(delta) + dz * dz)
    base = setup.fd_step * np.minimum(np.minimum(np.hypot(xi, eta), dist), 1.0 + np.abs(xi))
    h_xi = base
    h_th = np.minimum(base, np.minimum(theta, math.pi - theta) / 3.0)

    def d4(g, h):
        return (g(-2.0 * h) - 8.0 * g(-h) + 8.0 * g(h) - g(2.0 * h)) / (12.0 * h)

    f_xi = d4(lambda dh: f(xi + dh, theta, delta), h_xi)
    f_th = d4(lambda dh: f(xi, theta + dh, delta), h_th)
    if not with_delta:
        return f_xi, f_th, None
    h_d = setup.fd_step * np.minimum(1.0, dist / np.maximum(rho, 1e-300))
    f_d = d4(lambda dh: f(xi, theta, delta + dh), h_d)
    return f_xi, f_th, f_d


def _kn_gradient(setup: _Setup, xi: NDArray, eta: NDArray, st: NDArray) -> tuple[NDArray, NDArray]:
    """(d_xi, d_theta) of phi_KN = (Q/A) xi/(xi^2 + eta^2)."""
    c = setup.Q / setup.A
    s4 = (xi * xi + eta * eta) ** 2
    g_xi = c * (eta * eta - xi * xi) / s4
    g_eta = -2.0 * c * xi * eta / s4
    return g_xi, -st * g_eta


def _dot(A: float, xi: NDArray, f: tuple, g: tuple) -> NDArray:
    """Meridional grad f . grad g times the volume element, per dxi deta dphi."""
    return A * ((1.0 + xi * xi) * (f[0] * g[0]) + f[1] * g[1])


def _cell_p0(setup: _Setup, cell: _Cell) -> tuple[float, float]:
    xi = cell.xi[:, None]
    eta = cell.eta[:, None]
    theta = np.arccos(eta)
    delta = cell.delta[None, :]
    f_xi, f_th, _ = _pt_gradient(setup, xi, theta, delta, with_delta=False)
    g = _kn_gradient(setup, xi, eta, np.sin(theta))
    g = (np.broadcast_to(g[0], f_xi.shape), np.broadcast_to(g[1], f_xi.shape))
    weights = (2.0 / FOUR_PI) * cell.weight[:, None] * cell.delta_weight[None, :]
    forward = _dot(setup.A, xi, (f_xi, f_th), g) * weights
    backward = _dot(setup.A, xi, g, (f_xi, f_th)) * weights
    return math.fsum(forward.ravel()), math.fsum(backward.ravel())


def _cell_pj(setup: _Setup, cell: _Cell) -> tuple[float, float]:
    xi = cell.xi[:, None]
    eta = cell.eta[:, None]
    theta = np.arccos(eta)
    delta = cell.delta[None, :]
    st = np.sin(theta)
    f_xi, f_th, f_d = _pt_gradient(setup, xi, theta, delta, with_delta=True)
    s4 = (xi * xi + eta * eta) ** 2
    a_xi_over_st = setup.k * st * (eta * eta - xi * xi) / s4
    a_eta = -2.0 * setup.k * xi * eta * (1.0 + xi * xi) / s4
    root = np.sqrt(1.0 + xi * xi)
    cos_term = np.cos(delta) * ((1.0 + xi * xi) * f_xi * a_xi_over_st - f_th * a_eta) / root
    sin_term = np.sin(delta) * f_d * (xi * a_xi_over_st * st - eta * a_eta) / (root * st)
    weights = (2.0 / FOUR_PI) * cell.weight[:, None] * cell.delta_weight[None, :]
    value = math.fsum(((cos_term - sin_term) * weights).ravel())
    return value, value


@dataclass(frozen=True)
class _Surface:
    """Nodes on the curve d = eps; t_xi, t_eta are d(xi, eta)/dpsi times the psi weight."""

    xi: NDArray
    eta: NDArray
    t_xi: NDArray
    t_eta: NDArray
    delta: NDArray
    delta_weight: NDArray


def _surface_flux(surface: _Surface, v_xi: NDArray, v_eta: NDArray) -> float:
    """Torus-surface term, the flux into the torus of sqrt(g) V, over 4 pi."""
    line = v_xi * surface.t_eta[:, None] - v_eta * surface.t_xi[:, None]
    weights = (2.0 / FOUR_PI) * surface.delta_weight[None, :]
    return -math.fsum((line * weights).ravel())


def _surface_p0(setup: _Setup, surface: _Surface) -> float:
    """Surface term of phi_KN grad(phi_pt)."""
    xi = surface.xi[:, None]
    eta = surface.eta[:, None]
    theta = np.arccos(eta)
    f_xi, f_th, _ = _pt_gradient(setup, xi, theta, surface.delta[None, :], with_delta=False)
    g = setup.Q * xi / (xi * xi + eta * eta)
    return _surface_flux(surface, g * (1.0 + xi * xi) * f_xi, -g * np.sin(theta) * f_th)


def _surface_pj(setup: _Setup, surface: _Surface) -> float:
    """Surface term of A x (grad(phi_pt) x e) + A (e . grad(phi_pt)), e azimuthal at the source."""
    xi = surface.xi[:, None]
    eta = surface.eta[:, None]
    theta = np.arccos(eta)
    delta = surface.delta[None, :]
    st = np.sin(theta)
    f_xi, f_th, f_d = _pt_gradient(setup, xi, theta, delta, with_delta=True)
    # |a| times the azimuthal component of the vector potential.
    amp = setup.k * xi * st / ((xi * xi + eta * eta) * np.sqrt(1.0 + xi * xi))
    c, s = np.cos(delta), np.sin(delta)
    v_xi = amp * (c * (1.0 + xi * xi) * f_xi - s * xi * f_d)
    v_eta = amp * (-c * st * f_th + s * eta * f_d)
    return _surface_flux(surface, v_xi, v_eta)


class _Quadrature:
    """Cell layout for one point charge, ring and configuration."""

    def __init__(self, setup: _Setup, cfg: QuadratureConfig):
        self.setup = setup
        self.cfg = cfg
        P = cfg.patch
        if abs(setup.xi_s) <= P and abs(setup.eta_s) <= P:
            raise ConfigError(
                "The point charge lies inside the ring patch; move it away from the ring",
                xi=setup.xi_s,
                eta=setup.eta_s,
                patch=P,
            )
        self.near = 0.5 * max(1.0, abs(setup.xi_s))
        self.graded_azimuth = _panels(
            [0.0]
            + [math.pi * cfg.azimuth_ratio**j for j in range(cfg.azimuth_levels, 0, -1)]
            + [math.pi],
            cfg.n_panel,
        )
        self.plain_azimuth = _panels([0.0, 0.5 * math.pi, math.pi], cfg.n_panel + 2)

    def _azimuth(self, xi_lo: float, xi_hi: float, eta_lo: float, eta_hi: float):
        s = self.setup
        for x, e in ((s.xi_s, s.eta_s), (-s.xi_s, -s.eta_s)):
            dx = max(xi_lo - x, 0.0, x - xi_hi)
            de = max(eta_lo - e, 0.0, e - eta_hi)
            if math.hypot(dx, de) < self.near:
                return self.graded_azimuth
        return self.plain_azimuth

    def _keeps(self, xi_sign: float) -> bool:
        if self.cfg.sheets == "+":
            return xi_sign > 0
        if self.cfg.sheets == "-":
            return xi_sign < 0
        return True

    def outer_cells(self) -> list[_Cell]:
        cfg, s = self.cfg, self.setup
        P = cfg.patch
        u_p = math.atan(P)
        u_s = math.atan(s.xi_s)
        source_u = {round(u_s, 14), round(-u_s, 14)}
        source_eta = {round(s.eta_s, 14), round(-s.eta_s, 14)}
        u_cuts = sorted({-0.5 * math.pi, -u_p, 0.0, u_p, 0.5 * math.pi} | source_u)
        eta_cuts = sorted({-1.0, -P, P, 1.0} | source_eta)

        def levels(value: float, graded: set, axis: bool) -> int:
            if round(value, 14) in graded:
                return cfg.grading_levels
            return cfg.axis_levels if axis and abs(value) == 1.0 else 0

        cells = []
        for u_lo, u_hi in zip(u_cuts[:-1], u_cuts[1:]):
            if not self._keeps(0.5 * (u_lo + u_hi)):
                continue
            u_nodes, u_w = _panels(
                _graded_breaks(
                    u_lo,
                    u_hi,
                    levels(u_lo, source_u, False),
                    levels(u_hi, source_u, False),
                    cfg.grading_ratio,
                ),
                cfg.n_panel,
            )
            xi = np.tan(u_nodes)
            xi_w = u_w * (1.0 + xi * xi)
            for e_lo, e_hi in zip(eta_cuts[:-1], eta_cuts[1:]):
                if -u_p <= u_lo and u_hi <= u_p and -P <= e_lo and e_hi <= P:
                    continue
                e_nodes, e_w = _panels(
                    _graded_breaks(
                        e_lo,
                        e_hi,
                        levels(e_lo, source_eta, True),
                        levels(e_hi, source_eta, True),
                        cfg.grading_ratio,
                    ),
                    cfg.n_panel,
                )
                X, E = np.meshgrid(xi, e_nodes, indexing="ij")
                W = np.outer(xi_w, e_w)
                xi_lo = -math.inf if u_lo <= -0.5 * math.pi else math.tan(u_lo)
                xi_hi = math.inf if u_hi >= 0.5 * math.pi else math.tan(u_hi)
                delta, delta_w = self._azimuth(xi_lo, xi_hi, e_lo, e_hi)
                cells.append(_Cell(X.ravel(), E.ravel(), W.ravel(), delta, delta_w))
        return cells

    def patch_cells(self, eps: float) -> list[_Cell]:
        """Eight polar sectors from the excision boundary d = eps to the patch edge."""
        cfg = self.cfg
        P = cfg.patch
        delta, delta_w = self._azimuth(-P, P, -P, P)
        cells = []
        for sector in range(8):
            lo, hi = sector * math.pi / 4.0, (sector + 1) * math.pi / 4.0
            if not self._keeps(math.cos(0.5 * (lo + hi))):
                continue
            psi, psi_w = _gauss(lo, hi, cfg.n_sector)
            xs, es, ws = [], [], []
            for angle, weight in zip(psi, psi_w):
                c, s = math.cos(angle), math.sin(angle)
                edge = P / max(abs(c), abs(s))
                inner = _excision_radius(c, s, eps, edge)
                t, t_w = _gauss(math.log(inner), math.log(edge), cfg.n_radial)
                radius = np.exp(t)
                xs.append(radius * c)
                es.append(radius * s)
                ws.append(radius * radius * t_w * weight)
            cells.append(
                _Cell(np.concatenate(xs), np.concatenate(es), np.concatenate(ws), delta, delta_w)
            )
        return cells

    def surface(self, eps: float) -> _Surface:
        """The torus surface d = eps, counterclockwise in (xi, eta), on the kept sheets."""
        cfg = self.cfg
        P = cfg.patch
        delta, delta_w = self._azimuth(-P, P, -P, P)
        xs, es, txs, tes = [], [], [], []
        for sector in range(8):
            lo, hi = sector * math.pi / 4.0, (sector + 1) * math.pi / 4.0
            if not self._keeps(math.cos(0.5 * (lo + hi))):
                continue
            psi, psi_w = _gauss(lo, hi, cfg.n_sector)
            for angle, weight in zip(psi, psi_w):
                c, s = math.cos(angle), math.sin(angle)
                r = _excision_radius(c, s, eps, P / max(abs(c), abs(s)))
                xi, eta = r * c, r * s
                d_xi, d_eta = _ring_distance_gradient(xi, eta)
                # r(psi) follows the level set: dr/dpsi = -d_psi/d_r.
                dr = -r * (d_eta * c - d_xi * s) / (d_xi * c + d_eta * s)
                xs.append(xi)
                es.append(eta)
                txs.append((dr * c - r * s) * weight)
                tes.append((dr * s + r * c) * weight)
        return _Surface(
            np.array(xs), np.array(es), np.array(txs), np.array(tes), delta, delta_w
        )


@dataclass
class InteractionResult:
    """One quantity's excision ladder, its extrapolant and the closed form.

    Attributes:
        quantity: "P0" or "Pj".
        source: Ring-centered (xi, eta, phi) of the point charge.
        sheets: Which sheets were integrated.
        ladder: (eps, volume integral) pairs, eps in units of |a|.
        outer: Contribution of the eps-independent outer region.
        extrapolated: Volume minus torus surface term, extrapolated to eps -> 0.
        closed_form: Q' phi_KN(q_pt), or the azimuthal component of Q' A(q_pt).
        abs_error: |extrapolated - closed_form|.
        rel_error: abs_error/|closed_form| (NaN when the closed form vanishes).
        order: Measured convergence exponent of the volume ladder in eps.
        surface_ladder: (eps, torus surface term) pairs.
        volume: Extrapolant of the volume ladder alone, half the closed form.
        surface: Extrapolant of the surface ladder.
        direction: Unit vector the Pj value refers to (azimuthal at the source).
        labeling_symmetric: P0 only, bit-level equality of both labelings.
    """

    quantity: str
    source: tuple[float, float, float]
    sheets: str
    ladder: list[tuple[float, float]]
    outer: float
    extrapolated: float
    closed_form: float
    abs_error: float
    rel_error: float
    order: float
    surface_ladder: list[tuple[float, float]] = field(default_factory=list)
    volume: float = math.nan
    surface: float = 0.0
    direction: list[float] | None = None
    labeling_symmetric: bool | None = None
    config: dict[str, Any] = field(default_factory=dict)

    @property
    def vector(self) -> NDArray:
        """Pj as a projected Cartesian vector."""
        if self.direction is None:
            raise ConfigError("Only Pj results have a vector form")
        return self.extrapolated * np.asarray(self.direction)

    def within(self, tolerance: float = TARGET_TOLERANCE) -> bool:
        if math.isnan(self.rel_error):
            return self.abs_error <= tolerance * max(abs(v) for _, v in self.ladder) + 1e-12
        return self.rel_error <= tolerance

    def to_dict(self) -> dict[str, Any]:
        data = {
            "quantity": self.quantity,
            "source": list(self.source),
            "sheets": self.sheets,
            "raw_ladder": [{"eps": e, "value": v} for e, v in self.ladder],
            "outer": self.outer,
            "extrapolated": self.extrapolated,
            "closed_form": self.closed_form,
            "abs_error": self.abs_error,
            "rel_error": None if math.isnan(self.rel_error) else self.rel_error,
            "order": None if math.isnan(self.order) else self.order,
            "surface_ladder": [{"eps": e, "value": v} for e, v in self.surface_ladder],
            "volume": None if math.isnan(self.volume) else self.volume,
            "surface": self.surface,
            "config": self.config,
        }
        if self.direction is not None:
            data["direction"] = self.direction
            data["vector"] = self.vector.tolist()
        if self.labeling_symmetric is not None:
            data["labeling_symmetric"] = self.labeling_symmetric
        return data


def richardson_sqrt(eps: list[float], values: list[float]) -> float:
    """Extrapolate the last three values to eps -> 0 assuming c0 + c1 h + c2 h^2, h = sqrt(eps)."""
    h = np.sqrt(np.asarray(eps[-3:], dtype=float))
    matrix = np.vander(h, 3, increasing=True)
    return float(np.linalg.solve(matrix, np.asarray(values[-3:], dtype=float))[0])


def convergence_order(eps: list[float], values: list[float], limit: float) -> float:
    """Slope of log|value - limit| against log eps over the ladder head.

    The last three rungs define the extrapolant and are left out; differences
    below the noise floor are ignored. NaN when fewer than two rungs remain.
    """
    floor = NOISE_FLOOR * max(abs(v) for v in values)
    pairs = [
        (math.log(e), math.log(abs(v - limit)))
        for e, v in zip(eps[:-3], values[:-3])
        if abs(v - limit) > floor
    ]
    if len(pairs) < 2:
        return math.nan
    x, y = zip(*pairs)
    return float(np.polyfit(x, y, 1)[0])


def _check_monotone(eps: list[float], values: list[float], quantity: str) -> None:
    floor = NOISE_FLOOR * max(abs(v) for v in values)
    steps = [b - a for a, b in zip(values, values[1:]) if abs(b - a) > floor]
    if steps and not (all(s > 0 for s in steps) or all(s < 0 for s in steps)):
        raise QuadratureDivergenceError(
            f"The {quantity} excision ladder does not converge monotonically",
            ladder=[[e, v] for e, v in zip(eps, values)],
        )


def _setup(q_pt: SpacetimePoint, params: ModelParams, cfg: QuadratureConfig) -> _Setup:
    a = params.a
    if a == 0:
        raise ConfigError("The interaction quadrature needs a ring of non-zero radius")
    check_off_ring(q_pt.r, q_pt.theta, a)
    A = abs(a)
    return _Setup(
        A=A,
        Q=params.charge,
        k=params.ring_current * math.pi * A,
        Qprime=params.point_charge,
        xi_s=q_pt.r / A,
        eta_s=math.cos(q_pt.theta),
        fd_step=cfg.fd_step,
    )


def _integrate(q_pt: SpacetimePoint, params: ModelParams, cfg: QuadratureConfig, quantity: str):
    setup = _setup(q_pt, params, cfg)
    layout = _Quadrature(setup, cfg)
    kernel = _cell_p0 if quantity == "P0" else _cell_pj
    surface_kernel = _surface_p0 if quantity == "P0" else _surface_pj
    outer_cells = layout.outer_cells()
    patch_cells = [layout.patch_cells(e) for e in cfg.eps_ladder]
    surfaces = [layout.surface(e) for e in cfg.eps_ladder]
    workers = cfg.workers or default_workers()
    logger.info(
        "%s quadrature: %d outer cells, %d patch cells per rung, %d rungs",
        quantity,
        len(outer_cells),
        len(patch_cells[0]),
        len(cfg.eps_ladder),
    )
    with ThreadPoolExecutor(max_workers=workers) as pool:
        outer = list(pool.map(lambda c: kernel(setup, c), outer_cells))
        rungs = [list(pool.map(lambda c: kernel(setup, c), cells)) for cells in patch_cells]
        surface_values = list(pool.map(lambda s: surface_kernel(setup, s), surfaces))
    outer_sum = math.fsum(v for v, _ in outer)
    outer_mirror = math.fsum(v for _, v in outer)
    values = [outer_sum + math.fsum(v for v, _ in rung) for rung in rungs]
    mirrored = [outer_mirror + math.fsum(v for _, v in rung) for rung in rungs]
    symmetric = all(a == b for a, b in zip(values, mirrored))
    for e, v, s in zip(cfg.eps_ladder, values, surface_values):
        logger.debug("%s eps=%.3e volume=%.12g surface=%.12g", quantity, e, v, s)
    return setup, outer_sum, values, surface_values, symmetric


def _finish(
    quantity: str,
    q_pt: SpacetimePoint,
    setup: _Setup,
    cfg: QuadratureConfig,
    outer: float,
    values: list[float],
    surface_values: list[float],
    closed: float,
    **extra: Any,
) -> InteractionResult:
    eps = list(cfg.eps_ladder)
    if cfg.sheets == "both":
        _check_monotone(eps, values, quantity)
    volume = richardson_sqrt(eps, values)
    surface = richardson_sqrt(eps, surface_values)
    limit = volume - surface
    abs_error = abs(limit - closed)
    rel_error = abs_error / abs(closed) if closed != 0 else math.nan
    order = convergence_order(eps, values, volume)
    logger.info(
        "%s volume %.10g, surface %.10g, extrapolated %.10g, closed form %.10g, order %.3g",
        quantity,
        volume,
        surface,
        limit,
        closed,
        order,
    )
    return InteractionResult(
        quantity=quantity,
        source=(setup.xi_s, setup.eta_s, q_pt.phi),
        sheets=cfg.sheets,
        ladder=list(zip(eps, values)),
        outer=outer,
        extrapolated=limit,
        closed_form=closed,
        abs_error=abs_error,
        rel_error=rel_error,
        order=order,
        surface_ladder=list(zip(eps, surface_values)),
        volume=volume,
        surface=surface,
        config=cfg.to_dict(),
        **extra,
    )


def interaction_P0(
    q_pt: SpacetimePoint, params: ModelParams, cfg: QuadratureConfig | None = None
) -> InteractionResult:
    """Interaction energy (1/4 pi) int E_pt . E_KN over the excised double-sheeted space.

    The extrapolant is the volume ladder minus the torus surface term; the
    volume ladder alone is reported as ``volume`` and tends to half of
    Q' phi_KN(q_pt).

    Raises:
        RingPointError: q_pt is on the ring.
        ConfigError: q_pt lies inside the ring patch.
        QuadratureDivergenceError: The ladder is not monotone.
    """
    cfg = cfg or QuadratureConfig()
    setup, outer, values, surface_values, symmetric = _integrate(q_pt, params, cfg, "P0")
    closed = params.point_charge * float(phi_kn(setup.xi_s, setup.eta_s, setup.Q, setup.A))
    return _finish(
        "P0",
        q_pt,
        setup,
        cfg,
        outer,
        values,
        surface_values,
        closed,
        labeling_symmetric=symmetric,
    )


def interaction_Pj(
    q_pt: SpacetimePoint, params: ModelParams, cfg: QuadratureConfig | None = None
) -> InteractionResult:
    """Interaction momentum (1/4 pi) int E_pt x B_KN, azimuthal at the point charge.

    The meridional components vanish by axisymmetry; the value is the
    component along the azimuthal unit vector at q_pt.
    """
    cfg = cfg or QuadratureConfig()
    setup, outer, values, surface_values, _ = _integrate(q_pt, params, cfg, "Pj")
    direction = [-math.sin(q_pt.phi), math.cos(q_pt.phi), 0.0]
    closed = params.point_charge * float(np.dot(vector_potential(q_pt, params), direction))
    return _finish(
        "Pj", q_pt, setup, cfg, outer, values, surface_values, closed, direction=direction
    )


def interaction_report(
    q_pt: SpacetimePoint,
    params: ModelParams,
    cfg: QuadratureConfig | None = None,
    quantities: tuple[str, ...] = QUANTITIES,
) -> dict[str, InteractionResult]:
    """Run the requested quantities for one point charge."""
    unknown = [q for q in quantities if q not in QUANTITIES]
    if unknown:
        raise ConfigError(f"Unknown quantities: {', '.join(unknown)}", choices=list(QUANTITIES))
    runners = {"P0": interaction_P0, "Pj": interaction_Pj}
    return {q: runners[q](q_pt, params, cfg) for q in quantities}


def source_point(values: list[float], a: float) -> SpacetimePoint:
    """Point charge from xi,eta,phi or xi,eta,phi,sheet (the sheet sets the sign of xi)."""
    if len(values) not in (3, 4):
        raise ConfigError("--qpt takes xi,eta,phi or xi,eta,phi,sheet", qpt=values)
    xi, eta, phi = values[:3]
    if len(values) == 4:
        if values[3] not in (1.0, -1.0):
            raise ConfigError("The sheet must be +1 or -1", sheet=values[3])
        xi = values[3] * abs(xi)
    if a == 0:
        raise ConfigError("The ring-centered chart needs a != 0")
    return SpacetimePoint(0.0, xi * abs(a), math.acos(max(-1.0, min(1.0, eta))), phi)


# --- command line --------------------------------------------------------------------------

INTERACTION_COLUMNS = ("quantity", "eps", "value")
_INTERACTION_KEYS = ("qpt", "eps_ladder", "target_check", "quantity", "sheets", "workers")


def add_interaction_arguments(parser: argparse.ArgumentParser) -> None:
    """Add interaction command arguments to a parser."""
    add_model_arguments(parser)
    parser.add_argument(
        "--qpt", help="Point charge xi,eta,phi[,sheet] in ring-centered coordinates"
    )
    parser.add_argument("--eps-ladder", help="Excision radii in units of |a|, decreasing")
    parser.add_argument(
        "--quantity",
        choices=["P0", "Pj", "both"],
        help="Which quantity to integrate (default: both)",
    )
    parser.add_argument("--sheets", choices=list(SHEET_CHOICES), help="Integrate one sheet or both")
    parser.add_argument("--workers", type=int, help="Worker threads")
    # argparse %-expands help strings.
    percent = f"{TARGET_TOLERANCE:.0%}".replace("%", "%%")
    parser.add_argument(
        "--target-check",
        action="store_true",
        default=None,
        help=f"Fail unless the extrapolants match the closed forms within {percent}",
    )
    add_common_arguments(parser)


def run_interaction(args: argparse.Namespace) -> None:
    """Execute the interaction command with parsed arguments."""
    config = config_from_args(args, "interaction", _INTERACTION_KEYS)
    opts = config.section("interaction")
    if not opts.get("qpt"):
        raise ConfigError("interaction needs --qpt")
    q_pt = source_point(parse_float_list(opts["qpt"]), config.params.a)
    cfg_values: dict[str, Any] = {
        "sheets": opts.get("sheets", "both"),
        "workers": opts.get("workers"),
    }
    if opts.get("eps_ladder"):
        cfg_values["eps_ladder"] = tuple(parse_float_list(opts["eps_ladder"]))
    cfg = QuadratureConfig(**cfg_values)
    choice = opts.get("quantity", "both")
    quantities = QUANTITIES if choice == "both" else (choice,)
    results = interaction_report(q_pt, config.params, cfg, quantities)

    if opts.get("target_check"):
        failed = [r for r in results.values() if not r.within()]
        if failed:
            raise QuadratureDivergenceError(
                "Extrapolants miss the closed forms",
                results={r.quantity: r.to_dict() for r in failed},
            )
    rows = [
        {"quantity": r.quantity, "eps": e, "value": v}
        for r in results.values()
        for e, v in r.ladder
    ]
    envelope = ResultEnvelope(
        command="interaction",
        config_hash=config.config_hash(),
        payload={q: r.to_dict() for q, r in results.items()},
        diagnostics={"model_hash": config.model_hash()},
        warnings=config.warnings,
    )
    lines = []
    for r in results.values():
        rel = "n/a" if math.isnan(r.rel_error) else f"{r.rel_error:.2e}"
        lines.append(
            f"{r.quantity}: extrapolated {r.extrapolated:.10g} (volume {r.volume:.10g}, "
            f"surface {r.surface:.10g}), closed form {r.closed_form:.10g}, "
            f"rel. error {rel}, order {r.order:.3g}"
        )
    emit_result(envelope, args, rows, INTERACTION_COLUMNS, "\n".join(lines))
