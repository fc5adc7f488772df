#!/usr/bin/env python3
"""Electromagnetic potentials and fields on the zGKN spacetime.

The ring carries the Appell-Sommerfeld fields: an electric monopole of charge
Q on the r > 0 sheet and -Q on the r < 0 sheet, plus a magnetic dipole. The
generalized (KN-anomalous) potential allows a ring current I with I pi a != Q.
A point charge Q' anywhere on the double-sheeted space has the closed-form
potential phi_pt in peripolar coordinates.

Sign conventions: E = -grad(phi) and B = curl(A), with the Euclidean vector
potential A = A_phi grad(phi_azimuth). Vectors are returned in the projected
Cartesian basis.

Example:
    >>> from zgkn.fields import phi_kn, psi_kn
    >>> phi_kn(1.0, 0.0, Q=1.0, a=1.0)
    1.0
    >>> psi_kn(0.0, 1.0, Q=2.0, a=1.0)
    2.0
"""

import argparse
import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .config import add_common_arguments, add_model_arguments, config_from_args, parse_float_list
from .errors import CoincidentPointsError, ConfigError, RingPointError
from .geometry import (
    TWO_PI,
    ModelParams,
    SpacetimePoint,
    _scalar_or_array,
    check_off_ring,
    peripolar_from_point,
)
from .results import ResultEnvelope, emit_result, rows_to_csv

logger = logging.getLogger(__name__)

# Guard band for the arcsin argument in phi_pt.
ASIN_GUARD = 1e-14
COINCIDENCE_TOLERANCE = 1e-13


@dataclass(frozen=True)
class FourPotential:
    """Components A_mu tagged with their basis.

    Attributes:
        components: Array (A_0, A_1, A_2, A_3).
        basis: "coordinate" for BL (t, r, theta, phi), "frame" for the Cartan frame.
    """

    components: NDArray
    basis: str = "coordinate"

    def __post_init__(self):
        if self.basis not in ("coordinate", "frame"):
            raise ConfigError("basis must be 'coordinate' or 'frame'", basis=self.basis)

    def __getitem__(self, index: int) -> float:
        return float(self.components[index])

    def to_dict(self) -> dict[str, Any]:
        return {"basis": self.basis, "components": [float(c) for c in self.components]}


@dataclass
class FieldSample:
    """Electric and magnetic field at a point, projected Cartesian components."""

    point: SpacetimePoint
    E: NDArray = field(default_factory=lambda: np.zeros(3))
    B: NDArray = field(default_factory=lambda: np.zeros(3))

    def to_dict(self) -> dict[str, Any]:
        return {
            "point": self.point.to_dict(),
            "E": [float(c) for c in self.E],
            "B": [float(c) for c in self.B],
        }


def _check_ring_centered(xi: NDArray, eta: NDArray) -> None:
    if np.any((xi == 0) & (eta == 0)):
        raise RingPointError("(xi, eta) = (0, 0) is the ring")


def phi_kn(xi: ArrayLike, eta: ArrayLike, Q: float, a: float) -> Any:
    """Electric potential of the ring, (Q/a) xi/(xi^2 + eta^2).

    Odd under the toggle (xi, eta) -> (-xi, -eta); behaves as Q/(a xi) for
    large xi.
    """
    if a == 0:
        raise ConfigError("The ring-centered chart needs a != 0")
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    _check_ring_centered(xi, eta)
    return _scalar_or_array((Q / a) * xi / (xi * xi + eta * eta))


def psi_kn(xi: ArrayLike, eta: ArrayLike, Q: float, a: float) -> Any:
    """Magnetic scalar potential of the ring, (Q/a) eta/(xi^2 + eta^2).

    Only valid away from the disc; B = -grad(psi_kn) in the far zone.
    """
    if a == 0:
        raise ConfigError("The ring-centered chart needs a != 0")
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    _check_ring_centered(xi, eta)
    return _scalar_or_array((Q / a) * eta / (xi * xi + eta * eta))


def akn_gen(p: SpacetimePoint, Q: float, I: float, a: float) -> FourPotential:  # noqa: E741
    """Generalized Kerr-Newman potential -r/|rho|^2 (Q dt - I pi a^2 sin^2 theta dphi).

    Reduces to the pure KN potential when I pi a = Q.
    """
    check_off_ring(p.r, p.theta, a)
    rr = p.r * p.r + (a * math.cos(p.theta)) ** 2
    a_t = -Q * p.r / rr
    a_phi = I * math.pi * a * a * p.r * math.sin(p.theta) ** 2 / rr
    return FourPotential(np.array([a_t, 0.0, 0.0, a_phi]), basis="coordinate")


def atilde_components(
    r: ArrayLike, theta: ArrayLike, Q: float, I: float, a: float  # noqa: E741
) -> tuple:
    """Vectorized (A~_0, A~_2); the caller keeps (r, theta) off the ring."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    st = np.sin(theta)
    rho = np.sqrt(r * r + (a * np.cos(theta)) ** 2)
    w = np.hypot(r, a)
    anomaly = Q - I * math.pi * a
    a0 = -Q * r / (rho * w) - anomaly * a * a * r * st * st / (w * rho**3)
    a2 = -anomaly * a * r * st / rho**3
    return _scalar_or_array(a0), _scalar_or_array(a2)


def atilde(p: SpacetimePoint, Q: float, I: float, a: float) -> FourPotential:  # noqa: E741
    """Frame components of the generalized potential.

    Only A~_0 and A~_2 are non-zero; A~_2 vanishes in the separable case
    Q = I pi a.
    """
    check_off_ring(p.r, p.theta, a)
    a0, a2 = atilde_components(p.r, p.theta, Q, I, a)
    return FourPotential(np.array([a0, 0.0, a2, 0.0]), basis="frame")


def _bl_basis(r: float, theta: float, phi: float, a: float) -> tuple[NDArray, NDArray, NDArray]:
    """Projected images of d/dr, d/dtheta and the azimuthal unit vector."""
    w = math.hypot(r, a)
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(phi), math.cos(phi)
    dw = r / w if w > 0 else 0.0
    d_r = np.array([dw * st * cp, dw * st * sp, ct])
    d_theta = np.array([w * ct * cp, w * ct * sp, -r * st])
    phi_hat = np.array([-sp, cp, 0.0])
    return d_r, d_theta, phi_hat


def _ring_fields(
    p: SpacetimePoint, Q: float, I: float, a: float  # noqa: E741
) -> tuple[NDArray, NDArray]:
    r, theta = p.r, p.theta
    st, ct = math.sin(theta), math.cos(theta)
    rr = r * r + (a * ct) ** 2
    w2 = r * r + a * a
    d_r, d_theta, phi_hat = _bl_basis(r, theta, p.phi, a)
    # BL coordinates are orthogonal: grad f = f_r d_r/g_rr + f_theta d_theta/g_thth.
    g_rr = rr / w2
    g_thth = rr

    dphi_dr = Q * ((a * ct) ** 2 - r * r) / rr**2
    dphi_dtheta = 2.0 * Q * r * a * a * ct * st / rr**2
    E = -(dphi_dr * d_r / g_rr + dphi_dtheta * d_theta / g_thth)

    # grad(A_phi)/sin(theta) keeps the axis regular.
    k = I * math.pi * a * a
    da_dr = k * st * (rr - 2.0 * r * r) / rr**2
    da_dtheta = 2.0 * k * r * ct * w2 / rr**2
    grad = da_dr * d_r / g_rr + da_dtheta * d_theta / g_thth
    B = np.cross(grad, phi_hat) / math.sqrt(w2) if w2 > 0 else np.zeros(3)
    return E, B


def magnetic_moment(params: ModelParams) -> float:
    """Ring magnetic moment I pi a^2."""
    return params.ring_current * math.pi * params.a**2


def anomalous_moment(params: ModelParams) -> float:
    """KN-anomalous part I pi a^2 - Q a of the magnetic moment."""
    return magnetic_moment(params) - params.charge * params.a


def vector_potential(p: SpacetimePoint, params: ModelParams) -> NDArray:
    """Euclidean vector potential A_phi grad(phi) in the projected Cartesian basis."""
    a = params.a
    check_off_ring(p.r, p.theta, a)
    rr = p.r * p.r + (a * math.cos(p.theta)) ** 2
    w = math.hypot(p.r, a)
    if w == 0:
        return np.zeros(3)
    k = params.ring_current * math.pi * a * a
    magnitude = k * p.r * math.sin(p.theta) / (rr * w)
    return magnitude * np.array([-math.sin(p.phi), math.cos(p.phi), 0.0])


def _peripolar_arrays(xi: NDArray, eta: NDArray, phi: NDArray, A: float) -> tuple:
    """Vectorized peripolar (zeta, chi, phi) from ring-centered xi = r/|a|."""
    rho = A * np.sqrt(1.0 + xi * xi) * np.sqrt(np.clip(1.0 - eta * eta, 0.0, None))
    z = A * xi * eta
    d1sq = (rho - A) ** 2 + z * z
    d2sq = (rho + A) ** 2 + z * z
    with np.errstate(divide="ignore"):
        zeta = 0.5 * np.log(d2sq / d1sq)
    chi = np.arctan2(2.0 * A * z, rho * rho + z * z - A * A)
    chi = np.where(xi < 0, chi + TWO_PI, chi)
    chi = np.where(xi == 0, np.where(eta > 0, math.pi, -math.pi), chi)
    return zeta, chi, phi, rho, z


def _branch_bracket(zeta, chi, phi, zeta_pt, chi_pt, phi_pt):
    cosh_theta = np.cosh(zeta) * np.cosh(zeta_pt) - np.sinh(zeta) * np.sinh(zeta_pt) * np.cos(
        phi - phi_pt
    )
    cosh_half = np.sqrt(np.maximum(0.5 * (cosh_theta + 1.0), 1.0))
    arg = np.cos(0.5 * (chi - chi_pt)) / cosh_half
    arg = np.clip(arg, -1.0 + ASIN_GUARD, 1.0 - ASIN_GUARD)
    return 0.5 + np.arcsin(arg) / math.pi


def phi_pt_ring_centered(
    xi: ArrayLike,
    eta: ArrayLike,
    phi: ArrayLike,
    source: tuple[float, float, float],
    Qprime: float,
    a: float,
) -> Any:
    """Vectorized phi_pt with field and source in ring-centered coordinates.

    Here xi = r/|a|, so the sign of xi is the sheet whatever the sign of a.

    Args:
        xi, eta, phi: Field points.
        source: (xi, eta, phi) of the point charge.
        Qprime: Point charge.
        a: Ring radius.
    """
    A = abs(a)
    if A == 0:
        raise ConfigError("phi_pt needs a ring of non-zero radius")
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    _check_ring_centered(xi, eta)
    sxi, seta, sphi = (np.asarray(v, dtype=float) for v in source)
    _check_ring_centered(sxi, seta)

    zeta, chi, _, rho, z = _peripolar_arrays(xi, eta, phi, A)
    zeta_pt, chi_pt, _, rho_pt, z_pt = _peripolar_arrays(sxi, seta, sphi, A)

    dx = rho * np.cos(phi) - rho_pt * np.cos(sphi)
    dy = rho * np.sin(phi) - rho_pt * np.sin(sphi)
    R = np.sqrt(dx * dx + dy * dy + (z - z_pt) ** 2)
    coincident = R <= COINCIDENCE_TOLERANCE * A
    if np.any(coincident & (_ring_centered_sheet(xi, eta) == _ring_centered_sheet(sxi, seta))):
        raise CoincidentPointsError("Field point coincides with the point charge")
    bracket = _branch_bracket(zeta, chi, phi, zeta_pt, chi_pt, sphi)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = Qprime * bracket / R
    if np.any(coincident):
        value = np.where(coincident, Qprime * _mirror_limit(rho_pt, z_pt, A), value)
    return _scalar_or_array(value)


def _ring_centered_sheet(xi: NDArray, eta: NDArray) -> NDArray:
    """Sign of xi; disc points (xi = 0) take the sheet of the face they lie on."""
    return np.where(xi != 0, np.sign(xi), np.where(eta > 0, 1.0, -1.0))


def _mirror_limit(rho: ArrayLike, z: ArrayLike, A: float) -> Any:
    """Limit of bracket/R at the source's mirror point, |a|/(pi d1 d2).

    Both the bracket and R vanish linearly there, in the same ratio from
    every direction.
    """
    d1d2 = np.sqrt(((rho - A) ** 2 + z * z) * ((rho + A) ** 2 + z * z))
    return A / (math.pi * d1d2)


def _ring_centered_of(p: SpacetimePoint, a: float) -> tuple[float, float, float]:
    return p.r / abs(a), math.cos(p.theta), p.phi


def phi_pt_branch_factor(p: SpacetimePoint, source: SpacetimePoint, a: float) -> float:
    """The bracket 1/2 + asin(cos((chi - chi_pt)/2)/cosh(vartheta/2))/pi.

    Tends to 1 as p approaches the source and to 0 at the source's mirror
    point through the ring.
    """
    check_off_ring(p.r, p.theta, a)
    check_off_ring(source.r, source.theta, a)
    zeta, chi, phi = peripolar_from_point(p.cartesian(a), p.sheet, a)
    zeta_pt, chi_pt, phi_src = peripolar_from_point(source.cartesian(a), source.sheet, a)
    return float(_branch_bracket(zeta, chi, phi, zeta_pt, chi_pt, phi_src))


def phi_pt(p: SpacetimePoint, source: SpacetimePoint, Qprime: float, a: float) -> float:
    """Potential of a point charge Q' on the double-sheeted space.

    Single-valued on the manifold and harmonic away from the source; behaves
    as Q'/R close to it. The azimuth difference is the projected one. At the
    source's mirror point (same projection, other sheet) the finite limit
    Q' |a|/(pi d1 d2) is returned, d1 and d2 being the source's distances to
    the nearest and farthest ring points.

    Raises:
        CoincidentPointsError: p is the source itself.
        RingPointError: Either point is on the ring.
    """
    check_off_ring(p.r, p.theta, a)
    check_off_ring(source.r, source.theta, a)
    x_src = source.cartesian(a)
    R = float(np.linalg.norm(p.cartesian(a) - x_src))
    if R <= COINCIDENCE_TOLERANCE * max(abs(a), 1.0):
        if p.sheet == source.sheet:
            raise CoincidentPointsError("Field point coincides with the point charge")
        return Qprime * float(_mirror_limit(math.hypot(x_src[0], x_src[1]), x_src[2], abs(a)))
    return Qprime * phi_pt_branch_factor(p, source, a) / R


def _point_charge_field(p: SpacetimePoint, source: SpacetimePoint, Qprime: float, a: float):
    """Central-difference E = -grad(phi_pt), 4th order in projected Cartesian steps."""
    x0 = p.cartesian(a)
    R = float(np.linalg.norm(x0 - source.cartesian(a)))
    d_ring = math.hypot(math.hypot(x0[0], x0[1]) - abs(a), x0[2])
    h = 1e-3 * min(R, d_ring, 1.0)
    grad = np.zeros(3)
    for k in range(3):
        values = []
        for step in (-2, -1, 1, 2):
            x = x0.copy()
            x[k] += step * h
            rho = math.hypot(x[0], x[1])
            q = SpacetimePoint.from_cylindrical(rho, x[2], math.atan2(x[1], x[0]), p.sheet, a)
            values.append(phi_pt(q, source, Qprime, a))
        grad[k] = (values[0] - 8.0 * values[1] + 8.0 * values[2] - values[3]) / (12.0 * h)
    return -grad


def em_fields(
    p: SpacetimePoint,
    params: ModelParams,
    source: SpacetimePoint | None = None,
) -> FieldSample:
    """E and B of the ring, plus the point charge's E when a source is given.

    The ring fields are analytic gradients of the closed-form potentials. The
    point-charge field uses central differences of phi_pt.
    """
    check_off_ring(p.r, p.theta, params.a)
    E, B = _ring_fields(p, params.charge, params.ring_current, params.a)
    if source is not None:
        E = E + _point_charge_field(p, source, params.point_charge, params.a)
    return FieldSample(point=p, E=E, B=B)


def gauss_flux(
    params: ModelParams,
    radius: float,
    sheet: int = 1,
    n_nodes: int = 64,
) -> float:
    """Flux of the ring's E through a projected sphere on one sheet.

    Args:
        params: Model parameters.
        radius: Projected sphere radius, larger than |a|.
        sheet: +1 or -1.
        n_nodes: Gauss-Legendre nodes in the cosine of the polar angle.

    Returns:
        The flux, which equals 4 pi Q on the r > 0 sheet and -4 pi Q on the other.
    """
    if radius <= abs(params.a):
        raise ConfigError("radius must exceed |a| so the sphere encloses the ring", radius=radius)
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    total = 0.0
    for c, wgt in zip(nodes, weights, strict=True):
        s = math.sqrt(max(0.0, 1.0 - c * c))
        p = SpacetimePoint.from_cylindrical(radius * s, radius * c, 0.0, sheet, params.a)
        E, _ = _ring_fields(p, params.charge, params.ring_current, params.a)
        normal = np.array([s, 0.0, c])
        total += wgt * float(np.dot(E, normal))
    flux = TWO_PI * radius * radius * total
    logger.debug("gauss flux sheet=%+d radius=%g flux=%g", sheet, radius, flux)
    return flux


FIELD_SLICE_COLUMNS = (
    "xi",
    "eta",
    "phi_kn",
    "psi_kn",
    "A_t",
    "A_phi",
    "E_x",
    "E_y",
    "E_z",
    "B_x",
    "B_y",
    "B_z",
)


def field_slice(xi: ArrayLike, eta: ArrayLike, params: ModelParams) -> list[dict[str, float]]:
    """Tabulate potentials and fields on the (xi, eta) product grid at phi = 0.

    The ring point (0, 0) is skipped with a warning.
    """
    a = params.a
    if a == 0:
        raise ConfigError("Field slices use the ring-centered chart and need a != 0")
    rows = []
    for x in np.atleast_1d(np.asarray(xi, dtype=float)):
        for e in np.atleast_1d(np.asarray(eta, dtype=float)):
            if not -1.0 <= e <= 1.0:
                raise ConfigError("eta must lie in [-1, 1]", eta=float(e))
            if x == 0 and e == 0:
                logger.warning("Skipping the ring point (xi, eta) = (0, 0)")
                continue
            p = SpacetimePoint.from_ring_centered(float(x), float(e), 0.0, a)
            pot = akn_gen(p, params.charge, params.ring_current, a)
            sample = em_fields(p, params)
            rows.append(
                dict(
                    zip(
                        FIELD_SLICE_COLUMNS,
                        [
                            float(x),
                            float(e),
                            phi_kn(x, e, params.charge, a),
                            psi_kn(x, e, params.charge, a),
                            pot[0],
                            pot[3],
                            *map(float, sample.E),
                            *map(float, sample.B),
                        ],
                        strict=True,
                    )
                )
            )
    return rows


# --- command line --------------------------------------------------------------------------

_FIELDS_KEYS = ("xi", "eta", "flux_radius")


def add_fields_arguments(parser: argparse.ArgumentParser) -> None:
    """Add fields command arguments to a parser."""
    add_model_arguments(parser)
    parser.add_argument("--xi", help="Comma-separated xi values (default: 0.5,1,2,4)")
    parser.add_argument("--eta", help="Comma-separated eta values in [-1, 1] (default: -0.5,0,0.5)")
    parser.add_argument(
        "--flux-radius", type=float, help="Also report the Gauss flux on both sheets at this radius"
    )
    add_common_arguments(parser)


def run_fields(args: argparse.Namespace) -> None:
    """Execute the fields command with parsed arguments."""
    config = config_from_args(args, "fields", _FIELDS_KEYS)
    opts = config.section("fields")
    params = config.params
    rows = field_slice(
        parse_float_list(opts.get("xi", "0.5,1,2,4")),
        parse_float_list(opts.get("eta", "-0.5,0,0.5")),
        params,
    )
    diagnostics: dict[str, Any] = {
        "magnetic_moment": magnetic_moment(params),
        "anomalous_moment": anomalous_moment(params),
        "separable": params.is_separable,
    }
    if opts.get("flux_radius") is not None:
        radius = float(opts["flux_radius"])
        diagnostics["gauss_flux"] = {
            "radius": radius,
            "plus": gauss_flux(params, radius, sheet=1),
            "minus": gauss_flux(params, radius, sheet=-1),
            "expected": 4.0 * math.pi * params.charge,
        }
    envelope = ResultEnvelope(
        command="fields",
        config_hash=config.config_hash(),
        payload=rows,
        diagnostics=diagnostics,
        warnings=config.warnings,
    )
    text = rows_to_csv(rows, FIELD_SLICE_COLUMNS).rstrip()
    emit_result(envelope, args, rows, FIELD_SLICE_COLUMNS, text=text)
