#!/usr/bin/env python3
"""Charts, metric and sheet machinery for the double-sheeted zGKN spacetime.

The zero-gravity Kerr-Newman spacetime is flat but double-sheeted: two copies
of R^3 are cross-linked through the disc spanned by a ring of radius |a|.
Boyer-Lindquist (BL) coordinates (t, r, theta, phi) cover both sheets with a
single chart, r > 0 on one sheet and r < 0 on the other. Points are stored in
BL form; the ring-centered chart (xi, eta) = (r/a, cos(theta)), the projected
cylindrical chart and the peripolar chart are derived views.

Example:
    >>> from zgkn.geometry import SpacetimePoint, sheet_swap, os_to_cyl
    >>> p = SpacetimePoint(t=0.0, r=1.0, theta=1.0471975511965976, phi=0.0)
    >>> os_to_cyl(p.r, p.theta, p.phi, a=1.0)[:2]
    (1.224744871391589, 0.5000000000000001)
    >>> sheet_swap(p).sheet
    -1
"""

import logging
import math
from dataclasses import asdict, dataclass, fields
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize

from .errors import ConfigError, RingPointError

logger = logging.getLogger(__name__)

FINE_STRUCTURE = 1.0 / 137.035999084
# Reduced Compton wavelength of the electron, hbar/(m c), in metres.
REDUCED_COMPTON_WAVELENGTH_M = 3.8615926796e-13
# Most plausible a-priori ring radius, in units of hbar/(m c).
HEADLINE_RING_RADIUS = 5.83e-4

TWO_PI = 2.0 * math.pi
RING_TOLERANCE = 1e-14


def _scalar_or_array(x: NDArray) -> Any:
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters in natural units (hbar = c = 1).

    Attributes:
        a: Signed ring radius. Its sign orients the magnetic moment.
        m: Particle mass, m > 0.
        charge: Ring charge Q as seen from the r > 0 sheet.
        point_charge: The point charge Q'.
        current: Ring current I. None selects the separable value Q/(pi a).
        alpha: Fine-structure constant, used by the Sommerfeld comparison.
    """

    a: float
    m: float = 1.0
    charge: float = -math.sqrt(FINE_STRUCTURE)
    point_charge: float = math.sqrt(FINE_STRUCTURE)
    current: float | None = None
    alpha: float = FINE_STRUCTURE

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigError(f"Parameter '{f.name}' must be a finite number", value=value)
        if self.m <= 0:
            raise ConfigError("Mass must be positive", m=self.m)
        if self.alpha < 0:
            raise ConfigError("Fine-structure constant must be non-negative", alpha=self.alpha)

    @classmethod
    def hydrogenic(
        cls,
        a: float,
        gamma: float = -FINE_STRUCTURE,
        m: float = 1.0,
        alpha: float = FINE_STRUCTURE,
    ) -> "ModelParams":
        """Separable hydrogen-like parameters with coupling gamma = Q Q'.

        The point charge is taken as sqrt(|gamma|) and the ring charge as
        gamma/Q', so both charges have the size of the elementary charge
        when gamma = -alpha.
        """
        point_charge = math.sqrt(abs(gamma)) if gamma != 0 else 1.0
        return cls(a=a, m=m, charge=gamma / point_charge, point_charge=point_charge, alpha=alpha)

    @property
    def gamma(self) -> float:
        """Coupling constant gamma = Q Q' (negative when attractive)."""
        return self.charge * self.point_charge

    @property
    def ring_current(self) -> float:
        """The ring current I, resolving the separable default."""
        if self.current is not None:
            return self.current
        if self.a == 0:
            return 0.0
        return self.charge / (math.pi * self.a)

    @property
    def anomaly(self) -> float:
        """Q - I pi a; zero exactly in the separable (pure KN) case."""
        return self.charge - self.ring_current * math.pi * self.a

    @property
    def is_separable(self) -> bool:
        return abs(self.anomaly) <= 1e-12 * max(1.0, abs(self.charge))

    def admissibility(self) -> dict[str, Any]:
        """Check the sufficient conditions for a non-empty point spectrum.

        Returns:
            Dictionary with the two inequalities |a|m < 1/2 and
            |gamma| < sqrt(2|a|m(1 - 2|a|m)), the bound, and the overall flag.
        """
        am = abs(self.a) * self.m
        bound = math.sqrt(max(0.0, 2.0 * am * (1.0 - 2.0 * am)))
        am_ok = am < 0.5
        coupling_ok = abs(self.gamma) < bound
        return {
            "am": am,
            "am_below_half": am_ok,
            "coupling": abs(self.gamma),
            "coupling_bound": bound,
            "coupling_below_bound": coupling_ok,
            "admissible": am_ok and coupling_ok,
        }

    def admissibility_warnings(self) -> list[str]:
        report = self.admissibility()
        warnings = []
        if not report["am_below_half"]:
            warnings.append(f"|a|m = {report['am']:.6g} is not below 1/2")
        if not report["coupling_below_bound"]:
            warnings.append(
                f"|gamma| = {report['coupling']:.6g} exceeds the admissibility bound "
                f"{report['coupling_bound']:.6g}"
            )
        return warnings

    def with_radius(self, a: float) -> "ModelParams":
        """Same charges and current convention at a different ring radius."""
        return ModelParams(
            a=a,
            m=self.m,
            charge=self.charge,
            point_charge=self.point_charge,
            current=self.current,
            alpha=self.alpha,
        )

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ModelParams":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown parameter keys: {', '.join(unknown)}", keys=unknown)
        if "a" not in data:
            raise ConfigError("Parameter 'a' is required")
        return cls(**data)


def varpi(r: ArrayLike, a: float) -> Any:
    """sqrt(r^2 + a^2)."""
    return _scalar_or_array(np.hypot(np.asarray(r, dtype=float), a))


def rho_squared(r: ArrayLike, theta: ArrayLike, a: float) -> Any:
    """|rho|^2 = r^2 + a^2 cos^2(theta); vanishes only on the ring."""
    r = np.asarray(r, dtype=float)
    c = np.cos(np.asarray(theta, dtype=float))
    return _scalar_or_array(r * r + a * a * c * c)


def check_off_ring(r: ArrayLike, theta: ArrayLike, a: float) -> None:
    """Raise RingPointError if any (r, theta) sits on the ring locus."""
    rr = np.asarray(rho_squared(r, theta, a))
    scale = max(a * a, 1.0)
    if np.any(rr <= RING_TOLERANCE * scale):
        raise RingPointError("Point lies on the ring, which is not part of the manifold", a=a)


def os_to_cyl(r: ArrayLike, theta: ArrayLike, phi: ArrayLike, a: float) -> tuple:
    """Project oblate-spheroidal (BL) coordinates to cylindrical ones.

    The map is 2:1: r and -r land on the same (rho, z, phi) only after
    the sheet swap (r, theta) -> (-r, pi - theta); the sign of r is lost.
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    rho = np.hypot(r, a) * np.sin(theta)
    z = r * np.cos(theta)
    return _scalar_or_array(rho), _scalar_or_array(z), _scalar_or_array(np.asarray(phi, float))


def cyl_to_os(rho: ArrayLike, z: ArrayLike, sheet: int, a: float) -> tuple:
    """Invert the projection on a chosen sheet.

    Args:
        rho: Cylindrical radius, rho >= 0.
        z: Height along the ring axis.
        sheet: +1 for r > 0, -1 for r < 0. On the disc itself (r = 0) the
            sheet selects theta < pi/2 (+1) or theta > pi/2 (-1).
        a: Ring radius.

    Returns:
        Tuple (r, theta).

    Raises:
        RingPointError: If (rho, z) = (|a|, 0).
    """
    if sheet not in (1, -1):
        raise ConfigError("sheet must be +1 or -1", sheet=sheet)
    rho = np.asarray(rho, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(rho < 0):
        raise ConfigError("Cylindrical radius must be non-negative")
    A = abs(a)
    scale = max(A, 1.0)
    if np.any((np.abs(rho - A) <= RING_TOLERANCE * scale) & (np.abs(z) <= RING_TOLERANCE * scale)):
        raise RingPointError("Point lies on the ring, which is not part of the manifold", a=a)

    s = rho * rho + z * z - A * A
    root = np.sqrt(s * s + 4.0 * A * A * z * z)
    # Two algebraically equal forms; pick the one without cancellation.
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(s >= 0, 0.5 * (s + root), 2.0 * A * A * z * z / (root - s))
    r2 = np.where(np.isfinite(r2), r2, 0.0)
    r = sheet * np.sqrt(r2)

    with np.errstate(divide="ignore", invalid="ignore"):
        cos_theta = np.where(r != 0, z / np.where(r != 0, r, 1.0), 0.0)
    on_disc = r == 0
    if np.any(on_disc):
        disc_cos = sheet * np.sqrt(np.clip(1.0 - (rho / A) ** 2 if A > 0 else 0.0, 0.0, 1.0))
        cos_theta = np.where(on_disc, disc_cos, cos_theta)
    w = np.hypot(r, A)
    sin_theta = np.divide(rho, w, out=np.zeros_like(w), where=w > 0)
    theta = np.arctan2(sin_theta, cos_theta)
    return _scalar_or_array(r), _scalar_or_array(theta)


def projected_jacobian(r: float, theta: float, phi: float, a: float) -> NDArray:
    """Differential of the projection, d(x, y, z)/d(r, theta, phi)."""
    w = math.hypot(r, a)
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(phi), math.cos(phi)
    dw = r / w if w > 0 else 0.0
    return np.array(
        [
            [dw * st * cp, w * ct * cp, -w * st * sp],
            [dw * st * sp, w * ct * sp, w * st * cp],
            [ct, -r * st, 0.0],
        ]
    )


@dataclass(frozen=True)
class SpacetimePoint:
    """A point of the double-sheeted manifold, stored in BL coordinates.

    Attributes:
        t: Time.
        r: Signed radial coordinate; its sign is the sheet.
        theta: Polar angle in [0, pi].
        phi: Azimuth, normalized to [0, 2 pi).
    """

    t: float
    r: float
    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise ConfigError("theta must lie in [0, pi]", theta=self.theta)
        object.__setattr__(self, "phi", float(self.phi) % TWO_PI)

    @property
    def sheet(self) -> int:
        """+1 on the r > 0 sheet, -1 on the r < 0 sheet.

        Disc points (r = 0) belong to the sheet whose upper face they lie on.
        """
        if self.r > 0 or (self.r == 0 and self.theta < math.pi / 2):
            return 1
        return -1

    @classmethod
    def from_ring_centered(
        cls, xi: float, eta: float, phi: float, a: float, t: float = 0.0
    ) -> "SpacetimePoint":
        if a == 0:
            raise ConfigError("The ring-centered chart needs a != 0")
        if not -1.0 <= eta <= 1.0:
            raise ConfigError("eta must lie in [-1, 1]", eta=eta)
        return cls(t=t, r=xi * a, theta=math.acos(eta), phi=phi)

    @classmethod
    def from_cylindrical(
        cls, rho: float, z: float, phi: float, sheet: int, a: float, t: float = 0.0
    ) -> "SpacetimePoint":
        r, theta = cyl_to_os(rho, z, sheet, a)
        return cls(t=t, r=r, theta=theta, phi=phi)

    @classmethod
    def from_peripolar(
        cls, zeta: float, chi: float, phi: float, a: float, t: float = 0.0
    ) -> "SpacetimePoint":
        """Build a point from peripolar (zeta, chi, phi); chi in (-pi, 3 pi)."""
        A = abs(a)
        chi = (chi + math.pi) % (2.0 * TWO_PI) - math.pi
        denom = math.cosh(zeta) - math.cos(chi)
        if denom <= 0:
            raise RingPointError("Peripolar coordinates of the ring", zeta=zeta, chi=chi)
        rho = A * math.sinh(zeta) / denom
        z = A * math.sin(chi) / denom
        sheet = 1 if chi < math.pi else -1
        return cls.from_cylindrical(rho, z, phi, sheet, a, t=t)

    def ring_centered(self, a: float) -> tuple[float, float]:
        if a == 0:
            raise ConfigError("The ring-centered chart needs a != 0")
        return self.r / a, math.cos(self.theta)

    def cylindrical(self, a: float) -> tuple[float, float, float, int]:
        rho, z, phi = os_to_cyl(self.r, self.theta, self.phi, a)
        return rho, z, phi, self.sheet

    def cartesian(self, a: float) -> NDArray:
        """Projected Cartesian position (the sheet is dropped)."""
        rho, z, phi = os_to_cyl(self.r, self.theta, self.phi, a)
        return np.array([rho * math.cos(phi), rho * math.sin(phi), z])

    def peripolar(self, a: float) -> tuple[float, float, float]:
        return peripolar_from_point(self.cartesian(a), self.sheet, a)

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


def sheet_swap(p: SpacetimePoint) -> SpacetimePoint:
    """The sheet swap (xi, eta) -> (-xi, -eta), i.e. (r, theta) -> (-r, pi - theta).

    An involution that commutes with the projection and fixes the ring.
    """
    return SpacetimePoint(t=p.t, r=-p.r, theta=math.pi - p.theta, phi=p.phi)


def metric_coeffs(p: SpacetimePoint, a: float) -> NDArray:
    """The zGKN metric g_{mu nu} in BL coordinates, ordered (t, r, theta, phi).

    The static form is diagonal: diag(1, -|rho|^2/varpi^2, -|rho|^2, -varpi^2 sin^2 theta).
    """
    check_off_ring(p.r, p.theta, a)
    rr = rho_squared(p.r, p.theta, a)
    w2 = p.r * p.r + a * a
    return np.diag([1.0, -rr / w2, -rr, -w2 * math.sin(p.theta) ** 2])


def _perpendicular_unit(n: NDArray) -> NDArray:
    trial = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = trial - np.dot(trial, n) * n
    return e1 / np.linalg.norm(e1)


def peripolar_from_point(
    position: ArrayLike,
    sheet: int,
    a: float,
    ring_center: ArrayLike | None = None,
    ring_normal: ArrayLike | None = None,
) -> tuple[float, float, float]:
    """Peripolar coordinates of a point relative to a (possibly displaced) ring.

    zeta = ln(d2/d1) with d1, d2 the distances to the nearest and farthest
    ring points in the meridional half-plane; chi is the angle subtended by
    them, in (-pi, pi) on the r > 0 sheet and in (pi, 3 pi) on the r < 0 sheet.

    Args:
        position: Projected Cartesian position of the point.
        sheet: Sheet of the point relative to this ring.
        a: Ring radius.
        ring_center: Ring center, origin by default.
        ring_normal: Ring axis, +z by default.

    Returns:
        Tuple (zeta, chi, phi).
    """
    x = np.asarray(position, dtype=float)
    c = np.zeros(3) if ring_center is None else np.asarray(ring_center, dtype=float)
    n = np.array([0.0, 0.0, 1.0]) if ring_normal is None else np.asarray(ring_normal, float)
    n = n / np.linalg.norm(n)

    d = x - c
    z = float(np.dot(d, n))
    perp = d - z * n
    rho = float(np.linalg.norm(perp))
    if ring_normal is None:
        phi = math.atan2(perp[1], perp[0]) % TWO_PI
    else:
        e1 = _perpendicular_unit(n)
        e2 = np.cross(n, e1)
        phi = math.atan2(float(np.dot(perp, e2)), float(np.dot(perp, e1))) % TWO_PI

    A = abs(a)
    d1 = math.hypot(rho - A, z)
    d2 = math.hypot(rho + A, z)
    if d1 <= RING_TOLERANCE * max(A, 1.0):
        raise RingPointError("Peripolar coordinates are undefined on the ring", rho=rho, z=z)
    zeta = math.log(d2 / d1)
    if z == 0.0 and rho < A:
        chi = math.pi if sheet > 0 else 3.0 * math.pi
    else:
        chi = math.atan2(2.0 * A * z, rho * rho + z * z - A * A)
        if sheet < 0:
            chi += TWO_PI
    return zeta, chi, phi


def dual_frame_coords(r: float, theta: float, phi: float) -> tuple[float, float, float]:
    """Ring-relative coordinates of the point charge and vice versa.

    The map (r, theta, phi) -> (r, pi - theta, phi + pi) is an involution.
    """
    return r, math.pi - theta, (phi + math.pi) % TWO_PI


def conical_angle_ratio(radius: float, a: float, n_samples: int = 2048) -> float:
    """Circumference/radius of a small meridional circle around the ring.

    The circle of projected radius ``radius`` centred on the ring is closed
    only after passing through both sheets, so the ratio tends to 4 pi
    rather than 2 pi.

    Args:
        radius: Projected (Euclidean) distance from the ring, 0 < radius < |a|/4.
        a: Ring radius.
        n_samples: Number of polygon vertices along the loop.

    Returns:
        The ratio of the loop length to its radius.
    """
    A = abs(a)
    if A == 0 or not 0 < radius < 0.25 * A:
        raise ConfigError("radius must lie in (0, |a|/4)", radius=radius, a=a)

    def distance(s: float, angle: float) -> float:
        xi, eta = s * math.cos(angle), s * math.sin(angle)
        rho = A * math.sqrt(1.0 + xi * xi) * math.sqrt(1.0 - eta * eta)
        return math.hypot(rho - A, A * xi * eta)

    s_guess = math.sqrt(2.0 * radius / A)
    angles = np.linspace(0.0, TWO_PI, n_samples, endpoint=False)
    points = np.empty((n_samples, 2))
    for k, angle in enumerate(angles):
        s_hi = 4.0 * s_guess
        bound = abs(math.sin(angle))
        if bound > 0:
            s_hi = min(s_hi, 0.999 / bound)
        s = optimize.brentq(lambda s, ang=angle: distance(s, ang) - radius, 0.0, s_hi, xtol=1e-15)
        xi, eta = s * math.cos(angle), s * math.sin(angle)
        points[k] = (A * math.sqrt(1.0 + xi * xi) * math.sqrt(1.0 - eta * eta), A * xi * eta)

    closed = np.vstack([points, points[:1]])
    length = float(np.sum(np.hypot(*np.diff(closed, axis=0).T)))
    logger.debug("conical loop: radius=%g length=%g", radius, length)
    return length / radius


def compton_to_si(length: float) -> float:
    """Convert a length in units of hbar/(m c) to metres."""
    return length * REDUCED_COMPTON_WAVELENGTH_M


def si_to_compton(length_m: float) -> float:
    """Convert a length in metres to units of hbar/(m c)."""
    return length_m / REDUCED_COMPTON_WAVELENGTH_M
