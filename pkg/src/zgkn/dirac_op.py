#!/usr/bin/env python3
"""Cartan frame, the transformed Dirac Hamiltonian and its Hilbert space.

The spatial part of the zGKN metric is diagonal in BL coordinates, and the
canonical symmetric tetrad built on it lets the Dirac equation separate. For a
single azimuthal mode e^{i kappa phi} the Hamiltonian acts on bi-spinors
Psi(r, theta) as

    H = (M0/|rho|^2) [ -i(varpi g3 d_r + g1 d_theta) + kappa((a/varpi) g0 + csc(theta) g2)
                       - Q' |rho| (g0 A~0 + g2 A~2) + m N ],

with M0 = varpi g0 + a sin(theta) g2 and N = diag(rho, rho, rho*, rho*). It is
Hermitian for the weighted inner product
<Psi, Phi> = 2 pi int int Psi^dagger M^ Phi dtheta dr, M^ = 1 + (a sin(theta)/varpi) alpha2.

Example:
    >>> from zgkn.dirac_op import RadialThetaGrid, mhat_eigenvalues
    >>> from zgkn.geometry import SpacetimePoint
    >>> mhat_eigenvalues(SpacetimePoint(0.0, 0.0, 1.5707963267948966), a=1.0)
    (2.0, 0.0)
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .bispinor import ALPHA, GAMMA, MINKOWSKI
from .errors import (
    AsymmetricGridError,
    ConfigError,
    GridMismatchError,
    PoleEvaluationError,
)
from .fields import atilde_components
from .geometry import ModelParams, SpacetimePoint, check_off_ring, metric_coeffs
from .results import read_grid, write_grid

logger = logging.getLogger(__name__)

SYMMETRY_OPERATORS = ("S_hat", "K_hat", "C_hat", "C_tilde")
UNDER_RESOLVED_RATIO = 0.1


@dataclass(frozen=True)
class CartanFrame:
    """Orthonormal co-frame omega^mu and frame e_mu in BL components.

    Attributes:
        coframe: Row mu holds omega^mu as (t, r, theta, phi) components.
        frame: Row mu holds e_mu as (t, r, theta, phi) components.
    """

    coframe: NDArray
    frame: NDArray

    def duality_error(self) -> float:
        """max |omega^mu(e_nu) - delta^mu_nu|."""
        return float(np.max(np.abs(self.coframe @ self.frame.T - np.eye(4))))

    def metric(self) -> NDArray:
        """eta_{alpha beta} omega^alpha omega^beta as a coordinate table."""
        return self.coframe.T @ MINKOWSKI @ self.coframe


def cartan_frame(p: SpacetimePoint, a: float) -> CartanFrame:
    """The canonical symmetric tetrad at p.

    Raises:
        RingPointError: p is on the ring.
        PoleEvaluationError: sin(theta) = 0, where e_2 is undefined.
    """
    check_off_ring(p.r, p.theta, a)
    st, ct = math.sin(p.theta), math.cos(p.theta)
    if st == 0:
        raise PoleEvaluationError("The frame vector e_2 is undefined on the axis", theta=p.theta)
    rho = math.sqrt(p.r * p.r + (a * ct) ** 2)
    w = math.hypot(p.r, a)
    coframe = np.array(
        [
            [w / rho, 0.0, 0.0, -w * a * st * st / rho],
            [0.0, 0.0, rho, 0.0],
            [-a * st / rho, 0.0, 0.0, w * w * st / rho],
            [0.0, rho / w, 0.0, 0.0],
        ]
    )
    frame = np.array(
        [
            [w / rho, 0.0, 0.0, a / (w * rho)],
            [0.0, 0.0, 1.0 / rho, 0.0],
            [a * st / rho, 0.0, 0.0, 1.0 / (rho * st)],
            [0.0, w / rho, 0.0, 0.0],
        ]
    )
    return CartanFrame(coframe=coframe, frame=frame)


@dataclass(frozen=True)
class RotationCoeffs:
    """The six functions A..F that build the connection 1-forms."""

    A: float
    B: float
    C: float
    D: float
    E: float
    F: float

    def connection(self) -> NDArray:
        """Omega_{mu nu} as a (4, 4, 4) table: [mu, nu, alpha] is the omega^alpha coefficient."""
        A, B, C, D, E, F = self.A, self.B, self.C, self.D, self.E, self.F
        omega = np.zeros((4, 4, 4))
        entries = {
            (0, 1): {0: -C, 2: -D},
            (0, 2): {1: D, 3: -B},
            (0, 3): {0: -A, 2: -B},
            (1, 2): {0: D, 2: F},
            (1, 3): {1: -E, 3: -C},
            (2, 3): {0: -B, 2: -E},
        }
        for (mu, nu), coeffs in entries.items():
            for alpha, value in coeffs.items():
                omega[mu, nu, alpha] = value
                omega[nu, mu, alpha] = -value
        return omega

    def to_dict(self) -> dict[str, float]:
        return {"A": self.A, "B": self.B, "C": self.C, "D": self.D, "E": self.E, "F": self.F}


def rotation_coeffs(p: SpacetimePoint, a: float) -> RotationCoeffs:
    """Closed-form rotation coefficients at p.

    At a = 0 they reduce to E = 1/r and F = cot(theta)/r with A..D zero.
    """
    check_off_ring(p.r, p.theta, a)
    st, ct = math.sin(p.theta), math.cos(p.theta)
    if st == 0:
        raise PoleEvaluationError("F is singular on the axis", theta=p.theta)
    r = p.r
    rho3 = (r * r + (a * ct) ** 2) ** 1.5
    w = math.hypot(r, a)
    return RotationCoeffs(
        A=a * a * r * st * st / (w * rho3),
        B=a * r * st / rho3,
        C=a * a * st * ct / rho3,
        D=a * ct * w / rho3,
        E=r * w / rho3,
        F=w * w * ct / (rho3 * st),
    )


def structure_equation_residual(p: SpacetimePoint, a: float, h: float | None = None) -> float:
    """Largest coordinate component of d omega^mu + Omega^mu_nu ^ omega^nu.

    The exterior derivative is taken by central differences in r and theta;
    the co-frame does not depend on t or phi. The default step is 1e-5 times
    min(1, |a|), since the frame varies on the scale of the ring.
    """
    if h is None:
        h = 1e-5 * (min(1.0, abs(a)) or 1.0)
    base = cartan_frame(p, a).coframe
    derivs = np.zeros((4, 4, 4))  # [mu, coordinate i, component j] = d_i omega^mu_j
    for i, (dr, dth) in ((1, (h, 0.0)), (2, (0.0, h))):
        plus = cartan_frame(SpacetimePoint(p.t, p.r + dr, p.theta + dth, p.phi), a).coframe
        minus = cartan_frame(SpacetimePoint(p.t, p.r - dr, p.theta - dth, p.phi), a).coframe
        derivs[:, i, :] = (plus - minus) / (2.0 * h)
    d_omega = derivs - derivs.transpose(0, 2, 1)

    connection = rotation_coeffs(p, a).connection()
    # Omega^mu_nu = eta^{mu mu} Omega_{mu nu}, as coordinate 1-forms.
    raised = MINKOWSKI.diagonal()[:, None, None] * connection
    one_forms = np.einsum("mna,ai->mni", raised, base)
    wedge = np.einsum("mni,nj->mij", one_forms, base)
    wedge = wedge - wedge.transpose(0, 2, 1)
    return float(np.max(np.abs(d_omega + wedge)))


def mhat(p: SpacetimePoint, a: float) -> NDArray:
    """The inner-product weight 1 + (a sin(theta)/varpi) alpha^2."""
    w = math.hypot(p.r, a)
    ratio = a * math.sin(p.theta) / w if w > 0 else 0.0
    return np.eye(4, dtype=complex) + ratio * ALPHA[1]


def mhat_eigenvalues(p: SpacetimePoint, a: float) -> tuple[float, float]:
    """(1 + a sin(theta)/varpi, 1 - a sin(theta)/varpi), each of multiplicity two."""
    w = math.hypot(p.r, a)
    ratio = a * math.sin(p.theta) / w if w > 0 else 0.0
    return 1.0 + ratio, 1.0 - ratio


def _d4(values: NDArray, h: float, axis: int) -> NDArray:
    """Fourth-order finite differences on a uniform grid, one-sided at the ends."""
    f = np.moveaxis(values, axis, 0)
    n = f.shape[0]
    if n < 5:
        raise ConfigError("Fourth-order stencils need at least 5 points per axis", n=n)
    out = np.empty_like(f)
    out[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / 12.0
    out[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / 12.0
    out[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / 12.0
    out[-1] = (25.0 * f[-1] - 48.0 * f[-2] + 36.0 * f[-3] - 16.0 * f[-4] + 3.0 * f[-5]) / 12.0
    out[-2] = (3.0 * f[-1] + 10.0 * f[-2] - 18.0 * f[-3] + 6.0 * f[-4] - f[-5]) / 12.0
    return np.moveaxis(out / h, 0, axis)


@dataclass(frozen=True)
class RadialThetaGrid:
    """Tensor grid in (r, theta) on compactified, pole-clustered variables.

    r = r_scale tan(x) with x on uniform cell midpoints of (-x_max, x_max),
    x_max = arctan(r_max/r_scale) (pi/2 when r_max is None). theta =
    pi(1 - cos(pi y))/2 with y on uniform cell midpoints of (0, 1). Both
    axes are symmetric under the sheet swap and exclude the poles.
    """

    n_r: int
    n_theta: int
    r_scale: float = 1.0
    r_max: float | None = None

    def __post_init__(self):
        if self.n_r < 5 or self.n_theta < 5:
            raise ConfigError("Grids need at least 5 points per axis")
        if self.r_scale <= 0:
            raise ConfigError("r_scale must be positive", r_scale=self.r_scale)
        if self.r_max is not None and self.r_max <= 0:
            raise ConfigError("r_max must be positive", r_max=self.r_max)

    @cached_property
    def x_max(self) -> float:
        if self.r_max is None:
            return 0.5 * math.pi
        return math.atan(self.r_max / self.r_scale)

    @cached_property
    def h_x(self) -> float:
        return 2.0 * self.x_max / self.n_r

    @cached_property
    def h_y(self) -> float:
        return 1.0 / self.n_theta

    @cached_property
    def x(self) -> NDArray:
        return -self.x_max + (np.arange(self.n_r) + 0.5) * self.h_x

    @cached_property
    def y(self) -> NDArray:
        return (np.arange(self.n_theta) + 0.5) * self.h_y

    @cached_property
    def r(self) -> NDArray:
        return self.r_scale * np.tan(self.x)

    @cached_property
    def theta(self) -> NDArray:
        return 0.5 * math.pi * (1.0 - np.cos(math.pi * self.y))

    @cached_property
    def dr_dx(self) -> NDArray:
        return self.r_scale / np.cos(self.x) ** 2

    @cached_property
    def dtheta_dy(self) -> NDArray:
        return 0.5 * math.pi**2 * np.sin(math.pi * self.y)

    @cached_property
    def weights(self) -> NDArray:
        """Midpoint weights for 2 pi dtheta dr, shape (n_r, n_theta)."""
        return 2.0 * math.pi * np.outer(self.dr_dx * self.h_x, self.dtheta_dy * self.h_y)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_r, self.n_theta

    def mesh(self) -> tuple[NDArray, NDArray]:
        return np.meshgrid(self.r, self.theta, indexing="ij")

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        r_ok = np.allclose(self.r, -self.r[::-1], atol=tol * max(1.0, self.r_scale))
        t_ok = np.allclose(self.theta, math.pi - self.theta[::-1], atol=tol)
        return bool(r_ok and t_ok)

    def d_dr(self, values: NDArray) -> NDArray:
        shape = (-1,) + (1,) * (values.ndim - 1)
        return _d4(values, self.h_x, axis=0) / self.dr_dx.reshape(shape)

    def d_dtheta(self, values: NDArray) -> NDArray:
        shape = (1, -1) + (1,) * (values.ndim - 2)
        return _d4(values, self.h_y, axis=1) / self.dtheta_dy.reshape(shape)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_r": self.n_r,
            "n_theta": self.n_theta,
            "r_scale": self.r_scale,
            "r_max": self.r_max,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RadialThetaGrid":
        return cls(
            n_r=int(data["n_r"]),
            n_theta=int(data["n_theta"]),
            r_scale=float(data.get("r_scale", 1.0)),
            r_max=data.get("r_max"),
        )


@dataclass(frozen=True)
class GridBiSpinor:
    """Bi-spinor values on a RadialThetaGrid for one azimuthal mode kappa.

    Attributes:
        grid: The (r, theta) grid.
        values: Complex array of shape (n_r, n_theta, 4), Weyl components.
        kappa: Azimuthal quantum number of the e^{i kappa phi} mode.
        metadata: Free-form data carried into the sidecar (E, params, ...).
    """

    grid: RadialThetaGrid
    values: NDArray
    kappa: float
    metadata: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (*self.grid.shape, 4):
            raise GridMismatchError(
                "values do not match the grid", shape=values.shape, grid=self.grid.shape
            )
        object.__setattr__(self, "values", values)

    def _check_compatible(self, other: "GridBiSpinor") -> None:
        if other.grid != self.grid or other.kappa != self.kappa:
            raise GridMismatchError(
                "Grid bi-spinors live on different grids or modes",
                kappa=(self.kappa, other.kappa),
            )

    def with_values(self, values: NDArray, kappa: float | None = None) -> "GridBiSpinor":
        return GridBiSpinor(
            self.grid, values, self.kappa if kappa is None else kappa, dict(self.metadata)
        )

    def __add__(self, other: "GridBiSpinor") -> "GridBiSpinor":
        self._check_compatible(other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "GridBiSpinor") -> "GridBiSpinor":
        self._check_compatible(other)
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar: complex) -> "GridBiSpinor":
        return self.with_values(scalar * self.values)

    __rmul__ = __mul__

    def save(self, path: str | Path) -> None:
        metadata = {**self.metadata, "kappa": self.kappa, "grid": self.grid.to_dict()}
        write_grid(path, self.grid.r, self.grid.theta, self.values, metadata)

    @classmethod
    def load(cls, path: str | Path) -> "GridBiSpinor":
        record = read_grid(path)
        meta = dict(record.metadata)
        if "grid" not in meta or "kappa" not in meta:
            raise ConfigError(f"Sidecar of {path} lacks grid or kappa", path=str(path))
        grid = RadialThetaGrid.from_dict(meta.pop("grid"))
        if not (np.allclose(grid.r, record.r) and np.allclose(grid.theta, record.theta)):
            raise GridMismatchError("Stored axes disagree with the sidecar grid", path=str(path))
        kappa = float(meta.pop("kappa"))
        return cls(grid=grid, values=record.values, kappa=kappa, metadata=meta)


def _matvec(matrix: NDArray, values: NDArray) -> NDArray:
    return np.einsum("ij,...j->...i", matrix, values)


def _col(arr: NDArray) -> NDArray:
    return arr[..., None]


def _check_resolution(grid: RadialThetaGrid, values: NDArray) -> float:
    """Relative gap between 4th- and 2nd-order derivatives; large means under-resolved."""
    ratios = []
    for axis, h in ((0, grid.h_x), (1, grid.h_y)):
        fourth = _d4(values, h, axis)
        second = np.gradient(values, h, axis=axis, edge_order=2)
        scale = float(np.max(np.abs(fourth)))
        if scale > 0:
            ratios.append(float(np.max(np.abs(fourth - second))) / scale)
    worst = max(ratios, default=0.0)
    if worst > UNDER_RESOLVED_RATIO:
        logger.warning("Grid under-resolves the bi-spinor (stencil gap %.3g)", worst)
    return worst


def hamiltonian_apply(
    psi: GridBiSpinor,
    params: ModelParams,
    derivatives: tuple[NDArray, NDArray] | None = None,
) -> GridBiSpinor:
    """Apply H to a single-mode grid bi-spinor.

    Args:
        psi: The bi-spinor on its grid.
        params: Model parameters; the KN-anomalous A~_2 term is included.
        derivatives: Optional exact (d_r psi, d_theta psi) arrays. Without
            them 4th-order stencils in the compactified variables are used.

    Returns:
        H psi on the same grid and mode.
    """
    grid = psi.grid
    a, m = params.a, params.m
    r, theta = grid.mesh()
    check_off_ring(r, theta, a)
    values = psi.values
    if derivatives is None:
        _check_resolution(grid, values)
        d_r, d_theta = grid.d_dr(values), grid.d_dtheta(values)
    else:
        d_r, d_theta = (np.asarray(d, dtype=complex) for d in derivatives)
        if d_r.shape != values.shape or d_theta.shape != values.shape:
            raise GridMismatchError("Derivative arrays do not match the bi-spinor grid")

    st, ct = np.sin(theta), np.cos(theta)
    w = np.hypot(r, a)
    rho_abs = np.sqrt(r * r + (a * ct) ** 2)
    a0, a2 = atilde_components(r, theta, params.charge, params.ring_current, a)
    kappa = psi.kappa
    g0, g1, g2, g3 = GAMMA

    bracket = -1j * (_col(w) * _matvec(g3, d_r) + _matvec(g1, d_theta))
    bracket += _col(kappa * a / w - params.point_charge * rho_abs * a0) * _matvec(g0, values)
    bracket += _col(kappa / st - params.point_charge * rho_abs * a2) * _matvec(g2, values)
    rho_c = r + 1j * a * ct
    n_diag = np.stack([rho_c, rho_c, np.conj(rho_c), np.conj(rho_c)], axis=-1)
    bracket += m * n_diag * values

    result = _col(w) * _matvec(g0, bracket) + _col(a * st) * _matvec(g2, bracket)
    result = result / _col(rho_abs**2)
    return psi.with_values(result)


def _mhat_apply(grid: RadialThetaGrid, values: NDArray, a: float) -> NDArray:
    r, theta = grid.mesh()
    ratio = a * np.sin(theta) / np.hypot(r, a)
    return values + ratio[..., None] * _matvec(ALPHA[1], values)


def inner_product(psi: GridBiSpinor, phi: GridBiSpinor, a: float) -> complex:
    """<psi, phi>_M^ = 2 pi int int psi^dagger M^ phi dtheta dr by midpoint quadrature.

    Raises:
        GridMismatchError: Different grids or modes.
    """
    psi._check_compatible(phi)
    density = np.sum(np.conj(psi.values) * _mhat_apply(psi.grid, phi.values, a), axis=-1)
    return complex(np.sum(psi.grid.weights * density))


def norm(psi: GridBiSpinor, a: float) -> float:
    return math.sqrt(max(0.0, inner_product(psi, psi, a).real))


def tail_estimate(psi: GridBiSpinor, a: float) -> float:
    """Estimated weight beyond a truncated radial range, from geometric decay of the end rows."""
    if psi.grid.r_max is None:
        return 0.0
    local = np.sum(np.conj(psi.values) * _mhat_apply(psi.grid, psi.values, a), -1).real
    dens = np.sum(psi.grid.weights * local, axis=1)
    tail = 0.0
    for last, prev in ((dens[-1], dens[-2]), (dens[0], dens[1])):
        if prev > 0 and 0 <= last < prev:
            ratio = last / prev
            tail += last * ratio / (1.0 - ratio)
    return float(tail)


def residual_norm(
    psi: GridBiSpinor,
    E: float,
    params: ModelParams,
    derivatives: tuple[NDArray, NDArray] | None = None,
) -> float:
    """||(H - E) psi||_M^ / ||psi||_M^."""
    h_psi = hamiltonian_apply(psi, params, derivatives)
    return norm(h_psi - E * psi, params.a) / norm(psi, params.a)


def symmetry_apply(psi: GridBiSpinor, op: str) -> GridBiSpinor:
    """Apply a discrete symmetry.

    S_hat evaluates at the sheet-swapped point, K_hat conjugates, C_hat is
    g0 K_hat S_hat (anti-commutes with H) and C_tilde is i g2 K_hat (charge
    conjugation). Conjugation maps the kappa mode to -kappa.

    Raises:
        AsymmetricGridError: S_hat or C_hat on a grid not symmetric under the swap.
        ConfigError: Unknown operator name.
    """
    if op not in SYMMETRY_OPERATORS:
        raise ConfigError(f"Unknown symmetry operator '{op}'", choices=list(SYMMETRY_OPERATORS))
    if op in ("S_hat", "C_hat") and not psi.grid.is_symmetric():
        raise AsymmetricGridError("The grid is not symmetric under (r, theta) -> (-r, pi - theta)")
    values = psi.values
    if op == "S_hat":
        return psi.with_values(values[::-1, ::-1, :].copy())
    if op == "K_hat":
        return psi.with_values(np.conj(values), kappa=-psi.kappa)
    if op == "C_hat":
        swapped = np.conj(values[::-1, ::-1, :])
        return psi.with_values(_matvec(GAMMA[0], swapped), kappa=-psi.kappa)
    return psi.with_values(_matvec(1j * GAMMA[2], np.conj(values)), kappa=-psi.kappa)


def lower_order_transform(psi: GridBiSpinor, a: float, inverse: bool = False) -> GridBiSpinor:
    """Psi = D Psi^ with D = diag(e^{-chi}, e^{-chi}, e^{-chi*}, e^{-chi*}).

    Here chi = log(varpi rho* sin(theta))/2 on the principal branch.
    """
    r, theta = psi.grid.mesh()
    check_off_ring(r, theta, a)
    rho_conj = r - 1j * a * np.cos(theta)
    chi = 0.5 * np.log(np.hypot(r, a) * rho_conj * np.sin(theta))
    sign = 1.0 if inverse else -1.0
    upper, lower = np.exp(sign * chi), np.exp(sign * np.conj(chi))
    factors = np.stack([upper, upper, lower, lower], axis=-1)
    return psi.with_values(factors * psi.values)


def metric_reconstruction_error(p: SpacetimePoint, a: float) -> float:
    """max |eta omega omega - g| at p."""
    return float(np.max(np.abs(cartan_frame(p, a).metric() - metric_coeffs(p, a))))
