#!/usr/bin/env python3
"""Dirac-matrix algebra and bi-spinor geometry in the Weyl representation.

A bi-spinor Psi = (psi_1, psi_2) in C^4 is described by its generalized
Cayley-Klein parameters: an amplitude R, a phase S, the split angle Sigma
between the two Pauli halves, their relative phase Phi, and one pair of
Euler angles (Theta_i, Omega_i) per half. From these follow the orientation
vector n_Psi, the Dreibein used by the guiding law, the probability current
and the velocity field.

Example:
    >>> import numpy as np
    >>> from zgkn.bispinor import BiSpinor
    >>> psi = BiSpinor(np.array([1, 0, 0, 0], dtype=complex))
    >>> psi.generalized_ck().Sigma
    0.0
    >>> psi.velocity().tolist()
    [0.0, 0.0, 1.0]
"""

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateFrameError, ZeroSpinorError

if TYPE_CHECKING:
    from .geometry import SpacetimePoint
    from .spectral import SeparatedState

logger = logging.getLogger(__name__)

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_3 = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SIGMA_1, SIGMA_2, SIGMA_3)

_ZERO2 = np.zeros((2, 2), dtype=complex)

GAMMA = (
    np.block([[_ZERO2, SIGMA_0], [SIGMA_0, _ZERO2]]),
    *(np.block([[_ZERO2, -s], [s, _ZERO2]]) for s in PAULI),
)
ALPHA = tuple(np.block([[s, _ZERO2], [_ZERO2, -s]]) for s in PAULI)
SPIN = tuple(np.block([[s, _ZERO2], [_ZERO2, s]]) for s in PAULI)
MINKOWSKI = np.diag([1.0, -1.0, -1.0, -1.0])

DEGENERATE_FRAME_THRESHOLD = 1e-10
NULL_CURRENT_THRESHOLD = 1e-12


def _as_pauli(psi: ArrayLike) -> NDArray:
    z = np.asarray(psi, dtype=complex).reshape(2)
    if not np.any(z):
        raise ZeroSpinorError("Cayley-Klein decomposition of the zero spinor")
    return z


def _as_dirac(psi: "ArrayLike | BiSpinor") -> NDArray:
    z = psi.components if isinstance(psi, BiSpinor) else np.asarray(psi, dtype=complex).reshape(4)
    if not np.any(z):
        raise ZeroSpinorError("Decomposition of the zero bi-spinor")
    return z


def flip(psi: ArrayLike) -> NDArray:
    """The flip map (z1, z2) -> (-conj(z2), conj(z1)); reverses n(psi)."""
    z = np.asarray(psi, dtype=complex).reshape(2)
    return np.array([-np.conj(z[1]), np.conj(z[0])])


def spin_representation(X: ArrayLike) -> NDArray:
    """The Hermitian matrix X^mu sigma_mu of a four-vector."""
    x = np.asarray(X, dtype=float).reshape(4)
    return x[0] * SIGMA_0 + x[1] * SIGMA_1 + x[2] * SIGMA_2 + x[3] * SIGMA_3


def sheet_swap_vector(X: ArrayLike) -> NDArray:
    """Push a ring-centered tangent vector (t, xi, eta, phi) through the sheet swap."""
    x = np.asarray(X, dtype=float).reshape(4).copy()
    x[1:3] *= -1.0
    return x


@dataclass(frozen=True)
class CayleyKlein:
    """psi = R e^{i Phi/2} (cos(Theta/2) e^{-i Omega/2}, sin(Theta/2) e^{i Omega/2})."""

    R: float
    Phi: float
    Theta: float
    Omega: float

    @property
    def n(self) -> NDArray:
        st = math.sin(self.Theta)
        return np.array(
            [st * math.cos(self.Omega), st * math.sin(self.Omega), math.cos(self.Theta)]
        )

    def spinor(self) -> NDArray:
        half = 0.5 * self.Theta
        return (
            self.R
            * np.exp(0.5j * self.Phi)
            * np.array(
                [
                    math.cos(half) * np.exp(-0.5j * self.Omega),
                    math.sin(half) * np.exp(0.5j * self.Omega),
                ]
            )
        )

    def frame(self) -> tuple[NDArray, NDArray, NDArray]:
        """The orthonormal frame (l, m, n) of the unit spinor."""
        lm = _lm_complex(self.spinor() / self.R)
        return lm.real.copy(), lm.imag.copy(), self.n

    def to_dict(self) -> dict[str, float]:
        return {"R": self.R, "Phi": self.Phi, "Theta": self.Theta, "Omega": self.Omega}


def _lm_complex(z: NDArray) -> NDArray:
    z1, z2 = z
    norm = abs(z1) ** 2 + abs(z2) ** 2
    return np.array([z1 * z1 - z2 * z2, 1j * (z1 * z1 + z2 * z2), -2.0 * z1 * z2]) / norm


def cayley_klein(psi: ArrayLike) -> CayleyKlein:
    """Cayley-Klein parameters of a Pauli spinor.

    When one component vanishes the Phi/Omega split is degenerate and the
    whole phase goes to Phi (Omega = 0).

    Raises:
        ZeroSpinorError: psi = 0.
    """
    z = _as_pauli(psi)
    R = float(np.linalg.norm(z))
    Theta = 2.0 * math.atan2(abs(z[1]), abs(z[0]))
    if z[1] == 0:
        return CayleyKlein(R=R, Phi=2.0 * float(np.angle(z[0])), Theta=0.0, Omega=0.0)
    if z[0] == 0:
        return CayleyKlein(R=R, Phi=2.0 * float(np.angle(z[1])), Theta=math.pi, Omega=0.0)
    arg1, arg2 = float(np.angle(z[0])), float(np.angle(z[1]))
    return CayleyKlein(R=R, Phi=arg1 + arg2, Theta=Theta, Omega=arg2 - arg1)


def pauli_orientation(psi: ArrayLike) -> NDArray:
    """n(psi) = psi^dagger sigma psi / psi^dagger psi."""
    z = _as_pauli(psi)
    norm = float(np.vdot(z, z).real)
    return np.array([np.vdot(z, s @ z).real for s in PAULI]) / norm


@dataclass(frozen=True)
class GeneralizedCK:
    """Generalized Cayley-Klein parameters of a bi-spinor.

    Psi = R e^{iS} (cos(Sigma/2) e^{-i Phi/2} chi(Theta1, Omega1),
                    sin(Sigma/2) e^{+i Phi/2} chi(Theta2, Omega2)),
    with chi(Theta, Omega) = (cos(Theta/2) e^{-i Omega/2}, sin(Theta/2) e^{i Omega/2}).
    """

    R: float
    S: float
    Sigma: float
    Phi: float
    Theta1: float
    Omega1: float
    Theta2: float
    Omega2: float

    @property
    def n1(self) -> NDArray:
        return CayleyKlein(1.0, 0.0, self.Theta1, self.Omega1).n

    @property
    def n2(self) -> NDArray:
        return CayleyKlein(1.0, 0.0, self.Theta2, self.Omega2).n

    def reconstruct(self) -> NDArray:
        chi1 = CayleyKlein(1.0, 0.0, self.Theta1, self.Omega1).spinor()
        chi2 = CayleyKlein(1.0, 0.0, self.Theta2, self.Omega2).spinor()
        half = 0.5 * self.Sigma
        top = math.cos(half) * np.exp(-0.5j * self.Phi) * chi1
        bottom = math.sin(half) * np.exp(0.5j * self.Phi) * chi2
        return self.R * np.exp(1j * self.S) * np.concatenate([top, bottom])

    def to_dict(self) -> dict[str, float]:
        return {
            "R": self.R,
            "S": self.S,
            "Sigma": self.Sigma,
            "Phi": self.Phi,
            "Theta1": self.Theta1,
            "Omega1": self.Omega1,
            "Theta2": self.Theta2,
            "Omega2": self.Omega2,
        }


def generalized_ck(psi: "ArrayLike | BiSpinor") -> GeneralizedCK:
    """Decompose a bi-spinor into generalized Cayley-Klein form.

    A vanishing half gets Sigma in {0, pi}, its Euler angles zeroed, and no
    relative phase.

    Raises:
        ZeroSpinorError: Psi = 0.
    """
    z = _as_dirac(psi)
    top, bottom = z[:2], z[2:]
    r1, r2 = float(np.linalg.norm(top)), float(np.linalg.norm(bottom))
    Sigma = 2.0 * math.atan2(r2, r1)
    ck1 = cayley_klein(top) if r1 > 0 else None
    ck2 = cayley_klein(bottom) if r2 > 0 else None
    phi1 = ck1.Phi if ck1 else ck2.Phi  # type: ignore[union-attr]
    phi2 = ck2.Phi if ck2 else phi1
    return GeneralizedCK(
        R=math.hypot(r1, r2),
        S=0.25 * (phi1 + phi2),
        Sigma=Sigma,
        Phi=0.5 * (phi2 - phi1),
        Theta1=ck1.Theta if ck1 else 0.0,
        Omega1=ck1.Omega if ck1 else 0.0,
        Theta2=ck2.Theta if ck2 else 0.0,
        Omega2=ck2.Omega if ck2 else 0.0,
    )


@dataclass(frozen=True)
class OrientationFrame:
    """Orientation vector and complementary vectors of a bi-spinor.

    Attributes:
        n: Orientation n_Psi, of length at most 1.
        l: n_1 x n_2 (zero when degenerate).
        m: n_Psi x l (zero when degenerate).
        degenerate: True when |n_1 x n_2| is below threshold or a half vanishes.
        n1, n2: Orientations of the two Pauli halves.
    """

    n: NDArray
    l: NDArray  # noqa: E741
    m: NDArray
    degenerate: bool
    n1: NDArray
    n2: NDArray

    def dreibein(self) -> NDArray:
        """Rows (N, L, M), each normalized.

        Raises:
            DegenerateFrameError: The frame is degenerate or n_Psi vanishes.
        """
        norms = [np.linalg.norm(v) for v in (self.n, self.l, self.m)]
        if self.degenerate or min(norms) < DEGENERATE_FRAME_THRESHOLD:
            raise DegenerateFrameError("Orientation frame is degenerate", n=self.n)
        return np.vstack([self.n / norms[0], self.l / norms[1], self.m / norms[2]])

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n.tolist(),
            "l": self.l.tolist(),
            "m": self.m.tolist(),
            "degenerate": self.degenerate,
        }


def orientation(psi: "ArrayLike | BiSpinor") -> OrientationFrame:
    """Orientation frame with l = n_1 x n_2 and m = n_Psi x l."""
    z = _as_dirac(psi)
    total = float(np.vdot(z, z).real)
    n = np.array([np.vdot(z, s @ z).real for s in SPIN]) / total
    top, bottom = z[:2], z[2:]
    has_top, has_bottom = bool(np.any(top)), bool(np.any(bottom))
    n1 = pauli_orientation(top) if has_top else np.zeros(3)
    n2 = pauli_orientation(bottom) if has_bottom else np.zeros(3)
    l_vec = np.cross(n1, n2)
    degenerate = not (has_top and has_bottom) or np.linalg.norm(l_vec) < DEGENERATE_FRAME_THRESHOLD
    if degenerate:
        return OrientationFrame(n, np.zeros(3), np.zeros(3), True, n1, n2)
    return OrientationFrame(n, l_vec, np.cross(n, l_vec), False, n1, n2)


def primed_frame(psi: "ArrayLike | BiSpinor") -> tuple[NDArray, NDArray]:
    """l' + i m' = cos^2(Sigma/2)(l_1 + i m_1) + sin^2(Sigma/2)(l_2 + i m_2).

    Orthogonal to n_Psi only when n_1 x n_2 = 0; the cross-product frame of
    orientation() is the one the guiding law uses.
    """
    z = _as_dirac(psi)
    total = float(np.vdot(z, z).real)
    lm = np.zeros(3, dtype=complex)
    for half in (z[:2], z[2:]):
        weight = float(np.vdot(half, half).real) / total
        if weight > 0:
            lm += weight * _lm_complex(half)
    return lm.real.copy(), lm.imag.copy()


@dataclass(frozen=True)
class CurrentSample:
    """Probability current j^mu = Psibar gamma^mu Psi in the Cartan frame.

    Attributes:
        j0: Density rho_psi = Psi^dagger Psi.
        j: Spatial current rho_psi v_psi.
        norm_sq: eta_{mu nu} j^mu j^nu, non-negative up to roundoff.
        null: True when norm_sq < 1e-12 j0^2.
    """

    j0: float
    j: NDArray
    norm_sq: float
    null: bool

    @property
    def four_vector(self) -> NDArray:
        return np.concatenate([[self.j0], self.j])

    @property
    def gamma_factor(self) -> float:
        """rho_psi / sqrt(eta j j); infinite for a null current."""
        if self.null:
            return math.inf
        return self.j0 / math.sqrt(self.norm_sq)

    def to_dict(self) -> dict[str, Any]:
        return {"j0": self.j0, "j": self.j.tolist(), "norm_sq": self.norm_sq, "null": self.null}


def current(psi: "ArrayLike | BiSpinor") -> CurrentSample:
    """The current with j^k = Psi^dagger alpha^k Psi = |psi_1|^2 n_1 - |psi_2|^2 n_2."""
    z = _as_dirac(psi)
    j0 = float(np.vdot(z, z).real)
    j = np.array([np.vdot(z, al @ z).real for al in ALPHA])
    norm_sq = j0 * j0 - float(np.dot(j, j))
    return CurrentSample(
        j0=j0, j=j, norm_sq=norm_sq, null=norm_sq < NULL_CURRENT_THRESHOLD * j0 * j0
    )


def velocity(psi: "ArrayLike | BiSpinor") -> NDArray:
    """v_psi = cos^2(Sigma/2) n_1 - sin^2(Sigma/2) n_2, of length at most 1."""
    sample = current(psi)
    return sample.j / sample.j0


def eigenstate_components(
    R: ArrayLike, Omega: ArrayLike, S: ArrayLike, Theta: ArrayLike
) -> NDArray:
    """Vectorized eigen-bi-spinor of a separated state.

    The components are R S (c e^{-i Omega/2}, s e^{i Omega/2}, c e^{i Omega/2},
    s e^{-i Omega/2}) with c = cos(Theta/2), s = sin(Theta/2). Inputs broadcast; the
    result has a trailing axis of length 4. Sigma = pi/2 wherever RS != 0.
    """
    R = np.asarray(R, dtype=float)
    Omega = np.asarray(Omega, dtype=float)
    S = np.asarray(S, dtype=float)
    Theta = np.asarray(Theta, dtype=float)
    amp = R * S
    c = np.cos(0.5 * Theta)
    s = np.sin(0.5 * Theta)
    minus = np.exp(-0.5j * Omega)
    plus = np.exp(0.5j * Omega)
    return np.stack(
        np.broadcast_arrays(amp * c * minus, amp * s * plus, amp * c * plus, amp * s * minus),
        axis=-1,
    )


@dataclass(frozen=True)
class BiSpinor:
    """A C^4 value in the Weyl representation."""

    components: NDArray

    def __post_init__(self):
        z = np.asarray(self.components, dtype=complex).reshape(4)
        object.__setattr__(self, "components", z)

    @property
    def psi1(self) -> NDArray:
        return self.components[:2]

    @property
    def psi2(self) -> NDArray:
        return self.components[2:]

    @property
    def density(self) -> float:
        return float(np.vdot(self.components, self.components).real)

    def generalized_ck(self) -> GeneralizedCK:
        return generalized_ck(self.components)

    def orientation(self) -> OrientationFrame:
        return orientation(self.components)

    def current(self) -> CurrentSample:
        return current(self.components)

    def velocity(self) -> NDArray:
        return velocity(self.components)

    def to_dict(self) -> dict[str, Any]:
        return {"components": [[c.real, c.imag] for c in self.components]}


def assemble_eigenstate(state: "SeparatedState", p: "SpacetimePoint") -> BiSpinor:
    """Evaluate the eigen-bi-spinor of a separated state at a spacetime point.

    Psi(t, r, theta, phi) = e^{-i(E t - kappa phi)} R(r) S(theta) (...).

    Raises:
        OutOfGridError: p lies outside the tabulated radial or angular range.
    """
    R, Omega = state.radial_at(p.r)
    S, Theta = state.angular_at(p.theta)
    phase = np.exp(-1j * (state.E * p.t - state.kappa * p.phi))
    return BiSpinor(phase * eigenstate_components(R, Omega, S, Theta))
