#!/usr/bin/env python3
"""Guiding-law trajectories of the point charge and their ring-frame view.

The position Q(tau) follows the normalized probability current of a guiding
bi-spinor field, dQ/dtau = j / sqrt(eta j j) expressed through the Cartan
frame; the orientation Dreibein (N, L, M) is read off the same bi-spinor at
Q(tau). Swapping the roles of particle and ring turns the worldline into the
motion of the ring center q = -R^-1 Q and of the ring normal.

Only quasi-static guiding fields are supported: a single computed
eigenstate, a finite superposition of them, or a constant bi-spinor.

Example:
    >>> import numpy as np
    >>> from zgkn.bohm import UniformField, integrate_trajectory
    >>> from zgkn.geometry import SpacetimePoint
    >>> field = UniformField(np.array([1, 0, 1, 0], dtype=complex), a=0.05)
    >>> w = integrate_trajectory(field, SpacetimePoint(0.0, 2.0, 1.0, 0.0), (0.0, 1.0), 0.25)
    >>> len(w.tau)
    5
"""

import argparse
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, linalg, signal
from scipy.spatial.transform import Rotation, Slerp

from .bispinor import MINKOWSKI, CurrentSample, assemble_eigenstate, current, orientation
from .config import (
    RunConfig,
    add_common_arguments,
    add_model_arguments,
    config_from_args,
    default_workers,
    parse_float_list,
)
from .dirac_op import cartan_frame
from .errors import (
    ConfigError,
    DegenerateFrameError,
    StiffnessFailureError,
    ZeroDensityError,
    ZgknError,
)
from .fields import _bl_basis
from .geometry import ModelParams, SpacetimePoint
from .results import ResultEnvelope, emit_result
from .spectral import SeparatedState, load_state

logger = logging.getLogger(__name__)

DENSITY_FLOOR = 1e-250
ORTHONORMALITY_TOLERANCE = 1e-10
QUASI_STATIC_SPEED = 0.1
GUIDE_RTOL = 1e-10
GUIDE_ATOL = 1e-12


class EigenstateField:
    """Guiding field of one separated eigenstate."""

    def __init__(self, state: SeparatedState):
        self.state = state
        self.a = state.params.a
        self.energies = (state.E,)

    def __call__(self, t: float, r: float, theta: float, phi: float) -> NDArray:
        return assemble_eigenstate(self.state, SpacetimePoint(t, r, theta, phi)).components


class SuperpositionField:
    """Finite linear combination sum_k c_k Psi_k of guiding fields sharing one ring radius."""

    def __init__(self, terms: Sequence[tuple[complex, Any]]):
        if not terms:
            raise ConfigError("A superposition needs at least one term")
        radii = {f.a for _, f in terms}
        if len(radii) != 1:
            raise ConfigError("Superposed fields live on different ring radii", radii=sorted(radii))
        self.terms = [(complex(c), f) for c, f in terms]
        self.a = radii.pop()
        self.energies = tuple(e for _, f in self.terms for e in f.energies)

    @classmethod
    def of_states(
        cls, states: Sequence[SeparatedState], coefficients: Sequence[complex] | None = None
    ) -> "SuperpositionField":
        coefficients = coefficients or [1.0] * len(states)
        if len(coefficients) != len(states):
            raise ConfigError("One coefficient per state is required")
        return cls([(c, EigenstateField(s)) for c, s in zip(coefficients, states)])

    def __call__(self, t: float, r: float, theta: float, phi: float) -> NDArray:
        return sum(c * f(t, r, theta, phi) for c, f in self.terms)


class UniformField:
    """A constant bi-spinor, optionally with a stationary phase e^{-i E t}."""

    def __init__(self, psi: ArrayLike, a: float, energy: float = 0.0):
        self.psi = np.asarray(psi, dtype=complex).reshape(4)
        self.a = float(a)
        self.energy = float(energy)
        self.energies = (self.energy,)

    def __call__(self, t: float, r: float, theta: float, phi: float) -> NDArray:
        return np.exp(-1j * self.energy * t) * self.psi


def _as_coords(q: "SpacetimePoint | ArrayLike") -> NDArray:
    if isinstance(q, SpacetimePoint):
        return np.array([q.t, q.r, q.theta, q.phi])
    return np.asarray(q, dtype=float).reshape(4)


def four_velocity(
    field: Callable, q: "SpacetimePoint | ArrayLike"
) -> tuple[NDArray, CurrentSample]:
    """dQ/dtau in BL components together with the frame current at Q.

    A null current switches to the affine law dQ/ds = j/j0.

    Raises:
        ZeroDensityError: The density at Q is below DENSITY_FLOOR.
    """
    t, r, theta, phi = _as_coords(q)
    psi = field(t, r, theta, phi)
    density = float(np.vdot(psi, psi).real)
    if density < DENSITY_FLOOR:
        raise ZeroDensityError(
            "The trajectory left the support of the guiding field", r=r, theta=theta
        )
    sample = current(psi)
    if sample.null:
        u = sample.four_vector / sample.j0
    else:
        u = sample.four_vector / math.sqrt(sample.norm_sq)
    frame = cartan_frame(SpacetimePoint(t, r, theta, phi), field.a).frame
    return u @ frame, sample


def guide_step(field: Callable, q: "SpacetimePoint | ArrayLike", dtau: float) -> NDArray:
    """One classical RK4 step of the guiding law from Q."""
    y = _as_coords(q)
    k1, _ = four_velocity(field, y)
    k2, _ = four_velocity(field, y + 0.5 * dtau * k1)
    k3, _ = four_velocity(field, y + 0.5 * dtau * k2)
    k4, _ = four_velocity(field, y + dtau * k3)
    return y + dtau * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def _cartesian_basis(r: float, theta: float, phi: float, a: float) -> NDArray:
    """Rows: unit projected images of the spatial frame vectors e_1, e_2, e_3."""
    d_r, d_theta, phi_hat = _bl_basis(r, theta, phi, a)
    return np.vstack([d_theta / np.linalg.norm(d_theta), phi_hat, d_r / np.linalg.norm(d_r)])


def cartesian_dreibein(psi: ArrayLike, r: float, theta: float, phi: float, a: float) -> NDArray:
    """Dreibein rows (N, L, M) in the projected Cartesian basis.

    Raises:
        DegenerateFrameError: The orientation frame of psi is degenerate.
    """
    return orientation(psi).dreibein() @ _cartesian_basis(r, theta, phi, a)


@dataclass
class Worldline:
    """Sampled guiding-law trajectory.

    Attributes:
        tau: Proper-time (or affine) samples, increasing.
        coords: (n, 4) BL coordinates (t, r, theta, phi).
        dreibein: (n, 3, 3) Cartesian Dreibein rows (N, L, M); NaN where degenerate.
        speed: Local frame speed |j|/j0 per sample.
        null: True where the current is null and the affine law was used.
        degenerate: True where the Dreibein is undefined.
        a: Ring radius the coordinates refer to.
        reorthonormalized: Number of samples whose Dreibein was re-orthonormalized.
    """

    tau: NDArray
    coords: NDArray
    dreibein: NDArray
    speed: NDArray
    null: NDArray
    degenerate: NDArray
    a: float
    reorthonormalized: int = 0

    @property
    def t(self) -> NDArray:
        return self.coords[:, 0]

    @property
    def r(self) -> NDArray:
        return self.coords[:, 1]

    @property
    def theta(self) -> NDArray:
        return self.coords[:, 2]

    @property
    def phi(self) -> NDArray:
        return self.coords[:, 3]

    def positions(self) -> NDArray:
        """Projected Cartesian positions, shape (n, 3)."""
        return np.array([SpacetimePoint(*c).cartesian(self.a) for c in self.coords])

    def rotations(self) -> tuple[Rotation, NDArray]:
        """R(tau) with N(tau) = R N(0) (likewise L, M), and a mask of bridged samples.

        Each rotation is the orthogonal Procrustes fit of the sample's Dreibein
        to the first valid one; degenerate samples are filled by spherical
        interpolation (nearest valid rotation outside the valid range).

        Raises:
            DegenerateFrameError: No sample has a valid Dreibein.
        """
        valid = np.flatnonzero(~self.degenerate)
        if valid.size == 0:
            raise DegenerateFrameError("Every sample of the worldline has a degenerate frame")
        reference = self.dreibein[valid[0]]
        fitted = Rotation.concatenate(
            [Rotation.align_vectors(self.dreibein[i], reference)[0] for i in valid]
        )
        if valid.size == len(self.tau):
            return fitted, np.zeros(len(self.tau), dtype=bool)
        if valid.size == 1:
            return Rotation.concatenate([fitted[0]] * len(self.tau)), self.degenerate.copy()
        times = np.clip(self.tau, self.tau[valid[0]], self.tau[valid[-1]])
        return Slerp(self.tau[valid], fitted)(times), self.degenerate.copy()

    def rows(self) -> list[dict[str, Any]]:
        rows = []
        for i in range(len(self.tau)):
            row = {
                "tau": self.tau[i],
                "t": self.coords[i, 0],
                "r": self.coords[i, 1],
                "theta": self.coords[i, 2],
                "phi": self.coords[i, 3],
                "speed": self.speed[i],
                "null": bool(self.null[i]),
            }
            if not self.degenerate[i]:
                row.update(zip(("N_x", "N_y", "N_z"), self.dreibein[i, 0]))
            rows.append(row)
        return rows

    def to_dict(self) -> dict[str, Any]:
        return {
            "a": self.a,
            "tau": self.tau.tolist(),
            "coords": self.coords.tolist(),
            "speed": self.speed.tolist(),
            "null_samples": int(np.count_nonzero(self.null)),
            "degenerate_samples": int(np.count_nonzero(self.degenerate)),
            "reorthonormalized": self.reorthonormalized,
        }


class _Sampler:
    """Collects per-sample diagnostics while a trajectory is integrated."""

    def __init__(self, field: Callable):
        self.field = field
        self.tau: list[float] = []
        self.coords: list[NDArray] = []
        self.dreibein: list[NDArray] = []
        self.speed: list[float] = []
        self.null: list[bool] = []
        self.degenerate: list[bool] = []
        self.reorthonormalized = 0
        self._null_logged = False

    def add(self, tau: float, y: NDArray) -> None:
        t, r, theta, phi = y
        psi = self.field(t, r, theta, phi)
        _, sample = four_velocity(self.field, y)
        try:
            frame = cartesian_dreibein(psi, r, theta, phi, self.field.a)
            error = float(np.max(np.abs(frame @ frame.T - np.eye(3))))
            if error > ORTHONORMALITY_TOLERANCE:
                frame = linalg.polar(frame)[0]
                self.reorthonormalized += 1
                logger.warning("Re-orthonormalized the Dreibein at tau=%g (error %.2e)", tau, error)
            degenerate = False
        except DegenerateFrameError:
            frame = np.full((3, 3), np.nan)
            degenerate = True
        if sample.null and not self._null_logged:
            logger.warning("Null current at tau=%g; continuing with the affine parameter", tau)
            self._null_logged = True
        self.tau.append(float(tau))
        self.coords.append(np.array(y, dtype=float))
        self.dreibein.append(frame)
        self.speed.append(float(np.linalg.norm(sample.j) / sample.j0))
        self.null.append(bool(sample.null))
        self.degenerate.append(degenerate)

    def worldline(self) -> Worldline:
        return Worldline(
            tau=np.array(self.tau),
            coords=np.array(self.coords).reshape(-1, 4),
            dreibein=np.array(self.dreibein).reshape(-1, 3, 3),
            speed=np.array(self.speed),
            null=np.array(self.null, dtype=bool),
            degenerate=np.array(self.degenerate, dtype=bool),
            a=self.field.a,
            reorthonormalized=self.reorthonormalized,
        )


def integrate_trajectory(
    field: Callable,
    q0: "SpacetimePoint | ArrayLike",
    tau_span: tuple[float, float],
    cadence: float,
    rtol: float = GUIDE_RTOL,
    atol: float = GUIDE_ATOL,
) -> Worldline:
    """Integrate the guiding law with adaptive DOP853 steps, sampling every cadence.

    Raises:
        ConfigError: Empty tau span or non-positive cadence.
        ZgknError: Any failure of the guiding law; the partial worldline is
            attached as ``exc.partial``.
    """
    tau0, tau1 = (float(v) for v in tau_span)
    if not tau1 > tau0:
        raise ConfigError("tau_span must be increasing", tau_span=[tau0, tau1])
    if cadence <= 0:
        raise ConfigError("cadence must be positive", cadence=cadence)
    n_steps = int(math.floor((tau1 - tau0) / cadence + 1e-9))
    samples = tau0 + cadence * np.arange(n_steps + 1)
    y = _as_coords(q0)
    sampler = _Sampler(field)

    def rhs(_tau: float, state: NDArray) -> NDArray:
        return four_velocity(field, state)[0]

    try:
        sampler.add(samples[0], y)
        first_step = None
        for start, stop in zip(samples[:-1], samples[1:]):
            sol = integrate.solve_ivp(
                rhs, (start, stop), y, method="DOP853", rtol=rtol, atol=atol, first_step=first_step
            )
            if not sol.success:
                raise StiffnessFailureError(
                    f"Guiding-law integration failed: {sol.message}", location=float(sol.t[-1])
                )
            y = sol.y[:, -1]
            if len(sol.t) > 1:
                first_step = min(float(sol.t[-1] - sol.t[-2]), cadence)
            sampler.add(stop, y)
    except ZgknError as e:
        e.partial = sampler.worldline()
        logger.warning("Trajectory stopped after %d samples: %s", len(sampler.tau), e.message)
        raise
    worldline = sampler.worldline()
    logger.info("Integrated %d trajectory samples up to tau=%g", len(worldline.tau), tau1)
    return worldline


def integrate_ensemble(
    field: Callable,
    initial: Sequence["SpacetimePoint | ArrayLike"],
    tau_span: tuple[float, float],
    cadence: float,
    workers: int | None = None,
) -> list[Worldline]:
    """Integrate independent trajectories from several initial points in a worker pool."""
    with ThreadPoolExecutor(max_workers=workers or default_workers()) as pool:
        futures = [
            pool.submit(integrate_trajectory, field, q0, tau_span, cadence) for q0 in initial
        ]
        return [f.result() for f in futures]


def dominant_frequency(w: Worldline, coordinate: str = "r", oversample: int = 8) -> float:
    """Angular frequency (in coordinate time t) of the strongest modulation of a coordinate.

    The coordinate is resampled on a uniform t grid and linearly detrended
    before the spectrum is taken.
    """
    if coordinate not in ("r", "theta", "phi"):
        raise ConfigError(f"Unknown coordinate '{coordinate}'", choices=["r", "theta", "phi"])
    t = w.t
    if len(t) < 8:
        raise ConfigError("Too few samples for a spectral estimate", samples=len(t))
    uniform = np.linspace(t[0], t[-1], len(t))
    values = signal.detrend(np.interp(uniform, t, getattr(w, coordinate)))
    n_fft = oversample * len(uniform)
    spectrum = np.abs(np.fft.rfft(values * np.hanning(len(values)), n=n_fft))
    freqs = 2.0 * math.pi * np.fft.rfftfreq(n_fft, d=uniform[1] - uniform[0])
    return float(freqs[1 + int(np.argmax(spectrum[1:]))])


@dataclass
class RingTrack:
    """Motion of the ring seen from the point charge's rest configuration.

    Attributes:
        tau: Samples of the worldline.
        t: Coordinate time Q^0(tau), the reparameterization of the track.
        q: (n, 3) ring-center path q = -R^-1 Q.
        normal: (n, 3) ring normal R^-1 N_rg(0).
        rotations: R(tau).
        bridged: True where the rotation was interpolated over a degenerate frame.
        speed: |dq/dt| per sample.
        consistency: max |R q + Q|.
    """

    tau: NDArray
    t: NDArray
    q: NDArray
    normal: NDArray
    rotations: Rotation
    bridged: NDArray
    speed: NDArray
    consistency: float

    def rows(self) -> list[dict[str, Any]]:
        return [
            {
                "q_x": self.q[i, 0],
                "q_y": self.q[i, 1],
                "q_z": self.q[i, 2],
                "Nrg_x": self.normal[i, 0],
                "Nrg_y": self.normal[i, 1],
                "Nrg_z": self.normal[i, 2],
                "ring_speed": self.speed[i],
            }
            for i in range(len(self.tau))
        ]

    def to_dict(self) -> dict[str, Any]:
        return {
            "t": self.t.tolist(),
            "q": self.q.tolist(),
            "normal": self.normal.tolist(),
            "bridged_samples": int(np.count_nonzero(self.bridged)),
            "consistency": self.consistency,
        }


def ring_frame_view(w: Worldline, ring_normal: ArrayLike = (0.0, 0.0, 1.0)) -> RingTrack:
    """Re-interpret a worldline as motion of the ring.

    ring_normal is the ring normal at tau = 0; aligning it with the bi-spinor
    frame is a convention of the caller.

    Raises:
        DegenerateFrameError: No sample has a valid Dreibein.
    """
    n0 = np.asarray(ring_normal, dtype=float)
    if np.linalg.norm(n0) == 0:
        raise ConfigError("The ring normal must be non-zero")
    n0 = n0 / np.linalg.norm(n0)
    rotations, bridged = w.rotations()
    if np.any(bridged):
        logger.warning(
            "Bridged %d degenerate-frame samples by interpolation", int(np.count_nonzero(bridged))
        )
    positions = w.positions()
    inverse = rotations.inv()
    q = -inverse.apply(positions)
    normal = inverse.apply(np.broadcast_to(n0, positions.shape))
    consistency = float(np.max(np.abs(rotations.apply(q) + positions)))
    t = w.t
    if len(t) > 1:
        velocity = np.gradient(q, t, axis=0)
        speed = np.linalg.norm(velocity, axis=1)
    else:
        speed = np.zeros(len(t))
    return RingTrack(
        tau=w.tau.copy(),
        t=t.copy(),
        q=q,
        normal=normal,
        rotations=rotations,
        bridged=bridged,
        speed=speed,
        consistency=consistency,
    )


def quasi_static_report(w: Worldline, params: ModelParams) -> dict[str, Any]:
    """Speed diagnostics against the quantum and Larmor speed scales."""
    max_speed = float(np.max(w.speed)) if len(w.speed) else 0.0
    c_quantum = params.alpha
    c_larmor = 1e-3 * params.alpha**3
    return {
        "max_speed": max_speed,
        "mean_speed": float(np.mean(w.speed)) if len(w.speed) else 0.0,
        "c_quantum": c_quantum,
        "c_larmor": c_larmor,
        "ratio_to_c_quantum": max_speed / c_quantum,
        "ratio_to_c_larmor": max_speed / c_larmor,
        "quasi_static": max_speed <= QUASI_STATIC_SPEED,
        "causal": bool(np.all(w.speed <= 1.0 + 1e-10)),
        "null_samples": int(np.count_nonzero(w.null)),
    }


def normalization_residual(field: Callable, q: "SpacetimePoint | ArrayLike") -> float:
    """|eta_{ab} u^a u^b - 1| of the frame four-velocity at Q."""
    _, sample = four_velocity(field, q)
    if sample.null:
        return 0.0
    u = sample.four_vector / math.sqrt(sample.norm_sq)
    return abs(float(u @ MINKOWSKI @ u) - 1.0)


# --- command line --------------------------------------------------------------------------

TRAJECTORY_COLUMNS = (
    "tau", "t", "r", "theta", "phi", "speed", "N_x", "N_y", "N_z",
    "q_x", "q_y", "q_z", "Nrg_x", "Nrg_y", "Nrg_z", "ring_speed",
)  # fmt: skip
_TRAJECTORY_KEYS = (
    "state_file",
    "coefficients",
    "q0",
    "tau_span",
    "cadence",
    "ring_normal",
    "rtol",
)


def add_trajectory_arguments(parser: argparse.ArgumentParser) -> None:
    """Add trajectory command arguments to a parser."""
    add_model_arguments(parser)
    parser.add_argument(
        "--state-file", action="append", help="State file from 'zgkn state' (repeat to superpose)"
    )
    parser.add_argument("--coefficients", help="Superposition coefficients, one per state file")
    parser.add_argument("--q0", help="Initial point r,theta,phi or t,r,theta,phi")
    parser.add_argument("--tau-span", help="Proper-time span lo,hi (default: 0,100)")
    parser.add_argument("--cadence", type=float, help="Sampling interval in tau (default: 0.1)")
    parser.add_argument("--ring-normal", help="Ring normal x,y,z at tau=0 (default: 0,0,1)")
    parser.add_argument(
        "--rtol", type=float, help=f"Integrator relative tolerance (default: {GUIDE_RTOL})"
    )
    parser.add_argument(
        "--force", action="store_true", help="Accept state files with other parameters"
    )
    add_common_arguments(parser)


def _trajectory_config(args: argparse.Namespace) -> RunConfig:
    if getattr(args, "config", None) or getattr(args, "a", None) is not None:
        return config_from_args(args, "trajectory", _TRAJECTORY_KEYS)
    files = getattr(args, "state_file", None)
    if not files:
        raise ConfigError("trajectory needs --state-file (or a config naming one)")
    params = load_state(files[0]).params
    values = {key: getattr(args, key, None) for key in _TRAJECTORY_KEYS}
    return RunConfig(params=params).with_section("trajectory", values)


def run_trajectory(args: argparse.Namespace) -> None:
    """Execute the trajectory command with parsed arguments."""
    config = _trajectory_config(args)
    opts = config.section("trajectory")
    files = opts.get("state_file")
    if not files:
        raise ConfigError("trajectory needs --state-file (or a config naming one)")
    files = [files] if isinstance(files, str) else list(files)
    force = bool(getattr(args, "force", False))
    states = [load_state(path, config.model_hash(), force) for path in files]
    coefficients = parse_float_list(opts["coefficients"]) if opts.get("coefficients") else None
    if len(states) == 1 and coefficients is None:
        field_ = EigenstateField(states[0])
    else:
        field_ = SuperpositionField.of_states(states, coefficients)

    if not opts.get("q0"):
        raise ConfigError("trajectory needs --q0")
    q0 = parse_float_list(opts["q0"])
    if len(q0) == 3:
        q0 = [0.0, *q0]
    if len(q0) != 4:
        raise ConfigError("--q0 takes r,theta,phi or t,r,theta,phi", q0=q0)
    tau_span = parse_float_list(opts.get("tau_span", "0,100"))
    if len(tau_span) != 2:
        raise ConfigError("--tau-span takes lo,hi", tau_span=tau_span)
    worldline = integrate_trajectory(
        field_,
        q0,
        (tau_span[0], tau_span[1]),
        float(opts.get("cadence", 0.1)),
        rtol=float(opts.get("rtol", GUIDE_RTOL)),
    )
    rows = worldline.rows()
    diagnostics: dict[str, Any] = {
        "model_hash": config.model_hash(),
        "quasi_static": quasi_static_report(worldline, config.params),
    }
    payload: dict[str, Any] = {"worldline": worldline.to_dict()}
    try:
        track = ring_frame_view(worldline, parse_float_list(opts.get("ring_normal", "0,0,1")))
    except DegenerateFrameError as e:
        logger.warning("No ring-frame view: %s", e.message)
    else:
        payload["ring_track"] = track.to_dict()
        for row, extra in zip(rows, track.rows()):
            row.update(extra)
    envelope = ResultEnvelope(
        command="trajectory",
        config_hash=config.config_hash(),
        payload=payload,
        diagnostics=diagnostics,
        warnings=config.warnings,
    )
    report = diagnostics["quasi_static"]
    text = (
        f"{len(rows)} samples, tau in [{worldline.tau[0]:g}, {worldline.tau[-1]:g}], "
        f"max speed {report['max_speed']:.3e} c "
        f"({'quasi-static' if report['quasi_static'] else 'not quasi-static'})"
    )
    emit_result(envelope, args, rows, TRAJECTORY_COLUMNS, text)
