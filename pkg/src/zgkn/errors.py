#!/usr/bin/env python3
"""Exception hierarchy for zgkn.

Every failure the library can signal is a ``ZgknError``. Each error carries a
human-readable message plus a ``details`` mapping that serializes to JSON, and
an ``exit_code`` the CLI uses: 2 for configuration problems, 3 for numerical
failures.

Example:
    >>> from zgkn.errors import RingPointError
    >>> try:
    ...     raise RingPointError("point lies on the ring", rho=1.0, z=0.0)
    ... except RingPointError as exc:
    ...     print(exc.to_dict()["details"])
    {'rho': 1.0, 'z': 0.0}
"""

from typing import Any

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ZgknError(Exception):
    """Base class for all zgkn errors."""

    exit_code = EXIT_NUMERICAL

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict[str, Any]:
        """Convert to a JSON-ready dictionary."""
        return {
            "error": type(self).__name__,
            "message": self.message,
            "details": {k: _jsonable(v) for k, v in self.details.items()},
        }


def _jsonable(value: Any) -> Any:
    if hasattr(value, "to_dict"):
        return value.to_dict()
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, complex):
        return [value.real, value.imag]
    if hasattr(value, "tolist"):
        return value.tolist()
    return value


class ConfigError(ZgknError, ValueError):
    """Malformed configuration or invalid parameters."""

    exit_code = EXIT_CONFIG


class InvalidQuantumNumbersError(ConfigError):
    """Quantum numbers outside the range a formula or solver accepts."""


class RingPointError(ZgknError, ValueError):
    """The ring singularity is not part of the manifold."""


class CoincidentPointsError(ZgknError, ValueError):
    """Field point and point source coincide on the same sheet."""


class PoleEvaluationError(ZgknError, ValueError):
    """Evaluation at θ ∈ {0, π}, where the azimuth is degenerate."""


class ZeroSpinorError(ZgknError, ValueError):
    """A spinor decomposition was asked of the zero vector."""


class GridMismatchError(ZgknError, ValueError):
    """Two grid bi-spinors live on different grids or κ-modes."""


class AsymmetricGridError(ZgknError, ValueError):
    """The grid is not symmetric under (r, θ) → (−r, π − θ)."""


class OutOfGridError(ZgknError, ValueError):
    """Evaluation outside the tabulated range of a separated state."""


class NoGapError(ZgknError, ValueError):
    """Energy at or beyond the mass gap, where the spectrum is continuous."""


class NonSeparableError(ZgknError, ValueError):
    """The KN-anomalous case Q ≠ Iπa does not separate."""


class NoRootInBracketError(ZgknError):
    """Bracket expansion failed to enclose a root."""


class NoConvergenceError(ZgknError):
    """An iteration did not reach its tolerance; details carry the report."""


class StiffnessFailureError(ZgknError):
    """The ODE integrator failed (step-size underflow) at a recorded location."""


class ZeroDensityError(ZgknError):
    """The trajectory left the support of the guiding field."""


class DegenerateFrameError(ZgknError):
    """The orientation Dreibein is undefined (n₁ × n₂ = 0 or n_Ψ = 0)."""


class QuadratureDivergenceError(ZgknError):
    """An excision ladder failed to converge monotonically."""
