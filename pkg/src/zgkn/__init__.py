"""zgkn - Dirac equation on the zero-gravity Kerr-Newman spacetime.

A numerical lab for a single electron interacting with a charged, current-
carrying ring whose field lives on a flat, double-sheeted space. The package
covers the geometry and its charts, the ring's electromagnetic fields, the
Dirac operator in a Cartan frame, the separated eigenvalue problem,
bi-spinor kinematics, guiding-law trajectories and the mutual field-energy
integrals.

Components:
    - ModelParams, SpacetimePoint: parameters and points of the manifold
    - solve_eigenvalue, spectrum_scan: separated eigenstates
    - integrate_trajectory: guiding-law worldlines with their Dreibein
    - interaction_P0, interaction_Pj: excision ladders versus closed forms

Quick Start:
    1. Solve the ground state of a hydrogen-like ring:
        >>> from zgkn import ModelParams, solve_eigenvalue
        >>> params = ModelParams.hydrogenic(a=0.05, gamma=-0.25)
        >>> state = solve_eigenvalue(params, kappa=-0.5, branch=-1)

    2. Follow the point charge in it:
        >>> from zgkn import EigenstateField, SpacetimePoint, integrate_trajectory
        >>> w = integrate_trajectory(
        ...     EigenstateField(state), SpacetimePoint(0.0, 4.0, 1.0, 0.0), (0.0, 10.0), 0.5
        ... )

    3. Check the minimal re-coupling identity:
        >>> from zgkn import interaction_P0, source_point
        >>> ring = ModelParams(a=1.0, charge=1.0, point_charge=1.0)
        >>> result = interaction_P0(source_point([2.0, 0.3, 0.0], ring.a), ring)
        >>> result.within(0.01)
        True
"""

from ._version import __version__
from .bispinor import BiSpinor, current, orientation
from .bohm import (
    EigenstateField,
    SuperpositionField,
    UniformField,
    Worldline,
    integrate_ensemble,
    integrate_trajectory,
    ring_frame_view,
)
from .config import RunConfig
from .dirac_op import GridBiSpinor, RadialThetaGrid, cartan_frame, residual_norm
from .errors import ConfigError, ZgknError
from .fields import akn_gen, em_fields, phi_kn, phi_pt, psi_kn
from .geometry import ModelParams, SpacetimePoint, cyl_to_os, os_to_cyl, sheet_swap
from .interaction import (
    InteractionResult,
    QuadratureConfig,
    interaction_P0,
    interaction_Pj,
    interaction_report,
    source_point,
)
from .results import ResultEnvelope
from .spectral import (
    SeparatedState,
    continue_to_sommerfeld,
    mirror_partner,
    solve_angular,
    solve_eigenvalue,
    solve_radial,
    spectrum_scan,
)

__all__ = [
    "__version__",
    # Geometry and parameters
    "ModelParams",
    "SpacetimePoint",
    "os_to_cyl",
    "cyl_to_os",
    "sheet_swap",
    # Fields
    "phi_kn",
    "psi_kn",
    "akn_gen",
    "phi_pt",
    "em_fields",
    # Dirac operator
    "cartan_frame",
    "RadialThetaGrid",
    "GridBiSpinor",
    "residual_norm",
    # Spectral problem
    "SeparatedState",
    "solve_angular",
    "solve_radial",
    "solve_eigenvalue",
    "mirror_partner",
    "spectrum_scan",
    "continue_to_sommerfeld",
    # Bi-spinors and trajectories
    "BiSpinor",
    "current",
    "orientation",
    "EigenstateField",
    "SuperpositionField",
    "UniformField",
    "Worldline",
    "integrate_trajectory",
    "integrate_ensemble",
    "ring_frame_view",
    # Interaction
    "QuadratureConfig",
    "InteractionResult",
    "interaction_P0",
    "interaction_Pj",
    "interaction_report",
    "source_point",
    # Plumbing
    "RunConfig",
    "ResultEnvelope",
    "ZgknError",
    "ConfigError",
]
