"""Shared fixtures for the zgkn test suite."""

import pytest

from zgkn.geometry import ModelParams


@pytest.fixture
def hydrogen_params():
    """Separable hydrogen-like ring inside the admissible region."""
    return ModelParams.hydrogenic(a=0.05, gamma=-0.25)


@pytest.fixture
def unit_ring():
    """Unit ring with unit charges, the setting of the interaction closed forms."""
    return ModelParams(a=1.0, charge=1.0, point_charge=1.0)


@pytest.fixture(scope="session")
def ground_state():
    """kappa = -1/2, branch -1 ground state, solved once per session."""
    from zgkn.spectral import solve_eigenvalue

    return solve_eigenvalue(ModelParams.hydrogenic(a=0.05, gamma=-0.25), -0.5, -1)
