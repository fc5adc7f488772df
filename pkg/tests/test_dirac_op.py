"""Tests for the Cartan frame, grids, grid bi-spinors and symmetries."""

import math

import numpy as np
import pytest

from zgkn.bispinor import GAMMA
from zgkn.dirac_op import (
    GridBiSpinor,
    RadialThetaGrid,
    cartan_frame,
    hamiltonian_apply,
    inner_product,
    lower_order_transform,
    metric_reconstruction_error,
    mhat,
    mhat_eigenvalues,
    norm,
    rotation_coeffs,
    structure_equation_residual,
    symmetry_apply,
)
from zgkn.errors import ConfigError, GridMismatchError, PoleEvaluationError
from zgkn.geometry import ModelParams, SpacetimePoint


def _smooth(grid: RadialThetaGrid, seed: int = 0) -> np.ndarray:
    r, theta = grid.mesh()
    rng = np.random.default_rng(seed)
    coeffs = rng.normal(size=4) + 1j * rng.normal(size=4)
    envelope = np.exp(-r * r) * np.sin(theta) ** 2
    return envelope[..., None] * coeffs


class TestCartanFrame:
    """Tests for the canonical symmetric tetrad."""

    @pytest.mark.parametrize("r,theta", [(0.5, 0.7), (-1.2, 2.0), (0.1, 1.5), (3.0, 0.2)])
    def test_duality_and_metric(self, r, theta):
        p = SpacetimePoint(0.0, r, theta, 0.4)
        assert cartan_frame(p, 0.6).duality_error() < 1e-13
        assert metric_reconstruction_error(p, 0.6) < 1e-12

    @pytest.mark.parametrize("r,theta", [(0.5, 0.7), (-1.2, 2.0), (2.0, 1.2)])
    def test_structure_equations(self, r, theta):
        assert structure_equation_residual(SpacetimePoint(0.0, r, theta), 0.6) < 1e-6

    @pytest.mark.parametrize("a", [0.05, 0.01, -0.02])
    def test_structure_equations_small_ring(self, a):
        for r, theta in ((0.5 * a, 0.7), (-2.0 * a, 2.0), (3.0 * a, 1.4)):
            assert structure_equation_residual(SpacetimePoint(0.0, r, theta), a) < 1e-6

    def test_axis_rejected(self):
        with pytest.raises(PoleEvaluationError):
            cartan_frame(SpacetimePoint(0.0, 1.0, 0.0), 0.5)

    def test_flat_limit_rotation_coefficients(self):
        c = rotation_coeffs(SpacetimePoint(0.0, 2.0, 0.8), 0.0)
        assert c.E == pytest.approx(0.5)
        assert c.F == pytest.approx(1.0 / (2.0 * math.tan(0.8)))
        assert (c.A, c.B, c.C, c.D) == (0.0, 0.0, 0.0, 0.0)


class TestMhat:
    def test_equatorial_disc_value(self):
        assert mhat_eigenvalues(SpacetimePoint(0.0, 0.0, math.pi / 2), a=1.0) == (2.0, 0.0)

    @pytest.mark.parametrize("r,theta,a", [(0.5, 1.0, 0.3), (-2.0, 2.5, 1.0), (0.0, 0.3, -0.4)])
    def test_matrix_spectrum(self, r, theta, a):
        p = SpacetimePoint(0.0, r, theta)
        plus, minus = mhat_eigenvalues(p, a)
        expected = np.sort([plus, plus, minus, minus])
        np.testing.assert_allclose(np.linalg.eigvalsh(mhat(p, a)), expected, atol=1e-14)


class TestRadialThetaGrid:
    """Tests for the compactified, swap-symmetric grid."""

    def test_symmetric_and_pole_free(self):
        grid = RadialThetaGrid(32, 16, r_scale=2.0, r_max=50.0)
        assert grid.is_symmetric()
        assert grid.theta.min() > 0 and grid.theta.max() < math.pi
        assert grid.r.max() < 50.0
        assert np.all(grid.weights > 0)

    def test_too_small_rejected(self):
        with pytest.raises(ConfigError, match="at least 5"):
            RadialThetaGrid(4, 16)

    def test_radial_derivative(self):
        grid = RadialThetaGrid(200, 8, r_scale=1.0, r_max=5.0)
        r, _ = grid.mesh()
        d = grid.d_dr(np.exp(-r * r))
        np.testing.assert_allclose(d, -2 * r * np.exp(-r * r), atol=1e-5)

    def test_polar_derivative(self):
        grid = RadialThetaGrid(8, 128)
        _, theta = grid.mesh()
        d = grid.d_dtheta(np.cos(theta))
        np.testing.assert_allclose(d[:, 2:-2], -np.sin(theta)[:, 2:-2], atol=1e-6)

    def test_dict_roundtrip(self):
        grid = RadialThetaGrid(16, 8, r_scale=0.5, r_max=10.0)
        assert RadialThetaGrid.from_dict(grid.to_dict()) == grid


class TestGridBiSpinor:
    """Tests for grid bi-spinor arithmetic, persistence and symmetries."""

    @pytest.fixture
    def grid(self):
        return RadialThetaGrid(24, 16, r_scale=1.0, r_max=6.0)

    def test_shape_checked(self, grid):
        with pytest.raises(GridMismatchError):
            GridBiSpinor(grid, np.zeros((24, 15, 4)), 0.5)

    def test_arithmetic(self, grid):
        psi = GridBiSpinor(grid, _smooth(grid), 0.5)
        np.testing.assert_allclose((psi + 2 * psi - psi).values, 2 * psi.values)

    def test_modes_must_match(self, grid):
        psi = GridBiSpinor(grid, _smooth(grid), 0.5)
        with pytest.raises(GridMismatchError):
            psi + GridBiSpinor(grid, _smooth(grid), -0.5)

    def test_save_load(self, grid, tmp_path):
        psi = GridBiSpinor(grid, _smooth(grid), 1.5, metadata={"E": 0.9})
        path = tmp_path / "psi.zgrid"
        psi.save(path)
        loaded = GridBiSpinor.load(path)
        np.testing.assert_array_equal(loaded.values, psi.values)
        assert loaded.kappa == 1.5
        assert loaded.grid == grid
        assert loaded.metadata["E"] == 0.9

    def test_inner_product_hermitian(self, grid):
        psi = GridBiSpinor(grid, _smooth(grid, 1), 0.5)
        phi = GridBiSpinor(grid, _smooth(grid, 2), 0.5)
        assert inner_product(psi, phi, 0.3) == pytest.approx(np.conj(inner_product(phi, psi, 0.3)))
        assert norm(psi, 0.3) > 0

    def test_sheet_swap_is_involution(self, grid):
        psi = GridBiSpinor(grid, _smooth(grid), 0.5)
        twice = symmetry_apply(symmetry_apply(psi, "S_hat"), "S_hat")
        np.testing.assert_array_equal(twice.values, psi.values)

    def test_c_hat_squares_to_identity(self, grid):
        psi = GridBiSpinor(grid, _smooth(grid), 0.5)
        once = symmetry_apply(psi, "C_hat")
        assert once.kappa == -0.5
        twice = symmetry_apply(once, "C_hat")
        assert twice.kappa == 0.5
        np.testing.assert_allclose(twice.values, psi.values, atol=1e-15)

    def test_unknown_operator(self, grid):
        with pytest.raises(ConfigError, match="Unknown symmetry operator"):
            symmetry_apply(GridBiSpinor(grid, _smooth(grid), 0.5), "P_hat")

    def test_lower_order_transform_inverts(self, grid):
        psi = GridBiSpinor(grid, _smooth(grid), 0.5)
        back = lower_order_transform(lower_order_transform(psi, 0.3), 0.3, inverse=True)
        np.testing.assert_allclose(back.values, psi.values, atol=1e-13)

    def test_derivative_shapes_checked(self, grid):
        psi = GridBiSpinor(grid, _smooth(grid), 0.5)
        bad = np.zeros((24, 16, 3))
        with pytest.raises(GridMismatchError):
            hamiltonian_apply(psi, ModelParams.hydrogenic(a=0.3, gamma=-0.2), (bad, bad))

    def test_hamiltonian_keeps_mode(self, grid):
        psi = GridBiSpinor(grid, _smooth(grid), 0.5)
        out = hamiltonian_apply(psi, ModelParams.hydrogenic(a=0.3, gamma=-0.2))
        assert out.kappa == 0.5
        assert np.all(np.isfinite(out.values))


def _vanishing_envelope(grid: RadialThetaGrid, a: float):
    """Sigma e^{-r^2} sin^4(theta) with its analytic (r, theta) derivatives."""
    r, theta = grid.mesh()
    st, ct = np.sin(theta), np.cos(theta)
    sigma = r * r + (a * ct) ** 2
    gauss, s4 = np.exp(-r * r), st**4
    value = sigma * gauss * s4
    d_r = 2.0 * r * (1.0 - sigma) * gauss * s4
    d_theta = gauss * (-2.0 * a * a * ct * st * s4 + sigma * 4.0 * st**3 * ct)
    return value, d_r, d_theta


class TestHamiltonian:
    """Tests for the single-mode Hamiltonian against exact derivatives."""

    def test_hermitian_in_mhat_product(self):
        a = 0.3
        params = ModelParams.hydrogenic(a=a, gamma=-0.2)
        grid = RadialThetaGrid(160, 96)
        g, g_r, g_theta = _vanishing_envelope(grid, a)
        r, _ = grid.mesh()
        rng = np.random.default_rng(7)
        c1 = rng.normal(size=4) + 1j * rng.normal(size=4)
        c2 = rng.normal(size=4) + 1j * rng.normal(size=4)
        tilt = 1.0 + 0.5 * r
        psi = GridBiSpinor(grid, g[..., None] * c1, 0.5)
        phi = GridBiSpinor(grid, (g * tilt)[..., None] * c2, 0.5)
        psi_d = (g_r[..., None] * c1, g_theta[..., None] * c1)
        phi_d = (
            (g_r * tilt + 0.5 * g)[..., None] * c2,
            (g_theta * tilt)[..., None] * c2,
        )
        left = inner_product(psi, hamiltonian_apply(phi, params, phi_d), a)
        right = inner_product(hamiltonian_apply(psi, params, psi_d), phi, a)
        assert abs(left) > 1e-3
        assert abs(left - right) <= 1e-8 * abs(left)

    def test_free_dirac_operator(self):
        params = ModelParams.hydrogenic(a=0.0, gamma=0.0, m=1.3)
        grid = RadialThetaGrid(24, 16, r_scale=1.0, r_max=6.0)
        g, g_r, g_theta = _vanishing_envelope(grid, 0.0)
        r, theta = grid.mesh()
        coeffs = np.array([1.0, 0.5j, -0.3, 0.2 + 0.1j])
        kappa = 1.5
        values = g[..., None] * coeffs
        d_r, d_theta = g_r[..., None] * coeffs, g_theta[..., None] * coeffs
        out = hamiltonian_apply(GridBiSpinor(grid, values, kappa), params, (d_r, d_theta))

        def mv(matrix, v):
            return np.einsum("ij,...j->...i", matrix, v)

        g0, g1, g2, g3 = GAMMA
        inner = (
            -1j * mv(g3, d_r)
            - 1j * mv(g1, d_theta) / np.abs(r)[..., None]
            + (kappa / (np.abs(r) * np.sin(theta)))[..., None] * mv(g2, values)
            + 1.3 * np.sign(r)[..., None] * values
        )
        np.testing.assert_allclose(out.values, mv(g0, inner), atol=1e-12)

    def test_free_particle_at_rest(self):
        params = ModelParams.hydrogenic(a=0.0, gamma=0.0, m=0.8)
        grid = RadialThetaGrid(12, 10, r_scale=1.0, r_max=4.0)
        eigvals, eigvecs = np.linalg.eigh(GAMMA[0])
        spinor = eigvecs[:, np.argmax(eigvals)]
        values = np.broadcast_to(spinor, (*grid.shape, 4)).copy()
        zeros = np.zeros_like(values)
        out = hamiltonian_apply(GridBiSpinor(grid, values, 0.0), params, (zeros, zeros))
        r, _ = grid.mesh()
        np.testing.assert_allclose(out.values, 0.8 * np.sign(r)[..., None] * values, atol=1e-13)
