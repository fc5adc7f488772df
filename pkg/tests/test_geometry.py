"""Tests for charts, parameters and sheet machinery."""

import math

import numpy as np
import pytest

from zgkn.errors import ConfigError, RingPointError
from zgkn.geometry import (
    HEADLINE_RING_RADIUS,
    REDUCED_COMPTON_WAVELENGTH_M,
    ModelParams,
    SpacetimePoint,
    compton_to_si,
    conical_angle_ratio,
    cyl_to_os,
    dual_frame_coords,
    metric_coeffs,
    os_to_cyl,
    projected_jacobian,
    sheet_swap,
    si_to_compton,
)


class TestModelParams:
    """Tests for parameter validation and derived quantities."""

    def test_hydrogenic_coupling(self):
        """The hydrogen-like constructor reproduces gamma and is separable."""
        params = ModelParams.hydrogenic(a=0.05, gamma=-0.25)
        assert params.gamma == pytest.approx(-0.25)
        assert params.is_separable
        assert params.ring_current == pytest.approx(params.charge / (math.pi * 0.05))

    def test_explicit_current_breaks_separability(self):
        params = ModelParams(a=1.0, charge=1.0, current=1.0)
        assert not params.is_separable
        assert params.anomaly == pytest.approx(1.0 - math.pi)

    def test_admissible_region(self, hydrogen_params):
        report = hydrogen_params.admissibility()
        assert report["admissible"]
        assert report["coupling_bound"] == pytest.approx(0.3)
        assert hydrogen_params.admissibility_warnings() == []

    def test_large_ring_warns(self):
        params = ModelParams.hydrogenic(a=0.6, gamma=-0.1)
        report = params.admissibility()
        assert not report["am_below_half"]
        assert any("1/2" in w for w in params.admissibility_warnings())

    def test_non_positive_mass_rejected(self):
        with pytest.raises(ConfigError, match="Mass must be positive"):
            ModelParams(a=0.1, m=0.0)

    def test_non_finite_rejected(self):
        with pytest.raises(ConfigError, match="finite"):
            ModelParams(a=float("nan"))

    def test_dict_roundtrip(self, hydrogen_params):
        assert ModelParams.from_dict(hydrogen_params.to_dict()) == hydrogen_params

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="Unknown parameter keys"):
            ModelParams.from_dict({"a": 1.0, "spin": 0.5})

    def test_with_radius_keeps_charges(self, hydrogen_params):
        other = hydrogen_params.with_radius(1e-4)
        assert other.a == 1e-4
        assert other.gamma == pytest.approx(hydrogen_params.gamma)


class TestProjection:
    """Tests for the 2:1 projection to cylindrical coordinates."""

    @pytest.mark.parametrize("a", [1.0, -0.3, 0.05])
    def test_roundtrip_both_sheets(self, a):
        rng = np.random.default_rng(7)
        A = abs(a)
        r = A * np.sinh(rng.uniform(-4.0, 4.0, 5000))
        theta = np.arccos(rng.uniform(-1.0, 1.0, 5000))
        keep = r * r + (a * np.cos(theta)) ** 2 > 1e-2 * A * A
        r, theta = r[keep], theta[keep]
        rho, z, _ = os_to_cyl(r, theta, 0.0, a)
        for sheet in (1, -1):
            mask = np.sign(r) == sheet
            r2, theta2 = cyl_to_os(rho[mask], z[mask], sheet, a)
            np.testing.assert_allclose(r2, r[mask], rtol=1e-12, atol=1e-12 * A)
            np.testing.assert_allclose(theta2, theta[mask], atol=1e-12)

    def test_swapped_point_has_same_projection(self):
        rho, z, phi = os_to_cyl(0.7, 1.1, 0.4, 1.0)
        rho_s, z_s, phi_s = os_to_cyl(-0.7, math.pi - 1.1, 0.4, 1.0)
        assert (rho_s, z_s, phi_s) == pytest.approx((rho, z, phi))

    @pytest.mark.parametrize("sheet,expected", [(1, math.pi / 6), (-1, 5 * math.pi / 6)])
    def test_disc_points(self, sheet, expected):
        """Points of the disc map to r = 0 with the sheet choosing the face."""
        r, theta = cyl_to_os(0.5, 0.0, sheet, 1.0)
        assert r == 0.0
        assert theta == pytest.approx(expected)

    def test_ring_rejected(self):
        with pytest.raises(RingPointError):
            cyl_to_os(1.0, 0.0, 1, 1.0)

    def test_bad_sheet_rejected(self):
        with pytest.raises(ConfigError, match="sheet"):
            cyl_to_os(1.0, 1.0, 0, 1.0)

    def test_metric_pulls_back_euclidean_length(self):
        """g(X, X) = -|dPi X|^2 for spatial X."""
        r, theta, phi, a = 0.8, 1.2, 0.3, 0.6
        g = metric_coeffs(SpacetimePoint(0.0, r, theta, phi), a)
        J = projected_jacobian(r, theta, phi, a)
        X = np.array([0.3, -1.1, 0.7])
        assert X @ g[1:, 1:] @ X == pytest.approx(-np.dot(J @ X, J @ X))


class TestSpacetimePoint:
    """Tests for point construction, charts and the sheet swap."""

    def test_theta_range_enforced(self):
        with pytest.raises(ConfigError, match="theta"):
            SpacetimePoint(0.0, 1.0, 4.0)

    def test_phi_normalized(self):
        assert SpacetimePoint(0.0, 1.0, 1.0, -0.5).phi == pytest.approx(2 * math.pi - 0.5)

    @pytest.mark.parametrize(
        "r,theta,sheet", [(1.0, 1.0, 1), (-1.0, 1.0, -1), (0.0, 1.0, 1), (0.0, 2.0, -1)]
    )
    def test_sheet(self, r, theta, sheet):
        assert SpacetimePoint(0.0, r, theta).sheet == sheet

    def test_sheet_swap_is_involution(self):
        p = SpacetimePoint(1.5, 0.4, 0.9, 2.0)
        q = sheet_swap(sheet_swap(p))
        assert (q.t, q.r, q.theta, q.phi) == pytest.approx((p.t, p.r, p.theta, p.phi))
        assert sheet_swap(p).sheet == -p.sheet
        np.testing.assert_allclose(sheet_swap(p).cartesian(0.5), p.cartesian(0.5), atol=1e-14)

    def test_ring_centered_roundtrip(self):
        p = SpacetimePoint.from_ring_centered(-2.0, 0.3, 1.0, a=0.5)
        assert p.ring_centered(0.5) == pytest.approx((-2.0, 0.3))
        assert p.sheet == -1

    def test_cylindrical_roundtrip(self):
        p = SpacetimePoint.from_cylindrical(1.3, -0.4, 0.2, -1, a=1.0)
        rho, z, phi, sheet = p.cylindrical(1.0)
        assert (rho, z, phi, sheet) == pytest.approx((1.3, -0.4, 0.2, -1))

    @pytest.mark.parametrize("r,theta", [(0.6, 0.8), (-0.6, 0.8), (2.0, 2.5), (-0.2, 1.4)])
    def test_peripolar_roundtrip(self, r, theta):
        p = SpacetimePoint(0.0, r, theta, 1.0)
        zeta, chi, phi = p.peripolar(1.0)
        q = SpacetimePoint.from_peripolar(zeta, chi, phi, 1.0)
        assert (q.r, q.theta, q.phi) == pytest.approx((p.r, p.theta, p.phi), abs=1e-10)

    def test_peripolar_angle_marks_sheet(self):
        _, chi_plus, _ = SpacetimePoint(0.0, 0.6, 0.8).peripolar(1.0)
        _, chi_minus, _ = SpacetimePoint(0.0, -0.6, 0.8).peripolar(1.0)
        assert -math.pi < chi_plus < math.pi
        assert math.pi < chi_minus < 3 * math.pi

    @pytest.mark.parametrize("theta,chi", [(0.7, math.pi), (2.0, 3 * math.pi)])
    def test_disc_angle_follows_face(self, theta, chi):
        _, on_disc, _ = SpacetimePoint(0.0, 0.0, theta).peripolar(1.0)
        assert on_disc == chi

    def test_dual_frame_involution(self):
        once = dual_frame_coords(0.5, 0.7, 6.0)
        assert dual_frame_coords(*once) == pytest.approx((0.5, 0.7, 6.0))


class TestConicalAngle:
    """The loop around the ring closes only after both sheets."""

    def test_ratio_tends_to_four_pi(self):
        assert conical_angle_ratio(1e-3, 1.0) == pytest.approx(4 * math.pi, rel=1e-2)

    def test_radius_must_be_small(self):
        with pytest.raises(ConfigError, match="radius"):
            conical_angle_ratio(0.5, 1.0)


class TestUnits:
    def test_headline_radius_in_metres(self):
        assert compton_to_si(HEADLINE_RING_RADIUS) == pytest.approx(
            HEADLINE_RING_RADIUS * REDUCED_COMPTON_WAVELENGTH_M
        )

    def test_inverse(self):
        assert si_to_compton(compton_to_si(3.0)) == pytest.approx(3.0)
