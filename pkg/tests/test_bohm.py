"""Tests for guiding-law trajectories and the ring-frame view."""

import math

import numpy as np
import pytest

from zgkn.bohm import (
    EigenstateField,
    SuperpositionField,
    UniformField,
    dominant_frequency,
    four_velocity,
    guide_step,
    integrate_ensemble,
    integrate_trajectory,
    normalization_residual,
    quasi_static_report,
    ring_frame_view,
)
from zgkn.errors import ConfigError, DegenerateFrameError, ZeroDensityError
from zgkn.geometry import ModelParams, SpacetimePoint

A = 0.05
GENERIC = np.array([0.3 + 0.4j, -0.2 + 0.1j, 0.5 - 0.6j, 0.1 + 0.7j])


@pytest.fixture
def start():
    return SpacetimePoint(0.0, 3.0, 1.0, 0.0)


class TestUniformFields:
    """Constant guiding bi-spinors with closed-form currents."""

    def test_zero_current_is_static(self, start):
        w = integrate_trajectory(UniformField([1, 0, 1, 0], A), start, (0.0, 1.0), 0.25)
        assert len(w.tau) == 5
        np.testing.assert_allclose(w.r, start.r, atol=1e-12)
        np.testing.assert_allclose(w.theta, start.theta, atol=1e-12)
        assert np.all(np.diff(w.t) > 0)
        assert np.all(w.speed == 0)

    def test_parallel_halves_have_no_frame(self, start):
        w = integrate_trajectory(UniformField([1, 0, 1, 0], A), start, (0.0, 0.5), 0.25)
        assert np.all(w.degenerate)
        with pytest.raises(DegenerateFrameError):
            ring_frame_view(w)

    def test_timelike_current_moves_inward(self, start):
        """j = (0, 0, -0.75) with j0 = 1.25 drives r down at frame speed 0.6."""
        w = integrate_trajectory(UniformField([0, 1, 0, 0.5], A), start, (0.0, 1.0), 0.1)
        assert np.all(np.diff(w.r) < 0)
        np.testing.assert_allclose(w.speed, 0.6, rtol=1e-12)
        assert not np.any(w.null)

    def test_null_current_uses_affine_law(self, start):
        w = integrate_trajectory(UniformField([1, 0, 0, 1], A), start, (0.0, 0.5), 0.1)
        assert np.all(w.null)
        assert np.all(np.diff(w.r) > 0)
        report = quasi_static_report(w, ModelParams.hydrogenic(a=A, gamma=-0.25))
        assert report["null_samples"] == len(w.tau)

    def test_generic_field_frame_and_ring_view(self, start):
        w = integrate_trajectory(UniformField(GENERIC, A), start, (0.0, 0.5), 0.1)
        assert not np.any(w.degenerate)
        for frame in w.dreibein:
            np.testing.assert_allclose(frame @ frame.T, np.eye(3), atol=1e-10)
        track = ring_frame_view(w, ring_normal=(0.0, 0.0, 2.0))
        assert track.consistency < 1e-10
        np.testing.assert_allclose(track.normal[0], [0.0, 0.0, 1.0], atol=1e-10)
        np.testing.assert_allclose(track.q[0], -w.positions()[0], atol=1e-10)
        np.testing.assert_allclose(np.linalg.norm(track.normal, axis=1), 1.0)

    def test_four_velocity_is_normalized(self, start):
        assert normalization_residual(UniformField(GENERIC, A), start) < 1e-12

    def test_guide_step_agrees_with_integrator(self, start):
        field = UniformField([0, 1, 0, 0.5], A)
        w = integrate_trajectory(field, start, (0.0, 0.01), 0.01)
        np.testing.assert_allclose(guide_step(field, start, 0.01), w.coords[-1], atol=1e-9)

    def test_ensemble(self, start):
        other = SpacetimePoint(0.0, -2.0, 2.0, 1.0)
        field = UniformField([1, 0, 1, 0], A)
        lines = integrate_ensemble(field, [start, other], (0.0, 0.2), 0.1, workers=2)
        assert [line.r[0] for line in lines] == [3.0, -2.0]


class TestSuperposition:
    def test_beat_frequency(self, start):
        """Two uniform terms beat at the energy difference in coordinate time."""
        field = SuperpositionField(
            [
                (1.0, UniformField([1, 0, 1, 0], A, energy=0.5)),
                (1.0, UniformField([0.2, 0, 0, 0], A, energy=-0.5)),
            ]
        )
        w = integrate_trajectory(field, start, (0.0, 40.0), 0.1)
        assert dominant_frequency(w, "r") == pytest.approx(1.0, rel=0.05)
        assert field.energies == (0.5, -0.5)

    def test_empty_rejected(self):
        with pytest.raises(ConfigError, match="at least one term"):
            SuperpositionField([])

    def test_mixed_radii_rejected(self):
        with pytest.raises(ConfigError, match="different ring radii"):
            SuperpositionField([(1, UniformField(GENERIC, 0.1)), (1, UniformField(GENERIC, 0.2))])


class TestGuards:
    def test_tau_span_must_increase(self, start):
        with pytest.raises(ConfigError, match="increasing"):
            integrate_trajectory(UniformField(GENERIC, A), start, (1.0, 0.0), 0.1)

    def test_cadence_must_be_positive(self, start):
        with pytest.raises(ConfigError, match="cadence"):
            integrate_trajectory(UniformField(GENERIC, A), start, (0.0, 1.0), 0.0)

    def test_zero_density_keeps_partial_worldline(self, start):
        with pytest.raises(ZeroDensityError) as exc:
            integrate_trajectory(UniformField(np.zeros(4), A), start, (0.0, 1.0), 0.1)
        assert len(exc.value.partial.tau) == 0

    def test_four_velocity_rejects_empty_support(self, start):
        with pytest.raises(ZeroDensityError):
            four_velocity(UniformField(np.zeros(4), A), start)

    def test_dominant_frequency_arguments(self, start):
        w = integrate_trajectory(UniformField(GENERIC, A), start, (0.0, 0.3), 0.1)
        with pytest.raises(ConfigError, match="Unknown coordinate"):
            dominant_frequency(w, "x")
        with pytest.raises(ConfigError, match="Too few"):
            dominant_frequency(w)

    def test_ring_normal_must_be_non_zero(self, start):
        w = integrate_trajectory(UniformField(GENERIC, A), start, (0.0, 0.2), 0.1)
        with pytest.raises(ConfigError, match="non-zero"):
            ring_frame_view(w, ring_normal=(0.0, 0.0, 0.0))


@pytest.mark.slow
class TestEigenstateField:
    def test_eigenstate_circulates(self, ground_state):
        """A separated eigenstate keeps r and theta fixed and only advances phi."""
        gap = math.sqrt(1.0 - ground_state.E**2)
        r0 = 1.0 / gap
        start = SpacetimePoint(0.0, r0, 1.0, 0.0)
        w = integrate_trajectory(EigenstateField(ground_state), start, (0.0, 0.5 * r0), 0.01 * r0)
        assert np.max(np.abs(w.r - r0)) <= 1e-6
        assert np.max(np.abs(w.theta - 1.0)) <= 1e-6
        assert np.all(w.speed <= 1.0)
        report = quasi_static_report(w, ground_state.params)
        assert report["causal"]
