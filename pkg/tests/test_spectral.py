"""Tests for the separated eigenvalue problem."""

import math
from types import SimpleNamespace

import numpy as np
import pytest
from scipy import integrate

from zgkn.errors import (
    ConfigError,
    InvalidQuantumNumbersError,
    NoGapError,
    NoConvergenceError,
    NonSeparableError,
    OutOfGridError,
)
from zgkn.geometry import ModelParams
from zgkn.spectral import (
    SeparatedState,
    SkippedLevel,
    angular_eigenvalues_dense,
    continue_to_sommerfeld,
    eigenstate_residual,
    handedness_summary,
    mirror_partner,
    radial_conservation_check,
    solve_angular,
    solve_eigenvalue,
    sommerfeld_energy,
    sommerfeld_seed,
    spectrum_scan,
)


class TestSommerfeld:
    """Tests for the Dirac-Coulomb reference levels."""

    def test_ground_level(self):
        alpha = 0.25
        assert sommerfeld_energy(1, -1, alpha) == pytest.approx(math.sqrt(1 - alpha * alpha))

    def test_free_limit(self):
        assert sommerfeld_energy(3, 2, 0.0, m=2.0) == pytest.approx(2.0)

    @pytest.mark.parametrize(
        "n,kappa,alpha",
        [(0, -1, 0.1), (1, 1, 0.1), (1, -2, 0.1), (2, 0, 0.1), (1, -1, 1.0), (1, -1, -0.1)],
    )
    def test_invalid_labels(self, n, kappa, alpha):
        with pytest.raises(InvalidQuantumNumbersError):
            sommerfeld_energy(n, kappa, alpha)

    def test_seed_is_lowest_level(self, hydrogen_params):
        assert sommerfeld_seed(hydrogen_params, -0.5, -1) == pytest.approx(math.sqrt(1 - 0.0625))


class TestAngular:
    """Tests for the angular eigenproblem."""

    def test_flat_dense_spectrum(self):
        """Without a ring the eigenvalues are +-(j + 1/2) with j >= |kappa|."""
        values = angular_eigenvalues_dense(0.0, 0.0, 0.5, n_nodes=60)
        assert values[values > 0].min() == pytest.approx(1.0, abs=1e-6)
        assert values[values < 0].max() == pytest.approx(-1.0, abs=1e-6)

    @pytest.mark.parametrize("branch", [1, -1, 2])
    def test_shooting_matches_dense(self, branch):
        am, aE, kappa = 0.3, 0.25, -0.5
        lam = solve_angular(am, aE, kappa, branch, tabulate=False).lam
        dense = angular_eigenvalues_dense(am, aE, kappa)
        assert np.min(np.abs(dense - lam)) < 1e-6
        assert math.copysign(1.0, lam) == math.copysign(1.0, branch)

    def test_branches_are_ordered(self):
        lams = [solve_angular(0.2, 0.1, 1.5, n, tabulate=False).lam for n in (-2, -1, 1, 2)]
        assert lams == sorted(lams)

    def test_table_is_normalized(self):
        sol = solve_angular(0.2, 0.1, 0.5, 1)
        norm = integrate.simpson(np.exp(2 * sol.ln_s), x=sol.theta)
        assert norm == pytest.approx(1.0, rel=1e-6)
        turns = (sol.Theta[-1] - sol.Theta[0] - math.pi) / (2 * math.pi)
        assert turns == pytest.approx(round(turns), abs=1e-3)

    @pytest.mark.parametrize("kappa,branch", [(0.3, 1), (0.0, 1), (0.5, 0)])
    def test_invalid_quantum_numbers(self, kappa, branch):
        with pytest.raises(InvalidQuantumNumbersError):
            solve_angular(0.1, 0.1, kappa, branch)


class TestEigenvalueGuards:
    """Failures that are detected before any shooting."""

    def test_non_separable_rejected(self):
        with pytest.raises(NonSeparableError):
            solve_eigenvalue(ModelParams(a=0.05, charge=0.25, current=1.0), -0.5, -1)

    def test_window_outside_gap(self, hydrogen_params):
        with pytest.raises(NoGapError):
            spectrum_scan(hydrogen_params, [0.5], (-0.5, 1.5))

    def test_scan_needs_two_samples(self, hydrogen_params):
        with pytest.raises(ConfigError, match="two samples"):
            spectrum_scan(hydrogen_params, [0.5], (-0.5, 0.5), n_samples=1)

    def test_handedness_summary(self):
        states = [
            SimpleNamespace(E=0.9, handedness=1),
            SimpleNamespace(E=-0.9, handedness=-1),
            SimpleNamespace(E=0.5, handedness=1),
        ]
        summary = handedness_summary(states)
        assert summary["counts"]["positive_right"] == 2
        assert summary["counts"]["negative_left"] == 1
        assert summary["correlation"] == pytest.approx(1.0)


@pytest.mark.slow
class TestGroundState:
    """Tests on the session ground state of the hydrogen-like ring."""

    def test_energy_near_coulomb(self, ground_state):
        assert -1.0 < ground_state.E < 1.0
        assert ground_state.E == pytest.approx(math.sqrt(1 - 0.25**2), abs=1e-2)
        assert ground_state.lam == pytest.approx(-1.0, abs=0.1)

    def test_table_symmetric_range(self, ground_state):
        assert ground_state.r[0] == pytest.approx(-ground_state.r_max)
        assert ground_state.handedness in (-1, 1)
        assert ground_state.norm_squared() > 0

    def test_out_of_table_rejected(self, ground_state):
        with pytest.raises(OutOfGridError):
            ground_state.radial_at(2 * ground_state.r_max)

    def test_amplitude_vanishes_at_poles(self, ground_state):
        S, _ = ground_state.angular_at(np.array([0.0, math.pi]))
        np.testing.assert_allclose(S, 0.0, atol=1e-12)

    def test_dict_roundtrip(self, ground_state):
        restored = SeparatedState.from_dict(ground_state.to_dict())
        assert restored.E == ground_state.E
        np.testing.assert_array_equal(restored.Omega, ground_state.Omega)

    def test_malformed_dict(self, ground_state):
        data = ground_state.to_dict(tables=False)
        with pytest.raises(ConfigError, match="Malformed"):
            SeparatedState.from_dict(data)

    def test_residuals(self, ground_state):
        residuals = eigenstate_residual(ground_state)
        assert residuals["H"] <= 1e-6
        assert residuals["C_hat"] <= 10 * max(residuals["H"], 1e-12)

    def test_radial_conservation(self, ground_state):
        assert radial_conservation_check(ground_state).ok

    def test_mirror_partner(self, ground_state):
        partner = mirror_partner(ground_state)
        assert partner.E == pytest.approx(-ground_state.E, abs=1e-10)
        assert partner.kappa == -ground_state.kappa

    def test_scan_finds_ground_state(self, hydrogen_params, ground_state):
        states = spectrum_scan(
            hydrogen_params, [-0.5], (0.9, 0.99), branches=[-1], n_samples=8, workers=1
        )
        assert any(abs(s.E - ground_state.E) < 1e-8 for s in states)


@pytest.mark.slow
class TestSommerfeldContinuation:
    """The ground level followed toward a -> 0 lands on the Sommerfeld 1S level."""

    def test_ground_level_continues(self):
        params = ModelParams.hydrogenic(a=1e-2, gamma=-0.25)
        comparison = continue_to_sommerfeld(params, -0.5, -1, a_ladder=(1e-2, 1e-3, 1e-4))
        assert (comparison.kappa_dirac, comparison.n_principal) == (-1, 1)
        assert comparison.reference == pytest.approx(sommerfeld_energy(1, -1, 0.25))
        d = comparison.deviations
        assert all(later <= earlier for earlier, later in zip(d, d[1:]))
        assert d[-1] < 1e-3
        assert comparison.to_dict()["a"] == [1e-2, 1e-3, 1e-4]


@pytest.mark.slow
class TestScanFailures:
    """Failed refinements are reported instead of silently dropped."""

    def _scan(self, params, **kwargs):
        return spectrum_scan(
            params, [-0.5], (0.9, 0.99), branches=[-1], n_samples=8, workers=1, **kwargs
        )

    def test_skipped_levels_recorded(self, hydrogen_params, monkeypatch):
        def refine(self, lo, hi, winding):
            raise NoConvergenceError("bracket lost")

        monkeypatch.setattr("zgkn.spectral._EigenSolver.refine", refine)
        skipped: list[SkippedLevel] = []
        assert self._scan(hydrogen_params, skipped=skipped) == []
        assert skipped
        assert (skipped[0].kappa, skipped[0].branch) == (-0.5, -1)
        assert "bracket lost" in skipped[0].message()

    def test_config_error_propagates(self, hydrogen_params, monkeypatch):
        def refine(self, lo, hi, winding):
            raise ConfigError("bad tolerance")

        monkeypatch.setattr("zgkn.spectral._EigenSolver.refine", refine)
        with pytest.raises(ConfigError, match="bad tolerance"):
            self._scan(hydrogen_params)
