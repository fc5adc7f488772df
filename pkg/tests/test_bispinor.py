"""Tests for Dirac matrices, Cayley-Klein parameters and currents."""

import math

import numpy as np
import pytest

from zgkn.bispinor import (
    ALPHA,
    GAMMA,
    MINKOWSKI,
    BiSpinor,
    cayley_klein,
    current,
    eigenstate_components,
    flip,
    generalized_ck,
    orientation,
    pauli_orientation,
    primed_frame,
    sheet_swap_vector,
    spin_representation,
    velocity,
)
from zgkn.errors import DegenerateFrameError, ZeroSpinorError


@pytest.fixture
def generic():
    return np.array([0.3 + 0.4j, -0.2 + 0.1j, 0.5 - 0.6j, 0.1 + 0.7j])


class TestMatrices:
    def test_clifford_algebra(self):
        for mu in range(4):
            for nu in range(4):
                anti = GAMMA[mu] @ GAMMA[nu] + GAMMA[nu] @ GAMMA[mu]
                np.testing.assert_allclose(anti, 2 * MINKOWSKI[mu, nu] * np.eye(4), atol=1e-15)

    def test_alpha_is_gamma0_gammak(self):
        for k in range(3):
            np.testing.assert_allclose(ALPHA[k], GAMMA[0] @ GAMMA[k + 1])

    def test_spin_representation_determinant_is_interval(self):
        X = np.array([2.0, 0.3, -0.5, 1.1])
        assert np.linalg.det(spin_representation(X)).real == pytest.approx(X @ MINKOWSKI @ X)

    def test_sheet_swap_vector_involution(self):
        X = np.array([1.0, 2.0, -0.5, 0.3])
        swapped = sheet_swap_vector(X)
        assert swapped.tolist() == [1.0, -2.0, 0.5, 0.3]
        np.testing.assert_array_equal(sheet_swap_vector(swapped), X)


class TestCayleyKlein:
    """Tests for Pauli and generalized Cayley-Klein decompositions."""

    def test_pauli_roundtrip(self):
        z = np.array([0.6 - 0.2j, -0.3 + 0.5j])
        ck = cayley_klein(z)
        np.testing.assert_allclose(ck.spinor(), z, atol=1e-14)
        np.testing.assert_allclose(ck.n, pauli_orientation(z), atol=1e-14)

    def test_frame_is_orthonormal(self):
        l, m, n = cayley_klein(np.array([0.6 - 0.2j, -0.3 + 0.5j])).frame()
        frame = np.vstack([l, m, n])
        np.testing.assert_allclose(frame @ frame.T, np.eye(3), atol=1e-14)

    def test_flip_reverses_orientation(self):
        z = np.array([0.6 - 0.2j, -0.3 + 0.5j])
        np.testing.assert_allclose(pauli_orientation(flip(z)), -pauli_orientation(z), atol=1e-14)

    def test_one_component_spinor(self):
        ck = cayley_klein(np.array([0.0, 2.0j]))
        assert ck.Theta == pytest.approx(math.pi)
        assert ck.Omega == 0.0

    def test_generalized_roundtrip(self, generic):
        np.testing.assert_allclose(generalized_ck(generic).reconstruct(), generic, atol=1e-14)

    def test_zero_rejected(self):
        with pytest.raises(ZeroSpinorError):
            generalized_ck(np.zeros(4))

    def test_eigenstate_split_angle(self):
        """Separated eigenstates have equal halves, Sigma = pi/2."""
        psi = eigenstate_components(1.3, 0.4, 0.8, 1.1)
        assert psi.shape == (4,)
        assert generalized_ck(psi).Sigma == pytest.approx(math.pi / 2)

    def test_eigenstate_components_broadcast(self):
        column, row = np.ones((3, 1)), np.ones((1, 5))
        psi = eigenstate_components(column, 0 * column, row, row)
        assert psi.shape == (3, 5, 4)


class TestOrientation:
    """Tests for the orientation Dreibein."""

    def test_dreibein_orthonormal_right_handed(self, generic):
        frame = orientation(generic).dreibein()
        np.testing.assert_allclose(frame @ frame.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(frame) == pytest.approx(1.0)

    def test_missing_half_is_degenerate(self):
        frame = orientation(np.array([1.0, 0.5j, 0.0, 0.0]))
        assert frame.degenerate
        with pytest.raises(DegenerateFrameError):
            frame.dreibein()

    def test_primed_frame_orthogonal_for_parallel_halves(self):
        half = np.array([0.6 - 0.2j, -0.3 + 0.5j])
        psi = np.concatenate([half, 0.5j * half])
        l_vec, m_vec = primed_frame(psi)
        n = orientation(psi).n
        assert np.dot(l_vec, n) == pytest.approx(0.0, abs=1e-14)
        assert np.dot(m_vec, n) == pytest.approx(0.0, abs=1e-14)


class TestCurrent:
    """Tests for the probability current."""

    def test_current_is_causal(self, generic):
        sample = current(generic)
        assert sample.norm_sq >= 0
        assert np.linalg.norm(velocity(generic)) <= 1.0

    def test_current_from_halves(self, generic):
        top, bottom = generic[:2], generic[2:]
        expected = np.vdot(top, top).real * pauli_orientation(top) - np.vdot(
            bottom, bottom
        ).real * pauli_orientation(bottom)
        np.testing.assert_allclose(current(generic).j, expected, atol=1e-14)

    def test_single_half_is_null(self):
        sample = BiSpinor(np.array([1, 0, 0, 0], dtype=complex)).current()
        assert sample.null
        assert sample.gamma_factor == math.inf
        assert BiSpinor(np.array([1, 0, 0, 0])).velocity().tolist() == [0.0, 0.0, 1.0]

    def test_density(self, generic):
        assert BiSpinor(generic).density == pytest.approx(float(np.sum(np.abs(generic) ** 2)))
