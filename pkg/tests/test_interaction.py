"""Tests for the excision ladders of the interaction energy and momentum."""

import math

import numpy as np
import pytest

from zgkn.errors import ConfigError, RingPointError
from zgkn.interaction import (
    ORDER_RANGE,
    InteractionResult,
    QuadratureConfig,
    convergence_order,
    interaction_P0,
    interaction_Pj,
    interaction_report,
    richardson_sqrt,
    source_point,
)


def _result(closed: float, extrapolated: float, ladder_max: float = 1.0) -> InteractionResult:
    abs_error = abs(extrapolated - closed)
    return InteractionResult(
        quantity="P0",
        source=(2.0, 0.3, 0.0),
        sheets="both",
        ladder=[(0.1, ladder_max), (0.01, extrapolated)],
        outer=0.0,
        extrapolated=extrapolated,
        closed_form=closed,
        abs_error=abs_error,
        rel_error=abs_error / abs(closed) if closed else math.nan,
        order=1.0,
    )


class TestQuadratureConfig:
    """Tests for ladder and resolution validation."""

    def test_defaults_are_valid(self):
        cfg = QuadratureConfig()
        assert cfg.eps_ladder[0] < cfg.patch_clearance()
        assert cfg.to_dict()["eps_ladder"] == list(cfg.eps_ladder)

    @pytest.mark.parametrize(
        "kwargs,match",
        [
            ({"eps_ladder": (0.1, 0.01)}, "at least three"),
            ({"eps_ladder": (0.1, 0.1, 0.01)}, "strictly decreasing"),
            ({"eps_ladder": (0.1, -0.01, -0.1)}, "strictly decreasing"),
            ({"patch": 1.5}, "patch must lie"),
            ({"patch": 0.3}, "patch boundary"),
            ({"n_panel": 1}, "at least 2"),
            ({"grading_ratio": 1.0}, "Grading ratios"),
            ({"fd_step": 0.2}, "fd_step"),
            ({"sheets": "0"}, "sheets must be one of"),
        ],
    )
    def test_invalid(self, kwargs, match):
        with pytest.raises(ConfigError, match=match):
            QuadratureConfig(**kwargs)


class TestExtrapolation:
    def test_richardson_is_exact_for_quadratic_in_sqrt(self):
        eps = [0.1, 0.05, 0.02, 0.01]
        values = [2.0 + 3.0 * math.sqrt(e) - e for e in eps]
        assert richardson_sqrt(eps, values) == pytest.approx(2.0, abs=1e-12)

    def test_order_of_linear_ladder(self):
        eps = [10.0 ** (-k) for k in range(1, 7)]
        values = [1.0 + e for e in eps]
        assert convergence_order(eps, values, 1.0) == pytest.approx(1.0)

    def test_order_undefined_for_short_ladder(self):
        assert math.isnan(convergence_order([0.1, 0.01, 0.001], [1.1, 1.01, 1.001], 1.0))


class TestInteractionResult:
    def test_within_relative(self):
        assert _result(0.4, 0.401).within(0.01)
        assert not _result(0.4, 0.41).within(0.01)

    def test_within_vanishing_closed_form(self):
        assert _result(0.0, 1e-4, ladder_max=0.5).within(0.01)
        assert not _result(0.0, 0.1, ladder_max=0.5).within(0.01)

    def test_vector_only_for_momentum(self):
        with pytest.raises(ConfigError, match="Only Pj"):
            _ = _result(0.4, 0.4).vector

    def test_to_dict_maps_nan_to_none(self):
        assert _result(0.0, 1e-4).to_dict()["rel_error"] is None

    def test_to_dict_carries_surface_split(self):
        data = _result(0.4, 0.4).to_dict()
        assert data["volume"] is None
        assert data["surface"] == 0.0
        assert data["surface_ladder"] == []


class TestSourcePoint:
    def test_ring_centered_values(self):
        p = source_point([2.0, 0.3, 0.5], a=0.5)
        assert p.r == pytest.approx(1.0)
        assert math.cos(p.theta) == pytest.approx(0.3)
        assert p.phi == 0.5

    def test_sheet_sets_sign(self):
        assert source_point([2.0, 0.3, 0.0, -1.0], a=1.0).r == pytest.approx(-2.0)

    @pytest.mark.parametrize("values", [[1.0, 0.2], [1.0, 0.2, 0.0, 0.5]])
    def test_invalid(self, values):
        with pytest.raises(ConfigError):
            source_point(values, a=1.0)

    def test_zero_radius(self):
        with pytest.raises(ConfigError, match="a != 0"):
            source_point([1.0, 0.2, 0.0], a=0.0)

    def test_ring_rejected(self, unit_ring):
        with pytest.raises(RingPointError):
            interaction_P0(source_point([0.0, 0.0, 0.0], unit_ring.a), unit_ring)

    def test_unknown_quantity(self, unit_ring):
        with pytest.raises(ConfigError, match="Unknown quantities"):
            interaction_report(source_point([2.0, 0.3, 0.0], 1.0), unit_ring, quantities=("P1",))


@pytest.mark.slow
class TestClosedForms:
    """Excision ladders against Q' phi_KN and Q' A_KN."""

    @pytest.mark.parametrize(
        "qpt", [(2.0, 1.0, 0.0), (2.0, 0.3, 0.0), (-2.0, 0.3, 0.0), (1.0, 0.9, 0.0)]
    )
    def test_energy(self, unit_ring, qpt):
        result = interaction_P0(source_point(list(qpt), unit_ring.a), unit_ring)
        assert result.within(0.01)
        assert result.labeling_symmetric
        assert ORDER_RANGE[0] <= result.order <= ORDER_RANGE[1]
        half = 0.5 * result.closed_form
        assert result.volume == pytest.approx(half, rel=1e-2, abs=1e-4)
        assert result.surface == pytest.approx(-half, rel=1e-2, abs=1e-4)

    def test_energy_changes_sign_across_sheets(self, unit_ring):
        plus = interaction_P0(source_point([2.0, 0.3, 0.0], 1.0), unit_ring)
        minus = interaction_P0(source_point([-2.0, 0.3, 0.0], 1.0), unit_ring)
        assert minus.closed_form == pytest.approx(-plus.closed_form)

    def test_momentum(self, unit_ring):
        result = interaction_Pj(source_point([2.0, 0.3, 0.0], unit_ring.a), unit_ring)
        assert result.within(0.01)
        assert ORDER_RANGE[0] <= result.order <= ORDER_RANGE[1]
        assert result.volume == pytest.approx(0.5 * result.closed_form, rel=1e-2)
        np.testing.assert_allclose(result.vector, [0.0, result.extrapolated, 0.0])

    def test_sheets_add_up(self, unit_ring):
        q_pt = source_point([2.0, 0.3, 0.0], unit_ring.a)
        volumes, surfaces = {}, {}
        for sheets in ("both", "+", "-"):
            result = interaction_P0(q_pt, unit_ring, QuadratureConfig(sheets=sheets))
            volumes[sheets] = np.array([v for _, v in result.ladder])
            surfaces[sheets] = np.array([v for _, v in result.surface_ladder])
        np.testing.assert_allclose(volumes["+"] + volumes["-"], volumes["both"], rtol=1e-9)
        np.testing.assert_allclose(surfaces["+"] + surfaces["-"], surfaces["both"], rtol=1e-9)
