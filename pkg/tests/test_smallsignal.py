"""Tests for root-locus sweeps and verdicts in ``smallsignal.py``."""

from __future__ import annotations

import numpy as np
import pytest

from gfm_gfl_duality.devices import DeviceKind, DeviceModel, GflParams, GfmParams, GridImpedance, modified_swing
from gfm_gfl_duality.dqframe import RationalTransfer, poles_of
from gfm_gfl_duality.errors import SweepError
from gfm_gfl_duality.smallsignal import (
    MARGINAL_BAND,
    ModeReport,
    SweepParameter,
    SweepSpec,
    Verdict,
    classify,
    duality_table,
    pair_loci,
    preset,
    preset_sweeps,
    root_locus,
)


class TestClassify:
    @pytest.mark.parametrize(
        "poles, expected",
        [
            ([-1.0, -2.0 + 3j, -2.0 - 3j], Verdict.STABLE),
            ([-1.0, 0.5j, -0.5j], Verdict.MARGINAL),
            ([-1.0, 1e-3 + 10j], Verdict.UNSTABLE),
            ([0.1 * MARGINAL_BAND], Verdict.MARGINAL),
        ],
    )
    def test_verdicts(self, poles, expected) -> None:
        assert classify(poles) is expected

    def test_empty_rejected(self) -> None:
        with pytest.raises(ValueError, match="empty"):
            classify([])


class TestModeReport:
    def test_dominant_prefers_positive_frequency(self) -> None:
        report = ModeReport.from_poles([-3.0, -1.0 - 2 * np.pi * 5j, -1.0 + 2 * np.pi * 5j])
        assert report.dominant == complex(-1.0, 2 * np.pi * 5)
        assert report.frequency_hz == pytest.approx(5.0)
        assert report.damping_ratio == pytest.approx(1.0 / abs(report.dominant))
        assert report.max_real == -1.0
        assert report.verdict is Verdict.STABLE


class TestSweepSpec:
    def test_parameter_must_match_device(self) -> None:
        with pytest.raises(ValueError, match="only applies to gfl"):
            SweepSpec(SweepParameter.PLL_BANDWIDTH, 15.0, 60.0, 5, GfmParams(), GridImpedance.from_scale(0.2))

    def test_needs_two_points(self) -> None:
        with pytest.raises(ValueError, match="at least 2"):
            SweepSpec(SweepParameter.GRID_SCALE, 0.1, 0.3, 1, GfmParams(), GridImpedance.from_scale(0.1))

    def test_degenerate_range_rejected(self) -> None:
        with pytest.raises(ValueError, match="degenerate sweep"):
            SweepSpec(SweepParameter.DROOP_M, 0.1, 0.1, 3, GfmParams(), GridImpedance.from_scale(0.2))

    def test_apply_converts_hz(self) -> None:
        spec = preset("gfl-pll", points=3)
        params, grid = spec.apply(30.0)
        assert isinstance(params, GflParams)
        assert params.omega_pll == pytest.approx(2 * np.pi * 30.0)
        assert grid == spec.grid

    def test_unknown_preset(self) -> None:
        with pytest.raises(ValueError, match="unknown sweep preset"):
            preset("gfm-everything")


class TestRootLocus:
    def test_failing_point_reports_value(self) -> None:
        spec = SweepSpec(SweepParameter.GRID_SCALE, 0.0, 0.1, 2, GfmParams(), GridImpedance.from_scale(0.1))
        with pytest.raises(SweepError) as info:
            root_locus(spec)
        assert info.value.value == 0.0

    def test_one_report_per_point(self) -> None:
        locus = root_locus(preset("gfm-droop", points=4))
        assert [v for v, _ in locus] == pytest.approx([0.05, 0.1, 0.15, 0.2])
        loci = pair_loci(locus)
        assert loci.shape == (4, locus[0][1].poles.size)

    def test_pair_loci_tracks_branches(self) -> None:
        reports = [ModeReport.from_poles([-1.0 + k, -5.0 - k]) for k in (0.0, 0.1, 0.2)]
        loci = pair_loci([(float(k), r) for k, r in enumerate(reports)])
        np.testing.assert_allclose(loci[:, 0].real, [-1.0, -0.9, -0.8])
        np.testing.assert_allclose(loci[:, 1].real, [-5.0, -5.1, -5.2])

    @pytest.mark.parametrize("name", [spec.name for spec in preset_sweeps(2)])
    def test_preset_endpoints_cross_the_axis(self, name) -> None:
        locus = root_locus(preset(name, points=2))
        first, last = locus[0][1], locus[-1][1]
        assert first.verdict is Verdict.STABLE
        assert last.verdict is Verdict.UNSTABLE

    @pytest.mark.parametrize("name", [spec.name for spec in preset_sweeps(2)])
    def test_rightmost_mode_moves_right_along_preset(self, name) -> None:
        locus = root_locus(preset(name, points=20))
        max_real = np.array([report.max_real for _, report in locus])
        slack = 1e-3 * np.ptp(max_real) + 1e-9
        assert np.all(np.diff(max_real) >= -slack), max_real


class TestScaleInvariance:
    @pytest.mark.parametrize("name", ["gfm-droop", "gfl-pll"])
    @pytest.mark.parametrize("gain", [1e-6, 0.37, 4.0, 1e6])
    def test_verdict_ignores_positive_scaling(self, name, gain) -> None:
        spec = preset(name, points=2)
        for value in (spec.start, spec.end):
            params, grid = spec.apply(value)
            s_char = modified_swing(DeviceModel.at_infinite_bus(params, grid), grid)
            scaled = RationalTransfer(gain * s_char.numerator, gain * s_char.denominator)
            expected = classify(poles_of(s_char, "numerator"))
            assert classify(poles_of(scaled, "numerator")) is expected


class TestDualityTable:
    def test_gfm_and_gfl_are_mirror_images(self) -> None:
        rows = {(r.kind, r.condition): r.verdict for r in duality_table()}
        assert rows[DeviceKind.GFM, "ideal stiff grid"] is Verdict.UNSTABLE
        assert rows[DeviceKind.GFM, "strong grid"] is Verdict.UNSTABLE
        assert rows[DeviceKind.GFM, "weak grid"] is Verdict.STABLE
        assert rows[DeviceKind.GFL, "ideal stiff grid"] is Verdict.STABLE
        assert rows[DeviceKind.GFL, "strong grid"] is Verdict.STABLE
        assert rows[DeviceKind.GFL, "weak grid"] is Verdict.UNSTABLE
