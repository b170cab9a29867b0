"""Tests for the packaged studies in ``scenarios.py``.

Most of these integrate for a simulated second or more and are marked slow.
"""

from __future__ import annotations

import numpy as np
import pytest

from gfm_gfl_duality.network import NetworkTopology
from gfm_gfl_duality.scenarios import (
    StepTest,
    fault_studies,
    ieee14_topology,
    island_gfl_case,
    relative_angle_deg,
    run_fault_studies,
    smib_topology,
    summarize_island,
    two_gfl_case,
)
from gfm_gfl_duality.smallsignal import preset
from gfm_gfl_duality.timedomain import EventAction


class TestBuilders:
    def test_smib_topology(self, gfm_params, gfm_grid) -> None:
        top = smib_topology(gfm_params, gfm_grid)
        assert isinstance(top, NetworkTopology)
        assert top.sources == {2: 1.0}
        assert (top.lines[0].r, top.lines[0].x) == (gfm_grid.r, gfm_grid.x)

    def test_ieee14_inventory(self) -> None:
        top = ieee14_topology()
        assert len(top.buses) == 14
        kinds = sorted(p.kind.value for p in top.devices.values())
        assert kinds == ["gfl", "gfl", "gfm", "gfm", "gfm"]
        assert not top.sources

    def test_fault_studies_override_the_right_devices(self) -> None:
        studies = {s.name: s for s in fault_studies()}
        assert set(studies) == {"gfm6-m0.01", "gfm6-m0.08", "gfl8-ki-x10", "gfl8-ki-div10"}
        base = ieee14_topology().devices[8]
        raised = studies["gfl8-ki-x10"].topology().devices[8]
        assert raised.k_i == pytest.approx(10 * base.k_i)
        assert studies["gfm6-m0.08"].topology().devices[6].m == 0.08

    def test_step_test_events(self) -> None:
        step = StepTest(preset("gfl-pll", points=2))
        on, off = step.events()
        assert (on.action, on.name) == (EventAction.SET_PARAM, "omega_pll")
        assert on.value == pytest.approx(2 * np.pi * 60.0)
        assert off.value == pytest.approx(2 * np.pi * 15.0)
        assert step.name == "gfl-pll-step"
        grid_step = StepTest(preset("gfm-grid-scale", points=2))
        assert grid_step.events()[0].value == pytest.approx(0.1 / 0.3)


@pytest.mark.slow
class TestTimeDomainStudies:
    def test_islanded_gfl_phases(self) -> None:
        result = island_gfl_case()
        summary = summarize_island(result)
        assert not result.diverged
        assert 0.45 <= summary.v_d_phase1 <= 0.55
        assert summary.min_slope_phase2 > 0
        assert summary.final_slope < 1e-3

    def test_two_gfl_resynchronize(self) -> None:
        result = two_gfl_case()
        rel = relative_angle_deg(result, 2, 1)
        pre = rel[np.searchsorted(result.t, 0.2) - 1]
        assert not result.diverged
        assert abs(rel[-1] - pre) < 5.0

    def test_step_frequency_matches_prediction(self) -> None:
        step = StepTest(preset("gfl-pll", points=2))
        predicted = step.predicted()
        measured = step.measured_frequency(step.run())
        assert measured == pytest.approx(predicted.frequency_hz, rel=0.2)

    def test_fault_recovery_outcomes(self) -> None:
        outcomes = {o.name: o.recovered for o in run_fault_studies()}
        assert outcomes == {
            "gfm6-m0.01": True,
            "gfm6-m0.08": False,
            "gfl8-ki-x10": False,
            "gfl8-ki-div10": True,
        }
