"""Tests for events, configuration and the fixed-step simulator in ``timedomain.py``."""

from __future__ import annotations

import numpy as np
import pytest

from gfm_gfl_duality.devices import GfmParams, GridImpedance
from gfm_gfl_duality.errors import TopologyError
from gfm_gfl_duality.network import FaultBranch
from gfm_gfl_duality.scenarios import smib_topology
from gfm_gfl_duality.timedomain import (
    Event,
    EventAction,
    SimConfig,
    Simulator,
    expand_events,
    fault_case,
    oscillation_frequency,
    simulate,
)

SHORT = SimConfig(duration=0.05, dt=2e-5, decimation=50)

# ---------------------------------------------------------- configuration ---


class TestSimConfig:
    def test_steps(self) -> None:
        assert SHORT.steps == 2500

    @pytest.mark.parametrize(
        "kwargs, match",
        [
            ({"dt": 0.0}, "dt must be positive"),
            ({"duration": 1e-6, "dt": 1e-5}, "at least dt"),
            ({"decimation": 0}, "decimation"),
        ],
    )
    def test_validation(self, kwargs, match) -> None:
        with pytest.raises(ValueError, match=match):
            SimConfig(**kwargs)


class TestEvents:
    @pytest.mark.parametrize(
        "make, match",
        [
            (lambda: Event.set_param(-0.1, 1, "m", 0.1), "non-negative"),
            (lambda: Event.step_ref(0.1, 1, "m", 0.1), "step_ref applies to"),
            (lambda: Event.scale_line(0.1, 1, 2, 0.0), "scale factor"),
            (lambda: Event.fault(0.1, 1, x=0.0), "x > 0"),
            (lambda: Event.fault(0.2, 1, clear_time=0.1), "must follow"),
            (lambda: Event(0.1, EventAction.TRIP_LINE), "needs a line"),
            (lambda: Event(0.1, EventAction.FAULT), "needs a bus"),
        ],
    )
    def test_validation(self, make, match) -> None:
        with pytest.raises(ValueError, match=match):
            make()

    def test_fault_case_clears_after_three_cycles(self) -> None:
        on, off = fault_case(2, 0.2)
        assert on.action is EventAction.FAULT
        assert off.action is EventAction.CLEAR_FAULT
        assert off.time == pytest.approx(0.26)
        assert (on.r, on.x) == (1e-3, 1e-2)
        with pytest.raises(ValueError, match="periods"):
            fault_case(2, 0.2, periods=-1)

    def test_expand_events_sorts_and_splits(self) -> None:
        events = expand_events([Event.trip_line(0.5, 1, 2), Event.fault(0.1, 3, clear_time=0.3)])
        assert [(e.time, e.action) for e in events] == [
            (0.1, EventAction.FAULT),
            (0.3, EventAction.CLEAR_FAULT),
            (0.5, EventAction.TRIP_LINE),
        ]

    def test_describe(self) -> None:
        assert Event.scale_line(0.2, 1, 5, 0.2).describe() == "t=0.2s scale_line line 1-5 x0.2"
        assert Event.set_param(0.4, 8, "ki_pll", 0.0).describe() == "t=0.4s set_param bus 8 ki_pll=0"


class TestEventChecks:
    def test_event_after_duration(self, smib_gfm) -> None:
        with pytest.raises(ValueError, match="after the simulated duration"):
            Simulator(smib_gfm, [Event.step_ref(1.0, 1, "p_ref", -0.3)], SHORT)

    def test_unknown_parameter(self, smib_gfm) -> None:
        with pytest.raises(ValueError, match="has no parameter 'omega_pll'"):
            Simulator(smib_gfm, [Event.set_param(0.01, 1, "omega_pll", 1.0)], SHORT)

    def test_no_device(self, smib_gfm) -> None:
        with pytest.raises(ValueError, match="no device at bus 2"):
            Simulator(smib_gfm, [Event.step_ref(0.01, 2, "p_ref", 0.0)], SHORT)

    def test_unknown_line(self, smib_gfm) -> None:
        with pytest.raises(TopologyError, match="no line"):
            Simulator(smib_gfm, [Event.trip_line(0.01, 1, 3)], SHORT)

    def test_fault_branch_added(self, smib_gfm) -> None:
        sim = Simulator(smib_gfm, [Event.fault(0.01, 1, clear_time=0.02)], SHORT)
        assert sim.top.faults == (FaultBranch(1, 1e-3, 1e-2),)
        assert len(sim.events) == 2


# ------------------------------------------------------------- simulation ---


class TestSimulate:
    @pytest.mark.parametrize("fixture", ["smib_gfm", "smib_gfl"])
    def test_equilibrium_is_held(self, fixture, request) -> None:
        result = simulate(request.getfixturevalue(fixture), cfg=SHORT)
        assert not result.diverged
        assert result.t.size == 51
        tr = result.trace(1)
        np.testing.assert_allclose(tr.omega_hz, 50.0, atol=1e-6)
        np.testing.assert_allclose(tr.v_q, 0.0, atol=1e-6)
        np.testing.assert_allclose(tr.v_d, tr.v_d[0], atol=1e-6)

    def test_traces_are_in_device_frame(self, smib_gfm, gfm_params) -> None:
        tr = simulate(smib_gfm, cfg=SHORT).trace(1)
        np.testing.assert_allclose(tr.v_d, gfm_params.v_ref, atol=1e-6)
        np.testing.assert_allclose(tr.p, gfm_params.p_ref, atol=1e-6)
        assert set(tr.columns()) == {"omega_hz", "theta", "v_d", "v_q", "i_d", "i_q", "p", "q"}

    def test_power_step_settles(self) -> None:
        top = smib_topology(GfmParams(), GridImpedance.from_scale(0.3))
        cfg = SimConfig(duration=0.5, dt=2e-5, decimation=50)
        result = simulate(top, events=[Event.step_ref(0.01, 1, "p_ref", -0.3)], cfg=cfg)
        assert result.events == ("t=0.01s step_ref bus 1 p_ref=-0.3",)
        tr = result.trace(1)
        assert tr.p[-1] == pytest.approx(-0.3, abs=5e-3)
        assert abs(result.frequency_deviation_hz(1)[-1]) < 1e-2

    def test_line_trip_and_scaling(self, island_pair) -> None:
        events = [Event.scale_line(0.01, 1, 2, 2.0), Event.trip_line(0.02, 2, 3), Event.close_line(0.03, 2, 3)]
        result = simulate(island_pair, events=events, cfg=SHORT)
        assert len(result.events) == 3
        assert np.all(np.isfinite(result.states))


class TestOscillationFrequency:
    def test_sine(self) -> None:
        t = np.linspace(0.0, 1.0, 10001)
        y = 0.3 + np.sin(2 * np.pi * 7.0 * t + 0.4)
        assert oscillation_frequency(t, y) == pytest.approx(7.0, rel=1e-3)

    def test_flat_signal(self) -> None:
        t = np.linspace(0.0, 1.0, 11)
        assert oscillation_frequency(t, np.linspace(0.0, 1.0, 11) ** 3) == 0.0
