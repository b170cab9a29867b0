"""Ready-made studies built on :mod:`~gfm_gfl_duality.network` and :mod:`~gfm_gfl_duality.timedomain`.

- single-inverter step tests that mirror every preset sweep: the swept
  parameter jumps from its start to its end value for a window and back,
- the islanded grid-following inverter feeding a passive RL load,
- two grid-following inverters sharing an island through a temporary fault,
- the 14-bus network: small-signal poles under line scaling, the
  strong-grid line-scaling run and the four fault-recovery cases that show
  the transient duality of droop gain and PLL integral gain.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from gfm_gfl_duality.devices import TWO_PI, DeviceParams, GflParams, GridImpedance
from gfm_gfl_duality.io.config import load_scenario, load_topology
from gfm_gfl_duality.network import Bus, Line, NetworkTopology, assemble, system_poles
from gfm_gfl_duality.smallsignal import ModeReport, SweepParameter, SweepSpec, evaluate_point
from gfm_gfl_duality.timedomain import Event, SimConfig, SimResult, fault_case, oscillation_frequency, simulate

logger = logging.getLogger(__name__)

STRONG_GRID_LINES = ((1, 2), (1, 5))
"""14-bus lines whose impedance is reduced in the strong-grid study."""

RECOVERY_TAIL_S = 0.3
RECOVERY_MAX_DEV_HZ = 0.1
RECOVERY_MAX_SLIP_DEG = 180.0


# -------- Single inverter on an infinite bus ------------------------------------
def smib_topology(params: DeviceParams, grid: GridImpedance, source: complex = 1.0) -> NetworkTopology:
    """One inverter at bus 1 behind ``grid`` from an infinite bus at bus 2.

    Raises
    ------
    TopologyError
        If ``grid`` is a short circuit (the network needs a series branch).
    """
    return NetworkTopology(
        (Bus(1), Bus(2)),
        (Line(1, 2, grid.r, grid.x),),
        {1: params},
        {2: complex(source)},
        name=f"smib-{params.kind.value}",
    )


@dataclass(frozen=True, slots=True)
class StepTest:
    """A single-inverter run where a swept parameter is switched for a window.

    Parameters
    ----------
    spec : SweepSpec
        Source of the parameter, its start (outside the window) and end
        (inside the window) values, and the device and grid templates.
    t_on, t_off : float
        Window, s.
    duration : float
        Simulated time, s.
    """

    spec: SweepSpec
    t_on: float = 0.2
    t_off: float = 0.4
    duration: float = 0.8

    @property
    def name(self) -> str:
        """Name derived from the sweep."""
        return f"{self.spec.name or self.spec.parameter.value}-step"

    def topology(self) -> NetworkTopology:
        """Network at the start value of the swept parameter."""
        params, grid = self.spec.apply(self.spec.start)
        return smib_topology(params, grid)

    def events(self) -> list[Event]:
        """Switch to the end value at ``t_on`` and back at ``t_off``."""
        p = self.spec.parameter
        lo, hi = self.spec.start, self.spec.end
        if p is SweepParameter.GRID_SCALE:
            return [Event.scale_line(self.t_on, 1, 2, hi / lo), Event.scale_line(self.t_off, 1, 2, 1.0)]
        name, scale = {
            SweepParameter.DROOP_M: ("m", 1.0),
            SweepParameter.V_LOOP_BW: ("omega_v", TWO_PI),
            SweepParameter.PLL_BANDWIDTH: ("omega_pll", TWO_PI),
            SweepParameter.I_LOOP_BW: ("omega_i", TWO_PI),
        }[p]
        return [Event.set_param(self.t_on, 1, name, hi * scale), Event.set_param(self.t_off, 1, name, lo * scale)]

    def predicted(self) -> ModeReport:
        """Small-signal modes at the in-window value."""
        params, grid = self.spec.apply(self.spec.end)
        return evaluate_point(params, grid)

    def run(self, cfg: SimConfig | None = None) -> SimResult:
        """Simulate the step test."""
        cfg = cfg or SimConfig(duration=self.duration, decimation=10)
        return simulate(self.topology(), events=self.events(), cfg=cfg)

    def measured_frequency(self, result: SimResult, bus: int = 1) -> float:
        """Oscillation frequency (Hz) of the device frequency inside the window."""
        tr = result.trace(bus)
        win = (tr.t > self.t_on + 0.02) & (tr.t < self.t_off)
        return oscillation_frequency(tr.t[win], tr.omega_hz[win])


# -------- Islanded grid-following inverter --------------------------------------
@dataclass(frozen=True, slots=True)
class IslandSummary:
    """Phase measurements of the islanded GFL run.

    Parameters
    ----------
    v_d_phase1 : float
        Mean d-axis voltage before the reactive reference step, pu.
    min_slope_phase2 : float
        Smallest frequency slope between the two events, Hz/s.
    final_slope : float
        Frequency slope over the last 0.1 s, Hz/s.
    final_frequency_hz : float
        Frequency at the end of the run.
    """

    v_d_phase1: float
    min_slope_phase2: float
    final_slope: float
    final_frequency_hz: float


def island_gfl_case(cfg: SimConfig | None = None) -> SimResult:
    """Islanded GFL feeding ``1 + j0.2`` pu.

    Phase 1 holds ``i* = -0.5 + j0.09``; at 0.4 s ``i_q*`` steps to zero
    and the frequency runs away; at 0.8 s the PLL integral gain is set to
    zero and the frequency settles.
    """
    sc = load_scenario("island_gfl")
    return simulate(sc.topology, events=sc.events, cfg=cfg or sc.sim)


def summarize_island(result: SimResult, bus: int = 1, t_step: float = 0.4, t_freeze: float = 0.8) -> IslandSummary:
    """Extract the three phase measurements from an island run."""
    tr = result.trace(bus)
    t, f = tr.t, tr.omega_hz
    slope = np.gradient(f, t)
    ph1 = t < t_step
    # skip the first instants after each event
    ph2 = (t > t_step + 0.02) & (t < t_freeze)
    tail = t > t[-1] - 0.1
    return IslandSummary(
        v_d_phase1=float(np.mean(tr.v_d[ph1])),
        min_slope_phase2=float(np.min(slope[ph2])),
        final_slope=float(np.max(np.abs(slope[tail]))),
        final_frequency_hz=float(f[-1]),
    )


# -------- Two grid-following inverters ------------------------------------------
def two_gfl_case(cfg: SimConfig | None = None) -> SimResult:
    """Two GFL inverters in an island with a fault at bus 2 from 0.2 s to 0.26 s."""
    sc = load_scenario("two_gfl")
    return simulate(sc.topology, events=sc.events, cfg=cfg or sc.sim)


def relative_angle_deg(result: SimResult, bus: int, reference: int) -> NDArray[np.float64]:
    """Angle of ``bus`` relative to ``reference`` in degrees."""
    return np.degrees(result.trace(bus).theta - result.trace(reference).theta)


# -------- IEEE 14-bus network ---------------------------------------------------
def ieee14_topology() -> NetworkTopology:
    """The shipped 14-bus network with three GFM and two GFL inverters."""
    return load_topology("ieee14")


def ieee14_poles(line_scale: float = 1.0, overrides: Mapping[int, DeviceParams] | None = None) -> ModeReport:
    """Whole-system modes with the strong-grid lines scaled by ``line_scale``.

    ``overrides`` replaces the devices at the given buses; the others keep
    their shipped parameters.
    """
    top = ieee14_topology()
    if overrides:
        top = top.with_devices({**top.devices, **overrides})
    if line_scale != 1.0:
        top = top.with_scaled_lines(STRONG_GRID_LINES, line_scale)
    return system_poles(assemble(top))


def ieee14_line_scaling(
    factor: float = 0.2, t_on: float = 0.2, t_off: float = 0.8, cfg: SimConfig | None = None
) -> SimResult:
    """Scale lines 1-2 and 1-5 by ``factor`` during ``[t_on, t_off)``."""
    events = []
    for a, b in STRONG_GRID_LINES:
        events += [Event.scale_line(t_on, a, b, factor), Event.scale_line(t_off, a, b, 1.0)]
    return simulate(ieee14_topology(), events=events, cfg=cfg or SimConfig(duration=1.2, dt=5e-5, decimation=20))


@dataclass(frozen=True, slots=True)
class FaultStudy:
    """One 14-bus fault-recovery case: device parameter overrides by bus."""

    name: str
    overrides: dict[int, dict[str, float]] = field(default_factory=dict)

    def topology(self) -> NetworkTopology:
        """14-bus network with the overrides applied."""
        top = ieee14_topology()
        for bus, kw in self.overrides.items():
            top = top.with_device(bus, top.devices[bus].with_overrides(**kw))
        return top


def fault_studies() -> tuple[FaultStudy, ...]:
    """Low and high droop at bus 6; PLL integral gain at bus 8 raised and lowered tenfold."""
    base = ieee14_topology().devices[8]
    if not isinstance(base, GflParams):
        raise TypeError(f"bus 8 must carry a GFL device, got {base.kind.value}")
    return (
        FaultStudy("gfm6-m0.01", {6: {"m": 0.01}}),
        FaultStudy("gfm6-m0.08", {6: {"m": 0.08}}),
        FaultStudy("gfl8-ki-x10", {8: {"ki_pll": base.k_i * 10}}),
        FaultStudy("gfl8-ki-div10", {8: {"ki_pll": base.k_i / 10}}),
    )


@dataclass(frozen=True, slots=True)
class RecoveryOutcome:
    """Result of one fault-recovery run.

    ``recovered`` requires every device to stay within 180 degrees of the
    bus-1 inverter and all frequency deviations in the final 0.3 s to stay
    below 0.1 Hz.
    """

    name: str
    recovered: bool
    max_slip_deg: float
    tail_deviation_hz: float
    diverged: bool
    result: SimResult = field(repr=False)


def recovery_outcome(name: str, result: SimResult, reference: int = 1) -> RecoveryOutcome:
    """Apply the recovery criterion to a finished run."""
    slip = 0.0
    tail_dev = 0.0
    tail = result.t >= result.t_end - RECOVERY_TAIL_S
    for bus in result.traces:
        rel = relative_angle_deg(result, bus, reference)
        slip = max(slip, float(np.max(np.abs(rel - rel[0]))))
        tail_dev = max(tail_dev, float(np.max(np.abs(result.frequency_deviation_hz(bus)[tail]))))
    ok = not result.diverged and slip < RECOVERY_MAX_SLIP_DEG and tail_dev < RECOVERY_MAX_DEV_HZ
    if not math.isfinite(tail_dev):
        ok = False
    logger.info("%s: recovered=%s slip=%.1f deg tail=%.3f Hz", name, ok, slip, tail_dev)
    return RecoveryOutcome(name, ok, slip, tail_dev, result.diverged, result)


def run_fault_study(
    study: FaultStudy,
    bus: int = 6,
    t_start: float = 0.2,
    cfg: SimConfig | None = None,
) -> RecoveryOutcome:
    """Fault at ``bus`` for three cycles and judge recovery.

    The fault impedance is the branch shipped with the 14-bus data.
    """
    top = study.topology()
    branch = next((f for f in top.faults if f.bus == bus), None)
    r, x = (branch.r, branch.x) if branch is not None else (1e-3, 1e-2)
    events = fault_case(bus, t_start, 3, r, x)
    cfg = cfg or SimConfig(duration=2.5, dt=5e-5, decimation=100)
    return recovery_outcome(study.name, simulate(top, events=events, cfg=cfg))


def run_fault_studies(
    studies: Sequence[FaultStudy] | None = None, cfg: SimConfig | None = None
) -> list[RecoveryOutcome]:
    """Run every study (defaults to :func:`fault_studies`)."""
    return [run_fault_study(s, cfg=cfg) for s in (studies or fault_studies())]