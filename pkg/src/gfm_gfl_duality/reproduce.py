"""Regeneration of every reproducible experiment with pass/fail checks.

Each experiment writes its CSV and SVG files into its own directory and
returns a :class:`CheckResult`. :func:`run_all` isolates failures: an
experiment that raises is recorded as failed and the others still run.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
import scipy.integrate

from gfm_gfl_duality import scenarios
from gfm_gfl_duality.io import plots, tables
from gfm_gfl_duality.io.manifest import ArtifactWriter
from gfm_gfl_duality.smallsignal import Verdict, duality_table, preset, root_locus
from gfm_gfl_duality.timedomain import SimResult
from gfm_gfl_duality.transient import (
    EquilibriumKind,
    TwoInverterCase,
    angle_curve,
    equilibria,
    inertia_swap,
    max_decel_area,
    swing_ode,
)

logger = logging.getLogger(__name__)

STRONG_GRID_BAND_HZ = (17.3 * 0.7, 17.3 * 1.3)
"""Accepted frequency of the unstable 14-bus pair under line scaling."""

ISLAND_VD_BAND = (0.45, 0.55)
ISLAND_SETTLED_SLOPE = 1e-3
RESYNC_TOLERANCE_DEG = 5.0
ENERGY_DRIFT = 1e-6
AREA_TOLERANCE = 1e-9
STEP_FREQUENCY_TOLERANCE = 0.2
"""Relative mismatch allowed between a step test and its predicted mode."""


@dataclass(frozen=True, slots=True)
class CheckResult:
    """Outcome of one experiment."""

    name: str
    passed: bool
    detail: str

    @property
    def status(self) -> str:
        """``PASS`` or ``FAIL``."""
        return "PASS" if self.passed else "FAIL"


def _write_sim(out: ArtifactWriter, rel: str, result: SimResult, title: str) -> None:
    out.csv(f"{rel}.csv", tables.trace_frame(result))
    out.svg(f"{rel}.svg", plots.trace_figure(result, title=title))


# -------- Small-signal sweeps --------------------------------------------------------
def _sweep_pair(out: ArtifactWriter, folder: str, names: Sequence[str], points: int) -> CheckResult:
    """Sweep each preset and require a stable start and an unstable end.

    Each preset is also stepped to its end value in the time domain; the
    oscillation measured inside the window must match the predicted
    dominant frequency within :data:`STEP_FREQUENCY_TOLERANCE`.
    """
    notes = []
    ok = True
    for name in names:
        spec = preset(name, points)
        locus = root_locus(spec)
        out.csv(f"{folder}/{name}_locus.csv", tables.locus_frame(locus))
        out.csv(f"{folder}/{name}_dominant.csv", tables.dominant_frame(locus))
        out.svg(f"{folder}/{name}.svg", plots.root_locus_figure(locus, title=name, xlabel=spec.parameter.value))
        first, last = locus[0][1], locus[-1][1]
        flipped = first.verdict is Verdict.STABLE and last.verdict is Verdict.UNSTABLE
        step = scenarios.StepTest(spec)
        result = step.run()
        _write_sim(out, f"{folder}/{step.name}", result, step.name)
        predicted = step.predicted().frequency_hz
        measured = step.measured_frequency(result)
        matched = abs(measured - predicted) <= STEP_FREQUENCY_TOLERANCE * predicted
        logger.info("%s step: measured %.2f Hz, predicted %.2f Hz", name, measured, predicted)
        ok &= flipped and matched
        notes.append(
            f"{name}: {first.max_real:+.3f} -> {last.max_real:+.3f}, step {measured:.1f} Hz vs {predicted:.1f} Hz"
        )
    return CheckResult(folder, ok, "; ".join(notes))


def grid_strength_loci(out: ArtifactWriter, points: int = 21) -> CheckResult:
    """Grid-scale loci of both inverter types."""
    return _sweep_pair(out, "fig7", ("gfm-grid-scale", "gfl-grid-scale"), points)


def synchronization_loci(out: ArtifactWriter, points: int = 21) -> CheckResult:
    """Droop gain and PLL bandwidth loci."""
    return _sweep_pair(out, "fig8", ("gfm-droop", "gfl-pll"), points)


def inner_loop_loci(out: ArtifactWriter, points: int = 21) -> CheckResult:
    """Voltage and current loop bandwidth loci."""
    return _sweep_pair(out, "fig9", ("gfm-voltage-loop", "gfl-current-loop"), points)


def grid_strength_table(out: ArtifactWriter) -> CheckResult:
    """Stable/unstable pattern at ideal, strong and weak grids."""
    rows = duality_table()
    out.csv("table1/duality.csv", tables.duality_frame(rows))
    expected = {
        ("gfm", "ideal stiff grid"): Verdict.UNSTABLE,
        ("gfm", "strong grid"): Verdict.UNSTABLE,
        ("gfm", "weak grid"): Verdict.STABLE,
        ("gfl", "ideal stiff grid"): Verdict.STABLE,
        ("gfl", "strong grid"): Verdict.STABLE,
        ("gfl", "weak grid"): Verdict.UNSTABLE,
    }
    wrong = [f"{r.kind.value}/{r.condition}" for r in rows if expected[(r.kind.value, r.condition)] is not r.verdict]
    return CheckResult("table1", not wrong, "mismatch: " + ", ".join(wrong) if wrong else "pattern reproduced")


# -------- Time-domain scenarios ------------------------------------------------------
def island_gfl(out: ArtifactWriter) -> CheckResult:
    """Islanded GFL with its three phases."""
    result = scenarios.island_gfl_case()
    _write_sim(out, "fig11/traces", result, "islanded GFL")
    s = scenarios.summarize_island(result)
    out.csv(
        "fig11/summary.csv",
        tables.records_frame(
            [
                {
                    "v_d_phase1": s.v_d_phase1,
                    "min_slope_phase2": s.min_slope_phase2,
                    "final_slope": s.final_slope,
                    "final_frequency_hz": s.final_frequency_hz,
                }
            ]
        ),
    )
    lo, hi = ISLAND_VD_BAND
    ok = lo <= s.v_d_phase1 <= hi and s.min_slope_phase2 > 0 and s.final_slope < ISLAND_SETTLED_SLOPE
    ok &= not result.diverged
    return CheckResult(
        "fig11",
        ok,
        f"v_d={s.v_d_phase1:.3f} pu, min slope {s.min_slope_phase2:.2f} Hz/s, "
        f"final slope {s.final_slope:.2e} Hz/s at {s.final_frequency_hz:.3f} Hz",
    )


def strong_grid(out: ArtifactWriter) -> CheckResult:
    """14-bus modes with nominal and reduced strong-grid lines, plus the switching run."""
    nominal = scenarios.ieee14_poles(1.0)
    reduced = scenarios.ieee14_poles(0.2)
    out.csv("fig12/poles_nominal.csv", tables.poles_frame(nominal))
    out.csv("fig12/poles_reduced.csv", tables.poles_frame(reduced))
    out.svg("fig12/poles_reduced.svg", plots.poles_figure(reduced))
    _write_sim(out, "fig12/line_scaling", scenarios.ieee14_line_scaling(), "lines 1-2 and 1-5 reduced to 1/5")
    lo, hi = STRONG_GRID_BAND_HZ
    ok = (
        nominal.verdict is Verdict.STABLE
        and reduced.verdict is Verdict.UNSTABLE
        and lo <= reduced.frequency_hz <= hi
    )
    return CheckResult(
        "fig12",
        ok,
        f"nominal {nominal.max_real:+.3f}/s; reduced {reduced.max_real:+.3f}/s at {reduced.frequency_hz:.2f} Hz",
    )


def two_gfl_fault(out: ArtifactWriter) -> CheckResult:
    """Two GFL inverters through a short fault; both must resynchronize."""
    result = scenarios.two_gfl_case()
    _write_sim(out, "fig14/traces", result, "two GFL, fault at bus 2")
    rel = scenarios.relative_angle_deg(result, 2, 1)
    pre = float(rel[np.searchsorted(result.t, 0.2) - 1])
    drift = abs(float(rel[-1]) - pre)
    ok = not result.diverged and drift < RESYNC_TOLERANCE_DEG
    return CheckResult("fig14", ok, f"angle difference returned within {drift:.2f} deg")


def fault_recovery(out: ArtifactWriter) -> CheckResult:
    """The four 14-bus fault cases."""
    expected = {"gfm6-m0.01": True, "gfm6-m0.08": False, "gfl8-ki-x10": False, "gfl8-ki-div10": True}
    outcomes = scenarios.run_fault_studies()
    for o in outcomes:
        _write_sim(out, f"fig15/{o.name}", o.result, o.name)
    out.csv(
        "fig15/outcomes.csv",
        tables.records_frame(
            [
                {
                    "case": o.name,
                    "recovered": o.recovered,
                    "max_slip_deg": o.max_slip_deg,
                    "tail_deviation_hz": o.tail_deviation_hz,
                    "diverged": o.diverged,
                }
                for o in outcomes
            ]
        ),
    )
    wrong = [o.name for o in outcomes if expected.get(o.name) is not o.recovered]
    return CheckResult(
        "fig15",
        not wrong,
        ", ".join(f"{o.name}={'recovers' if o.recovered else 'fails'}" for o in outcomes),
    )


# -------- Transient ------------------------------------------------------------------
def default_cases() -> dict[str, TwoInverterCase]:
    """Undamped example of every pairing."""
    return {
        "gfm-gfm": TwoInverterCase.gfm_gfm(v1=1.0, v2=1.0, x=0.5, p1_ref=1.0, p2_ref=0.0, j1=0.1, j2=0.1, k_d=0.0),
        "gfl-gfl": TwoInverterCase.gfl_gfl(i1=1.0, i2=1.0, g=0.5, q1_ref=-1.0, q2_ref=0.0, j1=0.1, j2=0.1, k_d=0.0),
        "gfm-gfl": TwoInverterCase.gfm_gfl(i1=0.5, v2=1.0, x=0.2, q1_ref=-0.2, p2_ref=0.25, j1=0.02, j2=0.2, k_d=0.0),
    }


def transient_curves(out: ArtifactWriter) -> CheckResult:
    """Power-angle curves, decelerating areas and an undamped swing for each pairing."""
    notes = []
    ok = True
    for name, case in default_cases().items():
        curve = angle_curve(case)
        s_ref = case.setpoint
        eq = equilibria(curve, s_ref)
        out.csv(f"transient_curves/{name}_curve.csv", tables.curve_frame(curve, s_ref))
        out.csv(f"transient_curves/{name}_equilibria.csv", tables.equilibria_frame(eq))
        out.svg(f"transient_curves/{name}.svg", plots.power_angle_figure(curve, s_ref, eq, title=name))
        area = max_decel_area(curve, s_ref)
        sep = eq.first(EquilibriumKind.SEP).theta
        uep = eq.first(EquilibriumKind.UEP).theta
        if uep <= sep:
            uep += 2 * math.pi
        quad, _ = scipy.integrate.quad(lambda th: float(curve(th)) - s_ref, sep, uep, epsabs=1e-13, epsrel=1e-13)
        # start halfway to the UEP so the swing stays bounded
        traj = swing_ode(case, 0.5 * (sep + uep), 0.0, duration=10.0, dt=1e-3)
        out.csv(f"transient_curves/{name}_trajectory.csv", tables.trajectory_frame(traj))
        drift = float(np.ptp(traj.energy) / max(np.max(np.abs(traj.energy)), 1e-12))
        ok &= abs(area - quad) <= AREA_TOLERANCE * max(1.0, abs(quad)) and drift < ENERGY_DRIFT
        notes.append(f"{name}: area {area:.4f}, energy drift {drift:.1e}")
    return CheckResult("transient_curves", ok, "; ".join(notes))


def inertia_swap_run(out: ArtifactWriter) -> CheckResult:
    """Mixed pair whose PLL gains drop to zero at 1 s."""
    swap = inertia_swap()
    out.csv("fig13/trajectory.csv", tables.trajectory_frame(swap.trajectory))
    fig = plots.trajectory_figure(swap.trajectory, marks=(swap.t_swap,), title="inertia swap")
    out.svg("fig13/trajectory.svg", fig)
    before = swap.sep_before.degrees
    final = swap.trajectory.final_degrees
    ok = 0.0 < before < 90.0 and -90.0 < final < 0.0 and not swap.trajectory.diverged
    return CheckResult("fig13", ok, f"SEP {before:.1f} deg -> settled at {final:.1f} deg")


# -------- Driver ---------------------------------------------------------------------
Experiment = Callable[[ArtifactWriter], CheckResult]


def experiments(points: int = 21) -> dict[str, Experiment]:
    """Experiments keyed by output directory."""
    return {
        "fig7": lambda out: grid_strength_loci(out, points),
        "fig8": lambda out: synchronization_loci(out, points),
        "fig9": lambda out: inner_loop_loci(out, points),
        "fig11": island_gfl,
        "fig12": strong_grid,
        "fig13": inertia_swap_run,
        "fig14": two_gfl_fault,
        "fig15": fault_recovery,
        "table1": grid_strength_table,
        "transient_curves": transient_curves,
    }


def run_all(out: ArtifactWriter, only: Sequence[str] | None = None, points: int = 21) -> list[CheckResult]:
    """Run the selected experiments and write ``summary.csv``.

    Raises
    ------
    ValueError
        For an unknown experiment name in ``only``.
    """
    table = experiments(points)
    names = list(only) if only else list(table)
    unknown = [n for n in names if n not in table]
    if unknown:
        raise ValueError(f"unknown experiments {unknown}; choose from {', '.join(table)}")
    results = []
    for name in names:
        try:
            res = table[name](out)
        except (ValueError, RuntimeError, OSError) as exc:
            logger.exception("%s failed", name)
            res = CheckResult(name, False, f"{type(exc).__name__}: {exc}")
        logger.info("%s: %s (%s)", name, res.status, res.detail)
        results.append(res)
    out.csv(
        "summary.csv",
        tables.records_frame([{"experiment": r.name, "status": r.status, "detail": r.detail} for r in results]),
    )
    return results
