"""Command-line front-end: ``gfm-gfl-duality <command> [options]``.

Commands
--------
rootlocus
    Sweep one preset parameter of a single inverter on an infinite bus.
poles
    Whole-system modes of a network topology.
simulate
    Time-domain run of a scenario file.
transient
    Power-angle curve, equilibria and swing trajectory of a two-inverter pair.
island
    The islanded grid-following inverter run with its phase summary.
paper-figs
    Every reproducible experiment with PASS/FAIL checks.

Exit codes: 0 on success, 2 on an input error, 3 on a numerical failure.
"""

from __future__ import annotations

import argparse
import datetime
import logging
import math
import sys
from collections.abc import Callable, Sequence
from dataclasses import asdict, replace
from pathlib import Path

from gfm_gfl_duality import __version__, reproduce, scenarios
from gfm_gfl_duality.io import plots, tables
from gfm_gfl_duality.io.config import load_scenario, load_topology, parse_overrides
from gfm_gfl_duality.io.manifest import ArtifactWriter, RunManifest, resolve_output_dir
from gfm_gfl_duality.network import assemble, system_poles
from gfm_gfl_duality.smallsignal import preset, preset_sweeps, root_locus
from gfm_gfl_duality.timedomain import SimConfig, simulate
from gfm_gfl_duality.transient import TwoInverterCase, angle_curve, equilibria, inertia_swap, swing_ode

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


# -------- Argument helpers ----------------------------------------------------------
def parse_line_scaling(text: str) -> tuple[list[tuple[int, int]], float]:
    """Parse ``"1-2,1-5:0.2"`` into line pairs and a factor.

    Raises
    ------
    ValueError
        On a malformed pair list or factor.
    """
    pairs_text, sep, factor_text = text.partition(":")
    if not sep:
        raise ValueError(f"line scaling {text!r} must look like 'a-b,c-d:factor'")
    try:
        factor = float(factor_text)
    except ValueError:
        raise ValueError(f"line scaling factor {factor_text!r} is not a number") from None
    if factor <= 0:
        raise ValueError(f"line scaling factor must be positive, got {factor}")
    pairs = []
    for item in pairs_text.split(","):
        a, dash, b = item.strip().partition("-")
        if not dash:
            raise ValueError(f"line {item!r} must look like 'from-to'")
        try:
            pairs.append((int(a), int(b)))
        except ValueError:
            raise ValueError(f"line {item!r} must name two integer buses") from None
    return pairs, factor


def _device_overrides(items: Sequence[str]) -> dict[int, dict[str, float]]:
    """``BUS.name=value`` strings grouped by bus."""
    out: dict[int, dict[str, float]] = {}
    for item in items:
        bus_text, dot, rest = item.partition(".")
        if not dot or not bus_text.strip().isdigit():
            raise ValueError(f"device override {item!r} must look like BUS.name=value")
        out.setdefault(int(bus_text), {}).update(parse_overrides([rest]))
    return out


def _sim_config(args: argparse.Namespace, base: SimConfig) -> SimConfig:
    return SimConfig(
        duration=args.duration if args.duration is not None else base.duration,
        dt=args.dt if args.dt is not None else base.dt,
        decimation=args.decimation if args.decimation is not None else base.decimation,
    )


# -------- Commands ------------------------------------------------------------------
def cmd_rootlocus(args: argparse.Namespace, out: ArtifactWriter) -> None:
    """Root locus of one preset sweep."""
    spec = preset(args.preset, args.points)
    overrides = parse_overrides(args.set)
    if overrides:
        spec = replace(spec, device=spec.device.with_overrides(**overrides))
    out.manifest.overrides = overrides
    out.manifest.parameters = {
        "preset": spec.name,
        "parameter": spec.parameter.value,
        "start": spec.start,
        "end": spec.end,
        "points": spec.points,
        "device": {"kind": spec.device.kind.value, **asdict(spec.device)},
        "grid": asdict(spec.grid),
    }
    locus = root_locus(spec)
    out.csv(f"{spec.name}_locus.csv", tables.locus_frame(locus))
    out.csv(f"{spec.name}_dominant.csv", tables.dominant_frame(locus))
    out.svg(f"{spec.name}.svg", plots.root_locus_figure(locus, title=spec.name, xlabel=spec.parameter.value))
    first, last = locus[0][1], locus[-1][1]
    print(
        f"{spec.name}: {first.verdict.value} ({first.max_real:+.4g}/s) -> "
        f"{last.verdict.value} ({last.max_real:+.4g}/s)"
    )


def cmd_poles(args: argparse.Namespace, out: ArtifactWriter) -> None:
    """Modes of a topology, optionally with scaled lines and device overrides."""
    top = load_topology(args.topology)
    out.manifest.inputs.append(str(args.topology))
    dev_over = _device_overrides(args.set)
    for bus, kw in dev_over.items():
        if bus not in top.devices:
            raise ValueError(f"no device at bus {bus}")
        top = top.with_device(bus, top.devices[bus].with_overrides(**kw))
    scaling = None
    if args.scale_lines:
        pairs, factor = parse_line_scaling(args.scale_lines)
        top = top.with_scaled_lines(pairs, factor)
        scaling = {"lines": [list(p) for p in pairs], "factor": factor}
    out.manifest.overrides = {str(b): kw for b, kw in dev_over.items()}
    out.manifest.parameters = {"topology": top.name, "line_scaling": scaling}
    report = system_poles(assemble(top))
    out.csv("poles.csv", tables.poles_frame(report))
    out.svg("poles.svg", plots.poles_figure(report, title=top.name))
    print(
        f"{top.name}: dominant {report.dominant.real:+.4g} ± j{abs(report.dominant.imag):.4g} "
        f"({report.frequency_hz:.2f} Hz, {report.verdict.value})"
    )


def cmd_simulate(args: argparse.Namespace, out: ArtifactWriter) -> None:
    """Simulate a scenario file."""
    sc = load_scenario(args.scenario)
    out.manifest.inputs.append(str(args.scenario))
    cfg = _sim_config(args, sc.sim)
    out.manifest.parameters = {
        "topology": sc.topology.name,
        "sim": asdict(cfg),
        "events": [e.describe() for e in sc.events],
    }
    result = simulate(sc.topology, events=sc.events, cfg=cfg)
    stem = Path(str(args.scenario)).stem
    out.csv(f"{stem}_traces.csv", tables.trace_frame(result))
    out.svg(f"{stem}_traces.svg", plots.trace_figure(result, signals=args.signals, title=stem))
    status = f"diverged at {result.t_end:.4f} s" if result.diverged else f"completed {result.t_end:.4f} s"
    print(f"{stem}: {status}")


def _transient_case(args: argparse.Namespace) -> TwoInverterCase:
    cases = reproduce.default_cases()
    case = cases[args.case]
    if args.k_d is not None:
        case = replace(case, k_d=args.k_d)
    return case


def cmd_transient(args: argparse.Namespace, out: ArtifactWriter) -> None:
    """Power-angle analysis and swing trajectory of a two-inverter pair."""
    if args.case == "inertia-swap":
        swap = inertia_swap(duration=args.duration)
        out.manifest.parameters = {"case": args.case, "t_swap": swap.t_swap, "duration": args.duration}
        out.csv("inertia_swap_trajectory.csv", tables.trajectory_frame(swap.trajectory))
        out.svg("inertia_swap.svg", plots.trajectory_figure(swap.trajectory, marks=(swap.t_swap,)))
        print(f"inertia swap: SEP {swap.sep_before.degrees:.1f} deg -> {swap.trajectory.final_degrees:.1f} deg")
        return
    case = _transient_case(args)
    curve = angle_curve(case)
    eq = equilibria(curve, case.setpoint)
    out.manifest.parameters = {"case": args.case, **{k: v for k, v in asdict(case).items() if k != "kind"}}
    out.csv(f"{args.case}_curve.csv", tables.curve_frame(curve, case.setpoint))
    out.csv(f"{args.case}_equilibria.csv", tables.equilibria_frame(eq))
    out.svg(f"{args.case}_power_angle.svg", plots.power_angle_figure(curve, case.setpoint, eq, title=args.case))
    if args.theta0_deg is not None:
        traj = swing_ode(case, math.radians(args.theta0_deg), 0.0, duration=args.duration)
        out.csv(f"{args.case}_trajectory.csv", tables.trajectory_frame(traj))
        out.svg(f"{args.case}_trajectory.svg", plots.trajectory_figure(traj, title=args.case))
    print(", ".join(f"{p.kind.value} {p.degrees:.2f} deg" for p in eq.points) or "no equilibrium")


def cmd_island(args: argparse.Namespace, out: ArtifactWriter) -> None:
    """Islanded GFL run and its phase summary."""
    base = load_scenario("island_gfl").sim
    cfg = _sim_config(args, base)
    out.manifest.inputs.append("island_gfl")
    out.manifest.parameters = {"sim": asdict(cfg)}
    result = scenarios.island_gfl_case(cfg)
    s = scenarios.summarize_island(result)
    out.csv("island_traces.csv", tables.trace_frame(result))
    out.svg("island_traces.svg", plots.trace_figure(result, title="islanded GFL"))
    out.csv("island_summary.csv", tables.records_frame([asdict(s)]))
    print(
        f"phase 1 v_d {s.v_d_phase1:.3f} pu; phase 2 min slope {s.min_slope_phase2:.2f} Hz/s; "
        f"final {s.final_frequency_hz:.3f} Hz (slope {s.final_slope:.2e} Hz/s)"
    )


def cmd_paper_figs(args: argparse.Namespace, out: ArtifactWriter) -> None:
    """Run the reproduction harness."""
    out.manifest.parameters = {"only": list(args.only or []), "points": args.points}
    results = reproduce.run_all(out, only=args.only, points=args.points)
    for r in results:
        print(f"{r.status} {r.name}: {r.detail}")


# -------- Parser and entry point ----------------------------------------------------
def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--duration", type=float, help="simulated time, s")
    p.add_argument("--dt", type=float, help="integration step, s")
    p.add_argument("--decimation", type=int, help="record every N-th step")


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one sub-parser per command."""
    parser = argparse.ArgumentParser(
        prog="gfm-gfl-duality",
        description="Small-signal, time-domain and transient analysis of grid-forming and grid-following inverters.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--output-dir", help="output directory (default: $GFM_GFL_DUALITY_OUTPUT_DIR or ./gfm_gfl_output)"
    )
    parser.add_argument(
        "--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="logging threshold"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rootlocus", help="root locus of a preset sweep")
    p.add_argument("--preset", required=True, choices=[s.name for s in preset_sweeps(2)])
    p.add_argument("--points", type=int, default=21)
    p.add_argument("--set", action="append", default=[], metavar="NAME=VALUE", help="device parameter override")
    p.set_defaults(func=cmd_rootlocus)

    p = sub.add_parser("poles", help="whole-system modes of a topology")
    p.add_argument("--topology", required=True, help="topology JSON path or shipped name")
    p.add_argument("--scale-lines", metavar="A-B[,C-D]:FACTOR", help="multiply line impedances")
    p.add_argument("--set", action="append", default=[], metavar="BUS.NAME=VALUE", help="device parameter override")
    p.set_defaults(func=cmd_poles)

    p = sub.add_parser("simulate", help="time-domain run of a scenario")
    p.add_argument("--scenario", required=True, help="scenario JSON path or shipped name")
    p.add_argument("--signals", nargs="+", default=["omega_hz", "v_d", "p"], choices=list(plots.TRACE_SIGNALS))
    _add_sim_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("transient", help="power-angle analysis of a two-inverter pair")
    p.add_argument("--case", default="gfm-gfm", choices=["gfm-gfm", "gfl-gfl", "gfm-gfl", "inertia-swap"])
    p.add_argument("--theta0-deg", type=float, help="integrate the swing equation from this angle")
    p.add_argument("--k-d", type=float, help="damping coefficient")
    p.add_argument("--duration", type=float, default=10.0)
    p.set_defaults(func=cmd_transient)

    p = sub.add_parser("island", help="islanded grid-following inverter")
    _add_sim_flags(p)
    p.set_defaults(func=cmd_island)

    p = sub.add_parser("paper-figs", help="regenerate every experiment with checks")
    p.add_argument("--only", nargs="+", choices=list(reproduce.experiments()), help="subset of experiments")
    p.add_argument("--points", type=int, default=21, help="sweep points per locus")
    p.add_argument("--no-date", action="store_true", help="write directly into the output directory")
    p.set_defaults(func=cmd_paper_figs)
    return parser


def _run_dir(args: argparse.Namespace) -> Path:
    root = resolve_output_dir(args.output_dir)
    if args.command == "paper-figs" and not args.no_date:
        return root / f"paper-figs-{datetime.date.today().isoformat()}"
    return root


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_INPUT
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    func: Callable[[argparse.Namespace, ArtifactWriter], None] = args.func
    try:
        manifest = RunManifest(command=args.command, version=__version__)
        out = ArtifactWriter(_run_dir(args), manifest)
        func(args, out)
        out.finish()
    except (ValueError, OSError) as exc:
        logger.error("input error: %s", exc)
        return EXIT_INPUT
    except RuntimeError as exc:
        logger.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
