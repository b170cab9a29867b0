"""Self-contained SVG figures.

Figures are built on :class:`matplotlib.figure.Figure` directly so no
pyplot state or interactive backend is involved. Text is rendered as paths
and the SVG id salt and date are fixed, which keeps repeated runs
byte-identical.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from pathlib import Path

import matplotlib as mpl
import numpy as np
from matplotlib.axes import Axes
from matplotlib.figure import Figure

from gfm_gfl_duality.errors import NoEquilibriumError
from gfm_gfl_duality.smallsignal import ModeReport, pair_loci
from gfm_gfl_duality.timedomain import SimResult
from gfm_gfl_duality.transient import AngleCurve, Equilibria, EquilibriumKind, SwingTrajectory

logger = logging.getLogger(__name__)

_SVG_RC = {
    "svg.fonttype": "path",
    "svg.hashsalt": "gfm-gfl-duality",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}

# trace signals available for time plots
TRACE_SIGNALS = ("omega_hz", "theta", "v_d", "v_q", "i_d", "i_q", "p", "q")


def save_svg(fig: Figure, path: str | Path) -> Path:
    """Write ``fig`` as SVG and return the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with mpl.rc_context(_SVG_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    logger.debug("wrote %s", path)
    return path


def _figure(rows: int = 1, width: float = 6.0, height: float = 4.0) -> tuple[Figure, list[Axes]]:
    with mpl.rc_context(_SVG_RC):
        fig = Figure(figsize=(width, height * rows), layout="constrained")
        axes = [fig.add_subplot(rows, 1, k + 1) for k in range(rows)]
    return fig, axes


# -------- Small-signal ---------------------------------------------------------------
def root_locus_figure(locus: Sequence[tuple[float, ModeReport]], title: str = "", xlabel: str = "value") -> Figure:
    """Branches of a root locus coloured by sweep value.

    The imaginary axis is in Hz.
    """
    fig, (ax,) = _figure()
    paired = pair_loci(locus)
    if paired.size:
        values = np.array([v for v, _ in locus], dtype=float)
        ax.plot(paired.real, paired.imag / (2 * np.pi), color="0.75", linewidth=0.6)
        sc = None
        for k in range(paired.shape[1]):
            sc = ax.scatter(paired[:, k].real, paired[:, k].imag / (2 * np.pi), c=values, s=6, cmap="viridis")
        if sc is not None:
            fig.colorbar(sc, ax=ax, label=xlabel)
    ax.axvline(0.0, color="k", linewidth=0.8)
    ax.set_xlabel("Re (1/s)")
    ax.set_ylabel("Im (Hz)")
    ax.set_title(title)
    return fig


def poles_figure(report: ModeReport, title: str = "") -> Figure:
    """Pole map with the dominant pole highlighted."""
    fig, (ax,) = _figure()
    p = np.asarray(report.poles)
    ax.scatter(p.real, p.imag / (2 * np.pi), marker="x", s=16, color="C0")
    ax.scatter([report.dominant.real], [report.dominant.imag / (2 * np.pi)], marker="o", facecolors="none", color="C3")
    ax.axvline(0.0, color="k", linewidth=0.8)
    ax.set_xlabel("Re (1/s)")
    ax.set_ylabel("Im (Hz)")
    ax.set_title(title or f"dominant {report.frequency_hz:.2f} Hz ({report.verdict.value})")
    return fig


# -------- Time domain ----------------------------------------------------------------
def trace_figure(
    result: SimResult, signals: Sequence[str] = ("omega_hz", "v_d", "p"), title: str = ""
) -> Figure:
    """One panel per signal, one line per device.

    Raises
    ------
    ValueError
        For an unknown signal name.
    """
    unknown = [s for s in signals if s not in TRACE_SIGNALS]
    if unknown:
        raise ValueError(f"unknown trace signals {unknown}; choose from {', '.join(TRACE_SIGNALS)}")
    fig, axes = _figure(rows=len(signals), height=2.2)
    for ax, name in zip(axes, signals, strict=True):
        for bus in sorted(result.traces):
            tr = result.trace(bus)
            ax.plot(tr.t, tr.columns()[name], linewidth=0.9, label=f"{tr.kind.value} @ {bus}")
        ax.set_ylabel(name)
    axes[-1].set_xlabel("t (s)")
    axes[0].legend(loc="best", fontsize=7)
    if result.diverged:
        axes[0].set_title(f"{title} (diverged at {result.t_end:.3f} s)".strip())
    else:
        axes[0].set_title(title)
    return fig


# -------- Transient ------------------------------------------------------------------
def power_angle_figure(curve: AngleCurve, s_ref: float, eq: Equilibria, title: str = "") -> Figure:
    """Characteristic, setpoint, equilibria and the decelerating area.

    The area between the curve and the setpoint from the SEP to the UEP is
    shaded when both exist.
    """
    fig, (ax,) = _figure()
    deg = np.degrees(curve.theta)
    ax.plot(deg, curve.values, color="C0", label=curve.family.value)
    ax.axhline(s_ref, color="C1", linestyle="--", linewidth=0.9, label="setpoint")
    for p in eq.points:
        marker = "o" if p.kind is EquilibriumKind.SEP else "s"
        ax.plot([p.degrees], [s_ref], marker=marker, color="k", markerfacecolor="none", linestyle="none")
        ax.annotate(p.kind.value, (p.degrees, s_ref), textcoords="offset points", xytext=(4, 6), fontsize=7)
    try:
        sep = eq.first(EquilibriumKind.SEP).theta
        uep = eq.first(EquilibriumKind.UEP).theta
    except NoEquilibriumError:
        pass
    else:
        if uep <= sep:
            uep += 2 * np.pi
        th = np.linspace(sep, uep, 200)
        ax.fill_between(np.degrees(th), np.asarray(curve(th)), s_ref, color="C2", alpha=0.3, label="decelerating area")
    ax.set_xlabel("angle difference (deg)")
    ax.set_ylabel("synchronizing term")
    ax.legend(loc="best", fontsize=7)
    ax.set_title(title)
    return fig


def trajectory_figure(traj: SwingTrajectory, marks: Sequence[float] = (), title: str = "") -> Figure:
    """Angle against time with vertical markers at ``marks`` (s)."""
    fig, (ax,) = _figure()
    ax.plot(traj.t, np.degrees(traj.theta), color="C0")
    for t in marks:
        ax.axvline(t, color="0.5", linestyle=":", linewidth=0.8)
    ax.set_xlabel("t (s)")
    ax.set_ylabel("angle difference (deg)")
    ax.set_title(title)
    return fig
