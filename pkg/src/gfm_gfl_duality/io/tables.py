"""CSV tables for loci, poles, traces, curves and summaries.

Every table is a :class:`pandas.DataFrame` written with a fixed 17
significant digit float format so repeated runs produce byte-identical
files.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from gfm_gfl_duality.devices import TWO_PI
from gfm_gfl_duality.smallsignal import DualityRow, ModeReport, pair_loci
from gfm_gfl_duality.timedomain import SimResult
from gfm_gfl_duality.transient import AngleCurve, Equilibria, SwingTrajectory

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.16e"
"""``to_csv`` float format: 17 significant digits in scientific notation."""


def write_csv(frame: pd.DataFrame, path: str | Path) -> Path:
    """Write ``frame`` without its index and return the path.

    Parent directories are created as needed.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug("wrote %d rows to %s", len(frame), path)
    return path


# -------- Small-signal ---------------------------------------------------------------
def locus_frame(locus: Sequence[tuple[float, ModeReport]]) -> pd.DataFrame:
    """Long-format root locus: one row per sweep value and branch.

    Branches follow :func:`~gfm_gfl_duality.smallsignal.pair_loci` so a
    branch index traces one pole across the sweep.
    """
    paired = pair_loci(locus)
    values = np.array([v for v, _ in locus], dtype=float)
    n_pts, n_br = paired.shape
    return pd.DataFrame(
        {
            "value": np.repeat(values, n_br),
            "branch": np.tile(np.arange(n_br), n_pts),
            "re": paired.real.ravel(),
            "im": paired.imag.ravel(),
        }
    )


def dominant_frame(locus: Sequence[tuple[float, ModeReport]]) -> pd.DataFrame:
    """Dominant mode and verdict per sweep value."""
    return pd.DataFrame(
        {
            "value": [float(v) for v, _ in locus],
            "re": [r.dominant.real for _, r in locus],
            "im": [r.dominant.imag for _, r in locus],
            "frequency_hz": [r.frequency_hz for _, r in locus],
            "damping_ratio": [r.damping_ratio for _, r in locus],
            "verdict": [r.verdict.value for _, r in locus],
        }
    )


def poles_frame(report: ModeReport) -> pd.DataFrame:
    """All poles of a report, rightmost first."""
    p = np.asarray(report.poles)
    mag = np.abs(p)
    with np.errstate(divide="ignore", invalid="ignore"):
        zeta = np.where(mag > 0, -p.real / mag, 0.0)
    return pd.DataFrame(
        {
            "re": p.real,
            "im": p.imag,
            "frequency_hz": np.abs(p.imag) / TWO_PI,
            "damping_ratio": zeta,
        }
    )


def duality_frame(rows: Iterable[DualityRow]) -> pd.DataFrame:
    """Grid-strength duality summary."""
    return pd.DataFrame(
        [
            {
                "kind": r.kind.value,
                "condition": r.condition,
                "grid_scale": float(r.grid_scale),
                "verdict": r.verdict.value,
            }
            for r in rows
        ]
    )


# -------- Time domain ----------------------------------------------------------------
def trace_frame(result: SimResult) -> pd.DataFrame:
    """Wide table: time plus ``bus<k>_<signal>`` columns for every device."""
    cols: dict[str, Any] = {"t": result.t}
    for bus in sorted(result.traces):
        for name, values in result.trace(bus).columns().items():
            cols[f"bus{bus}_{name}"] = values
    return pd.DataFrame(cols)


# -------- Transient ------------------------------------------------------------------
def curve_frame(curve: AngleCurve, s_ref: float) -> pd.DataFrame:
    """Sampled characteristic with the setpoint line."""
    return pd.DataFrame(
        {
            "theta_deg": np.degrees(curve.theta),
            "s": curve.values,
            "s_ref": np.full(curve.theta.shape, float(s_ref)),
        }
    )


def equilibria_frame(eq: Equilibria) -> pd.DataFrame:
    """Equilibrium angles and their class."""
    return pd.DataFrame(
        {
            "theta_deg": [p.degrees for p in eq.points],
            "kind": [p.kind.value for p in eq.points],
        },
        columns=["theta_deg", "kind"],
    )


def trajectory_frame(traj: SwingTrajectory) -> pd.DataFrame:
    """Swing trajectory with its energy."""
    return pd.DataFrame(
        {
            "t": traj.t,
            "theta_deg": np.degrees(traj.theta),
            "rate": traj.rate,
            "energy": traj.energy,
        }
    )


# -------- Summaries ------------------------------------------------------------------
def records_frame(records: Sequence[Mapping[str, Any]], columns: Sequence[str] | None = None) -> pd.DataFrame:
    """Frame from a list of flat records, in ``columns`` order if given."""
    return pd.DataFrame(list(records), columns=list(columns) if columns is not None else None)
