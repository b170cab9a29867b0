"""Root-locus sweeps and stability classification for one inverter on an infinite bus.

A :class:`SweepSpec` names one parameter (grid scale, droop gain, PLL
bandwidth, voltage or current loop bandwidth), a range and the device and
grid templates it is applied to. :func:`root_locus` evaluates the closed-loop
characteristic (:func:`~gfm_gfl_duality.devices.modified_swing`) at every
point and returns a :class:`ModeReport` per point.

:func:`preset_sweeps` returns the six preset sweeps that demonstrate the
grid-strength duality and the effect of the synchronization and inner-loop
bandwidths.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.optimize
from numpy.typing import ArrayLike, NDArray

from gfm_gfl_duality.devices import (
    TWO_PI,
    DeviceKind,
    DeviceModel,
    DeviceParams,
    GflParams,
    GfmParams,
    GridImpedance,
    modified_swing,
)
from gfm_gfl_duality.dqframe import poles_of, sort_roots
from gfm_gfl_duality.errors import DualityError, IdealStiffGridError, SweepError

logger = logging.getLogger(__name__)

MARGINAL_BAND = 1e-6
"""Half-width (rad/s) of the band around the imaginary axis classified as marginal."""


class Verdict(Enum):
    """Small-signal stability verdict.

    Attributes
    ----------
    STABLE : str
        Every pole has real part below ``-MARGINAL_BAND``.
    MARGINAL : str
        The rightmost pole lies within ``±MARGINAL_BAND`` of the axis.
    UNSTABLE : str
        At least one pole has real part above ``+MARGINAL_BAND``.
    """

    STABLE = "stable"
    MARGINAL = "marginal"
    UNSTABLE = "unstable"


class SweepParameter(Enum):
    """Parameter varied along a sweep.

    Attributes
    ----------
    GRID_SCALE : str
        ``c`` in ``Z_g = c (1/5 + j)``, pu.
    DROOP_M : str
        GFM droop gain ``m``, pu.
    PLL_BANDWIDTH : str
        GFL PLL bandwidth, Hz.
    V_LOOP_BW : str
        GFM voltage control bandwidth index, Hz.
    I_LOOP_BW : str
        GFL current control bandwidth index, Hz.
    """

    GRID_SCALE = "grid_scale"
    DROOP_M = "droop_m"
    PLL_BANDWIDTH = "pll_bandwidth"
    V_LOOP_BW = "v_loop_bw"
    I_LOOP_BW = "i_loop_bw"


_ONLY_FOR = {
    SweepParameter.DROOP_M: DeviceKind.GFM,
    SweepParameter.V_LOOP_BW: DeviceKind.GFM,
    SweepParameter.PLL_BANDWIDTH: DeviceKind.GFL,
    SweepParameter.I_LOOP_BW: DeviceKind.GFL,
}


def classify(poles: ArrayLike) -> Verdict:
    """Classify a pole set.

    Raises
    ------
    ValueError
        If ``poles`` is empty.
    """
    p = np.asarray(poles, dtype=np.complex128).ravel()
    if p.size == 0:
        raise ValueError("cannot classify an empty pole set")
    top = float(np.max(p.real))
    if top > MARGINAL_BAND:
        return Verdict.UNSTABLE
    if top >= -MARGINAL_BAND:
        return Verdict.MARGINAL
    return Verdict.STABLE


@dataclass(frozen=True, slots=True)
class ModeReport:
    """Poles and the dominant (rightmost) mode with its verdict."""

    poles: NDArray[np.complex128] = field(repr=False)
    dominant: complex
    frequency_hz: float
    damping_ratio: float
    verdict: Verdict

    @classmethod
    def from_poles(cls, poles: ArrayLike) -> ModeReport:
        """Build a report; ties on the real part favour the positive-frequency pole."""
        p = sort_roots(poles)
        if p.size == 0:
            raise ValueError("cannot report on an empty pole set")
        dom = complex(p[0])
        mag = abs(dom)
        return cls(
            poles=p,
            dominant=dom,
            frequency_hz=abs(dom.imag) / TWO_PI,
            damping_ratio=(-dom.real / mag) if mag > 0 else 0.0,
            verdict=classify(p),
        )

    @property
    def max_real(self) -> float:
        """Real part of the dominant pole, 1/s."""
        return self.dominant.real


@dataclass(frozen=True, slots=True)
class SweepSpec:
    """One-parameter sweep of a single-inverter-infinite-bus system.

    Parameters
    ----------
    parameter : SweepParameter
        Swept quantity; bandwidths are given in Hz.
    start, end : float
        Range endpoints (visited in this order).
    points : int
        Number of sweep points (>= 2).
    device : GfmParams or GflParams
        Device template.
    grid : GridImpedance
        Grid template.
    name : str, optional
        Preset name used for output directories.

    Raises
    ------
    ValueError
        For fewer than 2 points, a parameter the device kind does not have,
        or ``start == end``.
    """

    parameter: SweepParameter
    start: float
    end: float
    points: int
    device: DeviceParams
    grid: GridImpedance
    name: str = ""

    def __post_init__(self) -> None:
        if self.points < 2:
            raise ValueError(f"a sweep needs at least 2 points, got {self.points}")
        needed = _ONLY_FOR.get(self.parameter)
        if needed is not None and self.device.kind is not needed:
            raise ValueError(f"{self.parameter.value} only applies to {needed.value} devices")
        if self.start == self.end:
            raise ValueError(f"degenerate sweep {self.name or self.parameter.value}: start equals end ({self.start})")

    def values(self) -> NDArray[np.float64]:
        """Sweep values from ``start`` to ``end``."""
        return np.linspace(self.start, self.end, self.points)

    def apply(self, value: float) -> tuple[DeviceParams, GridImpedance]:
        """Return the device and grid at sweep value ``value``."""
        dev, grid = self.device, self.grid
        if self.parameter is SweepParameter.GRID_SCALE:
            return dev, GridImpedance.from_scale(value)
        if self.parameter is SweepParameter.DROOP_M and isinstance(dev, GfmParams):
            return dev.with_overrides(m=value), grid
        if self.parameter is SweepParameter.V_LOOP_BW and isinstance(dev, GfmParams):
            return dev.with_overrides(omega_v=TWO_PI * value), grid
        if self.parameter is SweepParameter.PLL_BANDWIDTH and isinstance(dev, GflParams):
            return dev.with_overrides(omega_pll=TWO_PI * value), grid
        if self.parameter is SweepParameter.I_LOOP_BW and isinstance(dev, GflParams):
            return dev.with_overrides(omega_i=TWO_PI * value), grid
        raise ValueError(f"cannot apply {self.parameter.value} to {dev.kind.value}")


def evaluate_point(params: DeviceParams, grid: GridImpedance) -> ModeReport:
    """Linearize one configuration at its infinite-bus equilibrium and report its modes.

    The modes are the numerator roots of :func:`~gfm_gfl_duality.devices.modified_swing`.
    """
    dev = DeviceModel.at_infinite_bus(params, grid)
    return ModeReport.from_poles(poles_of(modified_swing(dev, grid), "numerator"))


def root_locus(spec: SweepSpec) -> list[tuple[float, ModeReport]]:
    """Evaluate the closed-loop modes at every sweep point.

    Returns
    -------
    list of (float, ModeReport)
        One entry per sweep value, in sweep order.

    Raises
    ------
    SweepError
        If any point fails to build, carrying the offending value.
    """
    out = []
    for value in spec.values():
        try:
            params, grid = spec.apply(float(value))
            report = evaluate_point(params, grid)
        except (DualityError, ValueError, np.linalg.LinAlgError) as exc:
            raise SweepError(float(value), str(exc)) from exc
        logger.debug("%s=%g: dominant %s (%s)", spec.parameter.value, value, report.dominant, report.verdict.value)
        out.append((float(value), report))
    return out


def pair_loci(locus: Sequence[tuple[float, ModeReport]]) -> NDArray[np.complex128]:
    """Order poles across sweep points by nearest-neighbour assignment.

    Returns
    -------
    numpy.ndarray
        ``(points, modes)`` array; column ``k`` follows one branch.
    """
    if not locus:
        return np.zeros((0, 0), dtype=np.complex128)
    rows = [np.asarray(locus[0][1].poles)]
    for _, report in locus[1:]:
        prev, cur = rows[-1], np.asarray(report.poles)
        cost = np.abs(prev[:, None] - cur[None, :])
        r, c = scipy.optimize.linear_sum_assignment(cost)
        nxt = np.empty_like(prev)
        nxt[r] = cur[c]
        rows.append(nxt)
    return np.vstack(rows)


GFM_SWEEP_GRID = GridImpedance.from_scale(0.2)
GFL_SWEEP_GRID = GridImpedance.from_scale(0.4)


def preset_sweeps(points: int = 21) -> tuple[SweepSpec, ...]:
    """The six preset sweeps.

    1. GFM grid scale 0.3 → 0.1 (stronger grid).
    2. GFL grid scale 0.4 → 0.6 (weaker grid).
    3. GFM droop gain 0.05 → 0.2 pu.
    4. GFL PLL bandwidth 15 → 60 Hz.
    5. GFM voltage loop bandwidth 250 → 150 Hz.
    6. GFL current loop bandwidth 250 → 150 Hz.
    """
    gfm, gfl = GfmParams(), GflParams()
    return (
        SweepSpec(SweepParameter.GRID_SCALE, 0.3, 0.1, points, gfm, GridImpedance.from_scale(0.3), "gfm-grid-scale"),
        SweepSpec(SweepParameter.GRID_SCALE, 0.4, 0.6, points, gfl, GridImpedance.from_scale(0.4), "gfl-grid-scale"),
        SweepSpec(SweepParameter.DROOP_M, 0.05, 0.2, points, gfm, GFM_SWEEP_GRID, "gfm-droop"),
        SweepSpec(SweepParameter.PLL_BANDWIDTH, 15.0, 60.0, points, gfl, GFL_SWEEP_GRID, "gfl-pll"),
        SweepSpec(SweepParameter.V_LOOP_BW, 250.0, 150.0, points, gfm, GFM_SWEEP_GRID, "gfm-voltage-loop"),
        SweepSpec(SweepParameter.I_LOOP_BW, 250.0, 150.0, points, gfl, GFL_SWEEP_GRID, "gfl-current-loop"),
    )


def preset(name: str, points: int = 21) -> SweepSpec:
    """Look up a sweep from :func:`preset_sweeps` by name."""
    for spec in preset_sweeps(points):
        if spec.name == name:
            return spec
    names = ", ".join(s.name for s in preset_sweeps(2))
    raise ValueError(f"unknown sweep preset {name!r}; choose from {names}")


@dataclass(frozen=True, slots=True)
class DualityRow:
    """One row of the grid-strength duality summary."""

    kind: DeviceKind
    condition: str
    grid_scale: float
    verdict: Verdict


def duality_table() -> list[DualityRow]:
    """Verdicts at the strong/weak grid endpoints for both inverter types.

    A zero-impedance grid is reported as unstable for GFM (the interaction
    term is unbounded) and evaluated with a clamped port voltage for GFL.
    """
    rows = []
    cases: list[tuple[DeviceParams, str, float]] = [
        (GfmParams(), "ideal stiff grid", 0.0),
        (GfmParams(), "strong grid", 0.1),
        (GfmParams(), "weak grid", 0.3),
        (GflParams(), "ideal stiff grid", 0.0),
        (GflParams(), "strong grid", 0.4),
        (GflParams(), "weak grid", 0.6),
    ]
    for params, condition, scale in cases:
        try:
            verdict = evaluate_point(params, GridImpedance.from_scale(scale)).verdict
        except IdealStiffGridError:
            verdict = Verdict.UNSTABLE
        rows.append(DualityRow(params.kind, condition, scale, verdict))
    return rows
