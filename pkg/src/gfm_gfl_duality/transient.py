"""Large-signal angle analysis of two synchronizing inverters.

Two inverters tied through a single branch obey a swing interaction of the
form ``J θ̈_Δ = S*_Δ - S_Δ(θ_Δ) - K_D θ̇_Δ``:

- two grid-forming inverters through a reactance ``X``:
  ``S_Δ = (V1 V2 / X) sin θ_Δ`` (active power),
- two grid-following inverters through a conductance ``G``:
  ``S_Δ = (I1 I2 / G) sin θ_Δ`` (reactive power, with
  ``S*_Δ = -(Q1* - Q2*)``),
- a grid-following inverter (1) and a grid-forming inverter (2) through
  ``X``: the lighter inertia dominates. With ``J1 >> J2`` the curve is
  ``V2 I1 cos θ_Δ`` against ``P2*``; with ``J1 << J2`` it is
  ``V2 I1 sin θ_Δ`` against ``-Q1* + X I1²``.

From the curve and the setpoint follow the stable and unstable equilibria,
the maximum decelerating area, and the trajectory of the swing equation.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from gfm_gfl_duality.devices import TWO_PI, DeviceParams, GflParams, GfmParams
from gfm_gfl_duality.dqframe import OMEGA0
from gfm_gfl_duality.errors import NoEquilibriumError

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

DOMINANCE_FACTOR = 3.0
"""Minimum inertia ratio for reducing a mixed pair to one swing equation."""

_DOMINANCE_WARN = 5.0


class CaseKind(Enum):
    """Inverter pairing.

    Attributes
    ----------
    GFM_GFM : str
        Two grid-forming inverters through a reactance.
    GFL_GFL : str
        Two grid-following inverters through a conductance.
    GFM_GFL : str
        Grid-following inverter 1 and grid-forming inverter 2 through a reactance.
    """

    GFM_GFM = "gfm-gfm"
    GFL_GFL = "gfl-gfl"
    GFM_GFL = "gfm-gfl"


class CurveFamily(Enum):
    """Shape of the synchronizing characteristic."""

    SINE = "sine"
    COSINE = "cosine"


class EquilibriumKind(Enum):
    """Stable or unstable equilibrium point."""

    SEP = "SEP"
    UEP = "UEP"


# -------- Case definition ---------------------------------------------------------
@dataclass(frozen=True, slots=True)
class TwoInverterCase:
    """Two inverters synchronizing through one branch.

    Build instances with :meth:`gfm_gfm`, :meth:`gfl_gfl` or :meth:`gfm_gfl`,
    which own the sign conventions of the setpoint difference.

    Parameters
    ----------
    kind : CaseKind
        Pairing.
    mag1, mag2 : float
        Voltage or current magnitudes, pu. For the mixed case ``mag1`` is
        the grid-following current ``I1`` and ``mag2`` the grid-forming
        voltage ``V2``.
    branch : float
        ``X`` (GFM-GFM, mixed) or ``G`` (GFL-GFL), pu; must be positive.
    j1, j2 : float
        Inertias; ``math.inf`` represents a frozen synchronization loop.
    s_ref : float
        Setpoint difference for the same-kind pairings.
    q1_ref, p2_ref : float
        Setpoints of the mixed pairing.
    k_d : float
        Damping coefficient; zero gives the conservative swing equation.
        The constructors derive it, and omitted inertias, from the device
        swing coefficients unless given.
    """

    kind: CaseKind
    mag1: float
    mag2: float
    branch: float
    j1: float
    j2: float
    s_ref: float = 0.0
    q1_ref: float = 0.0
    p2_ref: float = 0.0
    k_d: float = 0.0

    def __post_init__(self) -> None:
        if self.branch <= 0:
            raise ValueError(f"branch parameter must be positive, got {self.branch}")
        if self.j1 <= 0 or self.j2 <= 0:
            raise ValueError(f"inertias must be positive, got j1={self.j1}, j2={self.j2}")
        if math.isinf(self.j1) and math.isinf(self.j2):
            raise ValueError("at most one inertia may be infinite")
        if self.mag1 <= 0 or self.mag2 <= 0:
            raise ValueError(f"magnitudes must be positive, got {self.mag1}, {self.mag2}")
        if self.k_d < 0:
            raise ValueError(f"damping must be non-negative, got {self.k_d}")

    @classmethod
    def gfm_gfm(
        cls,
        v1: float,
        v2: float,
        x: float,
        p1_ref: float,
        p2_ref: float,
        j1: float | None = None,
        j2: float | None = None,
        k_d: float | None = None,
        *,
        dev1: GfmParams | None = None,
        dev2: GfmParams | None = None,
    ) -> TwoInverterCase:
        """Two grid-forming inverters; ``S*_Δ = P1* - P2*``.

        Omitted inertias and damping follow :func:`gfm_swing_coefficients`
        of ``dev1``/``dev2`` (default droop parameters when not given).
        """
        pair = _SwingPair.of(dev1 or GfmParams(), dev2 or GfmParams(), j1, j2)
        case = cls(CaseKind.GFM_GFM, v1, v2, x, pair.j1, pair.j2, s_ref=p1_ref - p2_ref, k_d=k_d or 0.0)
        return case if k_d is not None else pair.damped(case)

    @classmethod
    def gfl_gfl(
        cls,
        i1: float,
        i2: float,
        g: float,
        q1_ref: float,
        q2_ref: float,
        j1: float | None = None,
        j2: float | None = None,
        k_d: float | None = None,
        *,
        dev1: GflParams | None = None,
        dev2: GflParams | None = None,
    ) -> TwoInverterCase:
        """Two grid-following inverters; ``S*_Δ = -(Q1* - Q2*)``.

        Omitted inertias and damping follow :func:`gfl_swing_coefficients`
        of ``dev1``/``dev2`` at ``V_d0 = 1``.
        """
        pair = _SwingPair.of(dev1 or GflParams(), dev2 or GflParams(), j1, j2)
        case = cls(CaseKind.GFL_GFL, i1, i2, g, pair.j1, pair.j2, s_ref=-(q1_ref - q2_ref), k_d=k_d or 0.0)
        return case if k_d is not None else pair.damped(case)

    @classmethod
    def gfm_gfl(
        cls,
        i1: float,
        v2: float,
        x: float,
        q1_ref: float,
        p2_ref: float,
        j1: float | None = None,
        j2: float | None = None,
        k_d: float | None = None,
        *,
        dev1: GflParams | None = None,
        dev2: GfmParams | None = None,
    ) -> TwoInverterCase:
        """Grid-following inverter 1 and grid-forming inverter 2 through ``X``.

        Omitted inertias and damping follow the PLL of ``dev1`` (at
        ``V_d0 = v2``) and the droop controller of ``dev2``.
        """
        pair = _SwingPair.of(dev1 or GflParams(), dev2 or GfmParams(), j1, j2, v_d0=v2)
        case = cls(CaseKind.GFM_GFL, i1, v2, x, pair.j1, pair.j2, q1_ref=q1_ref, p2_ref=p2_ref, k_d=k_d or 0.0)
        return case if k_d is not None else pair.damped(case)

    @property
    def family(self) -> CurveFamily:
        """Governing curve family.

        Raises
        ------
        ValueError
            For a mixed pair whose inertias are within :data:`DOMINANCE_FACTOR`.
        """
        if self.kind is not CaseKind.GFM_GFL:
            return CurveFamily.SINE
        ratio = self.j1 / self.j2
        if ratio >= DOMINANCE_FACTOR:
            if ratio < _DOMINANCE_WARN:
                warnings.warn(f"inertia ratio {ratio:.2f} is close to the dominance threshold", stacklevel=2)
            return CurveFamily.COSINE
        if ratio <= 1 / DOMINANCE_FACTOR:
            if ratio > 1 / _DOMINANCE_WARN:
                warnings.warn(f"inertia ratio {ratio:.2f} is close to the dominance threshold", stacklevel=2)
            return CurveFamily.SINE
        raise ValueError(
            f"inertias j1={self.j1:g} and j2={self.j2:g} are within a factor {DOMINANCE_FACTOR:g}; "
            "the single-equation reduction does not apply, integrate both swing equations instead"
        )

    @property
    def inertia(self) -> float:
        """Effective inertia of the reduced swing equation."""
        if self.kind is CaseKind.GFM_GFL:
            return self.j2 if self.family is CurveFamily.COSINE else self.j1
        if math.isinf(self.j1):
            return 2 * self.j2
        if math.isinf(self.j2):
            return 2 * self.j1
        return 2 * self.j1 * self.j2 / (self.j1 + self.j2)

    @property
    def setpoint(self) -> float:
        """``S*_Δ`` of the governing equation."""
        if self.kind is not CaseKind.GFM_GFL:
            return self.s_ref
        if self.family is CurveFamily.COSINE:
            return self.p2_ref
        return -self.q1_ref + self.branch * self.mag1**2

    @property
    def amplitude(self) -> float:
        """Peak of the synchronizing characteristic."""
        if self.kind is CaseKind.GFM_GFL:
            return self.mag2 * self.mag1
        return self.mag1 * self.mag2 / self.branch

    def with_inertias(self, j1: float | None = None, j2: float | None = None) -> TwoInverterCase:
        """Return a copy with one or both inertias replaced."""
        return replace(self, j1=self.j1 if j1 is None else j1, j2=self.j2 if j2 is None else j2)


def gfm_swing_coefficients(params: GfmParams, omega0: float = OMEGA0) -> tuple[float, float]:
    """Inertia ``T_f/(m Ω0)`` and damping ``1/(m Ω0)`` of a droop controller."""
    mw = params.m * omega0
    return params.t_f / mw, 1.0 / mw


def gfl_swing_coefficients(params: GflParams, v_d0: float = 1.0) -> tuple[float, float]:
    """Inertia ``1/k_i`` and damping ``k_p V_d0/k_i`` of a PLL; ``k_i = 0`` gives infinite inertia."""
    if params.k_i == 0:
        return math.inf, math.inf
    return 1.0 / params.k_i, params.k_p * v_d0 / params.k_i


@dataclass(frozen=True, slots=True)
class _SwingPair:
    """Inertias and damping rates ``K_D/J`` of two synchronization loops."""

    j1: float
    j2: float
    rate1: float
    rate2: float

    @classmethod
    def of(
        cls, dev1: DeviceParams, dev2: DeviceParams, j1: float | None, j2: float | None, v_d0: float = 1.0
    ) -> _SwingPair:
        """Coefficients of ``dev1``/``dev2``; explicit inertias take precedence."""
        c1, c2 = _swing_coefficients(dev1, v_d0), _swing_coefficients(dev2, v_d0)
        return cls(
            c1[0] if j1 is None else j1,
            c2[0] if j2 is None else j2,
            _damping_rate(dev1, *c1, v_d0),
            _damping_rate(dev2, *c2, v_d0),
        )

    def damped(self, case: TwoInverterCase) -> TwoInverterCase:
        """``case`` with ``K_D`` scaled to its effective inertia."""
        if case.kind is CaseKind.GFM_GFL:
            # the lighter loop governs the reduced equation
            k_d = case.j1 * self.rate1 if case.j1 <= case.j2 else case.j2 * self.rate2
        else:
            rates = [r for j, r in ((case.j1, self.rate1), (case.j2, self.rate2)) if math.isfinite(j)]
            k_d = case.inertia * sum(rates) / len(rates)
        logger.debug("%s damping K_D=%.6g from device coefficients", case.kind.value, k_d)
        return replace(case, k_d=k_d)


def _swing_coefficients(params: DeviceParams, v_d0: float) -> tuple[float, float]:
    if isinstance(params, GfmParams):
        return gfm_swing_coefficients(params)
    return gfl_swing_coefficients(params, v_d0)


def _damping_rate(params: DeviceParams, j: float, k_d: float, v_d0: float) -> float:
    if math.isfinite(j):
        return k_d / j
    # frozen PLL integrator: K_D/J stays k_p V_d0
    return params.k_p * v_d0


# -------- Angle curves --------------------------------------------------------------
@dataclass(frozen=True, slots=True, eq=False)
class AngleCurve:
    """Sampled synchronizing characteristic ``S_Δ(θ_Δ)``."""

    family: CurveFamily
    amplitude: float
    theta: FloatArray = field(repr=False)
    values: FloatArray = field(repr=False)

    def __call__(self, theta: float | FloatArray) -> float | FloatArray:
        """Evaluate the characteristic at ``theta`` (rad)."""
        if self.family is CurveFamily.SINE:
            return self.amplitude * np.sin(theta)
        return self.amplitude * np.cos(theta)

    def slope(self, theta: float | FloatArray) -> float | FloatArray:
        """``dS_Δ/dθ_Δ``."""
        if self.family is CurveFamily.SINE:
            return self.amplitude * np.cos(theta)
        return -self.amplitude * np.sin(theta)

    def integral(self, theta: float | FloatArray) -> float | FloatArray:
        """Antiderivative of the characteristic (zero constant)."""
        if self.family is CurveFamily.SINE:
            return -self.amplitude * np.cos(theta)
        return self.amplitude * np.sin(theta)


def angle_curve(case: TwoInverterCase, points: int = 721) -> AngleCurve:
    """Synchronizing characteristic of ``case`` sampled on ``(-π, π]``.

    Raises
    ------
    ValueError
        For a mixed pair without a dominant inertia.
    """
    if points < 2:
        raise ValueError(f"need at least 2 curve samples, got {points}")
    theta = np.linspace(-np.pi, np.pi, points + 1)[1:]
    family = case.family
    curve = AngleCurve(family, case.amplitude, theta, np.zeros(0))
    return replace(curve, values=np.asarray(curve(theta), dtype=float))


# -------- Equilibria and decelerating area ------------------------------------------
@dataclass(frozen=True, slots=True)
class Equilibrium:
    """An equilibrium angle (rad) and its class."""

    theta: float
    kind: EquilibriumKind

    @property
    def degrees(self) -> float:
        """Angle in degrees."""
        return math.degrees(self.theta)


@dataclass(frozen=True, slots=True)
class Equilibria:
    """Solutions of ``S_Δ(θ) = S*_Δ`` on ``(-π, π]``.

    ``feasible`` is ``False`` (and ``points`` empty) when the setpoint
    exceeds the curve amplitude.
    """

    points: tuple[Equilibrium, ...]
    feasible: bool

    def first(self, kind: EquilibriumKind) -> Equilibrium:
        """First equilibrium of class ``kind``.

        Raises
        ------
        NoEquilibriumError
            If there is none.
        """
        for p in self.points:
            if p.kind is kind:
                return p
        raise NoEquilibriumError(f"no {kind.value} exists")


def _wrap(theta: float) -> float:
    """Map an angle to ``(-π, π]``."""
    w = math.remainder(theta, TWO_PI)
    return math.pi if w == -math.pi else w


def equilibria(curve: AngleCurve, s_ref: float) -> Equilibria:
    """Equilibria of the swing equation on ``curve`` at setpoint ``s_ref``.

    A point is stable where the characteristic rises (``dS_Δ/dθ > 0``).
    Tangency at the curve peak yields a single unstable point.
    """
    amp = curve.amplitude
    if abs(s_ref) > amp:
        return Equilibria((), False)
    ratio = s_ref / amp
    if curve.family is CurveFamily.SINE:
        base = math.asin(ratio)
        roots = [base, math.pi - base]
    else:
        base = math.acos(ratio)
        roots = [-base, base]
    uniq = sorted({round(_wrap(r), 15) for r in roots})
    pts = []
    for r in uniq:
        kind = EquilibriumKind.SEP if float(curve.slope(r)) > 1e-12 else EquilibriumKind.UEP
        pts.append(Equilibrium(r, kind))
    pts.sort(key=lambda p: p.kind is not EquilibriumKind.SEP)
    return Equilibria(tuple(pts), True)


def max_decel_area(curve: AngleCurve, s_ref: float) -> float:
    """Maximum decelerating area between the SEP and the UEP ahead of it, pu·rad.

    Raises
    ------
    NoEquilibriumError
        If the setpoint admits no SEP/UEP pair.
    """
    eq = equilibria(curve, s_ref)
    if not eq.feasible:
        raise NoEquilibriumError(f"setpoint {s_ref:g} exceeds the curve amplitude {curve.amplitude:g}")
    sep = eq.first(EquilibriumKind.SEP).theta
    uep = eq.first(EquilibriumKind.UEP).theta
    while uep <= sep:
        uep += TWO_PI
    area = float(curve.integral(uep)) - float(curve.integral(sep)) - s_ref * (uep - sep)
    return area


# -------- Swing equation ------------------------------------------------------------
@dataclass(frozen=True, slots=True, eq=False)
class SwingTrajectory:
    """Integrated swing equation.

    ``diverged`` marks a run stopped because ``|θ̇|`` exceeded its bound.
    """

    t: FloatArray
    theta: FloatArray
    rate: FloatArray
    energy: FloatArray
    diverged: bool = False

    @property
    def final_degrees(self) -> float:
        """Final angle wrapped to ``(-180°, 180°]``."""
        return math.degrees(_wrap(float(self.theta[-1])))


def swing_energy(curve: AngleCurve, inertia: float, s_ref: float, theta: FloatArray, rate: FloatArray) -> FloatArray:
    """``½ J θ̇² - ∫(S* - S) dθ`` (constant along undamped trajectories)."""
    return 0.5 * inertia * rate**2 - s_ref * theta + np.asarray(curve.integral(theta))


def _integrate(
    curve: AngleCurve,
    inertia: float,
    k_d: float,
    s_ref: float,
    theta0: float,
    rate0: float,
    duration: float,
    dt: float,
    max_rate: float,
) -> tuple[FloatArray, FloatArray, bool]:
    steps = int(round(duration / dt))
    th = np.empty(steps + 1)
    w = np.empty(steps + 1)
    th[0], w[0] = theta0, rate0
    amp = curve.amplitude
    fn = np.sin if curve.family is CurveFamily.SINE else np.cos

    def accel(x: float, v: float) -> float:
        return (s_ref - amp * float(fn(x)) - k_d * v) / inertia

    x, v = theta0, rate0
    for k in range(steps):
        a1, b1 = v, accel(x, v)
        a2, b2 = v + 0.5 * dt * b1, accel(x + 0.5 * dt * a1, v + 0.5 * dt * b1)
        a3, b3 = v + 0.5 * dt * b2, accel(x + 0.5 * dt * a2, v + 0.5 * dt * b2)
        a4, b4 = v + dt * b3, accel(x + dt * a3, v + dt * b3)
        x += dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        v += dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
        th[k + 1], w[k + 1] = x, v
        if not math.isfinite(v) or abs(v) > max_rate:
            logger.warning("swing trajectory exceeded |rate| %.3g rad/s at t=%.4f s", max_rate, (k + 1) * dt)
            return th[: k + 2], w[: k + 2], True
    return th, w, False


def swing_ode(
    case: TwoInverterCase,
    theta0: float,
    rate0: float = 0.0,
    duration: float = 10.0,
    dt: float = 1e-3,
    max_rate: float = 1e3,
) -> SwingTrajectory:
    """Integrate ``J θ̈ = S* - S(θ) - K_D θ̇`` with fixed-step RK4.

    Parameters
    ----------
    case : TwoInverterCase
        Pairing, setpoint, inertia and damping.
    theta0, rate0 : float
        Initial angle (rad) and rate (rad/s).
    duration, dt : float
        Simulated time and step, s.
    max_rate : float
        Bound on ``|θ̇|`` beyond which the run stops as diverged.
    """
    if dt <= 0 or duration < dt:
        raise ValueError(f"need 0 < dt <= duration, got dt={dt}, duration={duration}")
    curve = angle_curve(case)
    j, s_ref = case.inertia, case.setpoint
    th, w, div = _integrate(curve, j, case.k_d, s_ref, theta0, rate0, duration, dt, max_rate)
    t = dt * np.arange(th.size)
    return SwingTrajectory(t, th, w, swing_energy(curve, j, s_ref, th, w), div)


def small_signal_frequency(case: TwoInverterCase) -> float:
    """Undamped oscillation frequency (Hz) about the SEP: ``√(S'(θ_SEP)/J)/2π``.

    Raises
    ------
    NoEquilibriumError
        If no SEP exists.
    """
    curve = angle_curve(case)
    eq = equilibria(curve, case.setpoint)
    if not eq.feasible:
        raise NoEquilibriumError(f"setpoint {case.setpoint:g} exceeds the curve amplitude {curve.amplitude:g}")
    sep = eq.first(EquilibriumKind.SEP)
    return math.sqrt(float(curve.slope(sep.theta)) / case.inertia) / TWO_PI


# -------- Inertia swap ---------------------------------------------------------------
@dataclass(frozen=True, slots=True, eq=False)
class InertiaSwap:
    """Mixed-pair run where the grid-following inertia becomes infinite mid-run.

    ``sep_before`` and ``sep_after`` are the stable points of the sine and
    cosine characteristics.
    """

    trajectory: SwingTrajectory
    t_swap: float
    sep_before: Equilibrium
    sep_after: Equilibrium


def inertia_swap_case() -> TwoInverterCase:
    """Mixed pair with ``J1 << J2``; SEP at 30° before the swap and -60° after."""
    return TwoInverterCase.gfm_gfl(i1=0.5, v2=1.0, x=0.2, q1_ref=-0.2, p2_ref=0.25, j1=0.02, j2=0.2, k_d=0.5)


def inertia_swap(
    case: TwoInverterCase | None = None, t_swap: float = 1.0, duration: float = 10.0, dt: float = 1e-3
) -> InertiaSwap:
    """Start at the SEP of ``case`` and set ``J1 → ∞`` at ``t_swap``.

    The trajectory leaves the sine-curve SEP and settles at the stable point
    of the cosine characteristic.
    """
    case = case or inertia_swap_case()
    if case.kind is not CaseKind.GFM_GFL:
        raise ValueError("inertia swap applies to the mixed pairing")
    before = equilibria(angle_curve(case), case.setpoint).first(EquilibriumKind.SEP)
    swapped = case.with_inertias(j1=math.inf)
    after = equilibria(angle_curve(swapped), swapped.setpoint).first(EquilibriumKind.SEP)
    first = swing_ode(case, before.theta, 0.0, t_swap, dt)
    second = swing_ode(swapped, float(first.theta[-1]), float(first.rate[-1]), duration - t_swap, dt)
    traj = SwingTrajectory(
        np.concatenate([first.t, t_swap + second.t[1:]]),
        np.concatenate([first.theta, second.theta[1:]]),
        np.concatenate([first.rate, second.rate[1:]]),
        np.concatenate([first.energy, second.energy[1:]]),
        first.diverged or second.diverged,
    )
    logger.debug("inertia swap: SEP %.1f deg -> %.1f deg", before.degrees, after.degrees)
    return InertiaSwap(traj, t_swap, before, after)
