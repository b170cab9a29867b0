"""Averaged nonlinear time-domain simulation of inverter networks.

The simulator integrates the same model that :mod:`gfm_gfl_duality.network`
linearizes: inverter control and filter states, line and load currents, and
bus capacitor voltages, all in a frame rotating at the equilibrium frequency.
Integration is fixed-step RK4. Events (parameter or reference steps, faults,
line switching and line impedance changes) are applied at step boundaries.

A run that blows up is not an error: the result is truncated at the last
finite sample and flagged, since losing synchronism is an expected outcome of
several studies.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, fields, replace
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from gfm_gfl_duality.devices import TWO_PI, DeviceKind, DeviceModel, DeviceParams, GflParams, GfmParams
from gfm_gfl_duality.dqframe import OMEGA0
from gfm_gfl_duality.network import (
    FaultBranch,
    NetworkLayout,
    NetworkTopology,
    SteadyState,
    build_layout,
    device_owner,
    resolve_devices,
    solve_steady_state,
)
from gfm_gfl_duality.statespace import numeric_jacobian

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

DIVERGENCE_LIMIT = 1e6
"""Any state magnitude above this marks the run as diverged."""

_REFERENCE_NAMES = frozenset({"p_ref", "v_ref", "i_d_ref", "i_q_ref"})


# -------- Configuration and events --------------------------------------------
@dataclass(frozen=True, slots=True)
class SimConfig:
    """Fixed-step integration settings.

    Parameters
    ----------
    duration : float
        Simulated time, s.
    dt : float, default 2e-5
        RK4 step, s.
    decimation : int, default 50
        Record every ``decimation``-th step.
    """

    duration: float = 1.0
    dt: float = 2e-5
    decimation: int = 50

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.duration < self.dt:
            raise ValueError(f"duration ({self.duration}) must be at least dt ({self.dt})")
        if self.decimation < 1:
            raise ValueError(f"decimation must be >= 1, got {self.decimation}")

    @property
    def steps(self) -> int:
        """Number of integration steps."""
        return int(round(self.duration / self.dt))


class EventAction(Enum):
    """What an :class:`Event` does.

    Attributes
    ----------
    SET_PARAM : str
        Replace one device parameter.
    STEP_REF : str
        Replace one device reference (``p_ref``, ``v_ref``, ``i_d_ref``, ``i_q_ref``).
    FAULT : str
        Close an RL fault branch at a bus.
    CLEAR_FAULT : str
        Open every fault branch at a bus.
    TRIP_LINE : str
        Open a line.
    CLOSE_LINE : str
        Re-close a tripped line.
    SCALE_LINE : str
        Set a line's R and X to ``value`` times their initial values.
    SET_LINE : str
        Set a line's R and X to absolute values.
    """

    SET_PARAM = "set_param"
    STEP_REF = "step_ref"
    FAULT = "fault"
    CLEAR_FAULT = "clear_fault"
    TRIP_LINE = "trip_line"
    CLOSE_LINE = "close_line"
    SCALE_LINE = "scale_line"
    SET_LINE = "set_line"


_LINE_ACTIONS = frozenset(
    {EventAction.TRIP_LINE, EventAction.CLOSE_LINE, EventAction.SCALE_LINE, EventAction.SET_LINE}
)


@dataclass(frozen=True, slots=True)
class Event:
    """A scheduled change to the simulated system.

    Use the classmethod constructors rather than filling fields by hand.
    ``bus`` addresses devices and faults, ``line`` addresses lines by their
    end buses.
    """

    time: float
    action: EventAction
    bus: int | None = None
    line: tuple[int, int] | None = None
    name: str = ""
    value: float = 0.0
    r: float = 1e-3
    x: float = 1e-2
    clear_time: float | None = None

    def __post_init__(self) -> None:
        if self.time < 0:
            raise ValueError(f"event time must be non-negative, got {self.time}")
        if self.action in _LINE_ACTIONS:
            if self.line is None:
                raise ValueError(f"{self.action.value} needs a line")
        elif self.bus is None:
            raise ValueError(f"{self.action.value} needs a bus")
        if self.action is EventAction.STEP_REF and self.name not in _REFERENCE_NAMES:
            raise ValueError(f"step_ref applies to {sorted(_REFERENCE_NAMES)}, got {self.name!r}")
        if self.action is EventAction.SCALE_LINE and self.value <= 0:
            raise ValueError(f"line scale factor must be positive, got {self.value}")
        if self.action in (EventAction.FAULT, EventAction.SET_LINE) and (self.r < 0 or self.x <= 0):
            raise ValueError(f"{self.action.value}: need r >= 0 and x > 0, got r={self.r}, x={self.x}")
        if self.clear_time is not None and self.clear_time <= self.time:
            raise ValueError(f"fault clear_time {self.clear_time} must follow its start {self.time}")

    @classmethod
    def set_param(cls, time: float, bus: int, name: str, value: float) -> Event:
        """Set parameter ``name`` of the device at ``bus``."""
        return cls(time, EventAction.SET_PARAM, bus=bus, name=name, value=value)

    @classmethod
    def step_ref(cls, time: float, bus: int, name: str, value: float) -> Event:
        """Step reference ``name`` of the device at ``bus``."""
        return cls(time, EventAction.STEP_REF, bus=bus, name=name, value=value)

    @classmethod
    def fault(cls, time: float, bus: int, r: float = 1e-3, x: float = 1e-2, clear_time: float | None = None) -> Event:
        """RL fault to ground at ``bus``; cleared at ``clear_time`` if given."""
        return cls(time, EventAction.FAULT, bus=bus, r=r, x=x, clear_time=clear_time)

    @classmethod
    def clear_fault(cls, time: float, bus: int) -> Event:
        """Clear any fault at ``bus``."""
        return cls(time, EventAction.CLEAR_FAULT, bus=bus)

    @classmethod
    def trip_line(cls, time: float, a: int, b: int) -> Event:
        """Open the line between ``a`` and ``b``."""
        return cls(time, EventAction.TRIP_LINE, line=(a, b))

    @classmethod
    def close_line(cls, time: float, a: int, b: int) -> Event:
        """Re-close the line between ``a`` and ``b``."""
        return cls(time, EventAction.CLOSE_LINE, line=(a, b))

    @classmethod
    def scale_line(cls, time: float, a: int, b: int, factor: float) -> Event:
        """Scale the initial impedance of the line between ``a`` and ``b``."""
        return cls(time, EventAction.SCALE_LINE, line=(a, b), value=factor)

    @classmethod
    def set_line(cls, time: float, a: int, b: int, r: float, x: float) -> Event:
        """Set the impedance of the line between ``a`` and ``b``."""
        return cls(time, EventAction.SET_LINE, line=(a, b), r=r, x=x)

    def describe(self) -> str:
        """Short human-readable form used in logs and manifests."""
        target = f"bus {self.bus}" if self.line is None else f"line {self.line[0]}-{self.line[1]}"
        detail = f" {self.name}={self.value:g}" if self.name else ""
        if self.action is EventAction.SCALE_LINE:
            detail = f" x{self.value:g}"
        return f"t={self.time:g}s {self.action.value} {target}{detail}"


def fault_case(
    bus: int,
    t_start: float,
    periods: int = 3,
    r: float = 1e-3,
    x: float = 1e-2,
    frequency_hz: float = OMEGA0 / TWO_PI,
) -> tuple[Event, Event]:
    """Fault at ``bus`` from ``t_start``, cleared ``periods`` fundamental cycles later.

    The fault is a series RL branch to ground, by default ``r = 1e-3`` and
    ``x = 1e-2`` pu. With ``periods=0`` both events fall on the same step
    and cancel.
    """
    if periods < 0:
        raise ValueError(f"periods must be non-negative, got {periods}")
    return Event.fault(t_start, bus, r, x), Event.clear_fault(t_start + periods / frequency_hz, bus)


def expand_events(events: Iterable[Event]) -> list[Event]:
    """Split faults carrying ``clear_time`` into fault/clear pairs and sort by time (stable)."""
    out: list[Event] = []
    for ev in events:
        if ev.action is EventAction.FAULT and ev.clear_time is not None:
            out.append(Event.fault(ev.time, ev.bus, ev.r, ev.x))  # type: ignore[arg-type]
            out.append(Event.clear_fault(ev.clear_time, ev.bus))  # type: ignore[arg-type]
        else:
            out.append(ev)
    return sorted(out, key=lambda e: e.time)


# -------- Traces ----------------------------------------------------------------
@dataclass(frozen=True, slots=True, eq=False)
class SimTrace:
    """Recorded signals of one device, in its own dq frame.

    Currents are the filter (inverter-side) currents, load convention.
    """

    bus: int
    kind: DeviceKind
    t: FloatArray
    omega_hz: FloatArray
    theta: FloatArray
    v_d: FloatArray
    v_q: FloatArray
    i_d: FloatArray
    i_q: FloatArray

    @property
    def p(self) -> FloatArray:
        """Active power ``v_d i_d + v_q i_q``."""
        return self.v_d * self.i_d + self.v_q * self.i_q

    @property
    def q(self) -> FloatArray:
        """Reactive power ``v_q i_d - v_d i_q``."""
        return self.v_q * self.i_d - self.v_d * self.i_q

    def columns(self) -> dict[str, FloatArray]:
        """Named columns in output order."""
        return {
            "omega_hz": self.omega_hz,
            "theta": self.theta,
            "v_d": self.v_d,
            "v_q": self.v_q,
            "i_d": self.i_d,
            "i_q": self.i_q,
            "p": self.p,
            "q": self.q,
        }


@dataclass(frozen=True, slots=True, eq=False)
class SimResult:
    """Outcome of :func:`simulate`.

    Parameters
    ----------
    t : numpy.ndarray
        Sample times.
    traces : dict of int to SimTrace
        Per-device traces keyed by bus.
    states : numpy.ndarray
        ``(samples, n)`` recorded state vectors.
    omega_s : float
        Frame frequency, rad/s.
    diverged : bool
        ``True`` if integration stopped on non-finite or runaway states.
    events : tuple of str
        Applied events, in order.
    """

    t: FloatArray
    traces: dict[int, SimTrace]
    states: FloatArray = field(repr=False)
    omega_s: float
    diverged: bool = False
    events: tuple[str, ...] = ()

    @property
    def t_end(self) -> float:
        """Time of the last sample."""
        return float(self.t[-1])

    def trace(self, bus: int) -> SimTrace:
        """Trace of the device at ``bus``."""
        return self.traces[bus]

    def frequency_deviation_hz(self, bus: int) -> FloatArray:
        """Device frequency minus the frame frequency, Hz."""
        return self.traces[bus].omega_hz - self.omega_s / TWO_PI


def oscillation_frequency(t: FloatArray, y: FloatArray) -> float:
    """Frequency (Hz) of an oscillating signal from its mean crossings.

    Returns 0.0 when fewer than two crossings are found.
    """
    y = np.asarray(y, dtype=float) - float(np.mean(y))
    sign = np.signbit(y)
    idx = np.flatnonzero(sign[1:] != sign[:-1])
    if idx.size < 2:
        return 0.0
    # linear interpolation of each crossing instant
    tc = t[idx] - y[idx] * (t[idx + 1] - t[idx]) / (y[idx + 1] - y[idx])
    return float((idx.size - 1) / (2.0 * (tc[-1] - tc[0])))


# -------- Right-hand side -------------------------------------------------------
def _pairs(x: FloatArray, off: NDArray[np.int_]) -> NDArray[np.complex128]:
    return x[off] + 1j * x[off + 1]


def _put(dx: FloatArray, off: NDArray[np.int_], z: NDArray[np.complex128]) -> None:
    dx[off] = z.real
    dx[off + 1] = z.imag


@dataclass
class _GfmGroup:
    buses: list[int]
    pos: NDArray[np.int_]
    off: NDArray[np.int_]
    m: FloatArray
    t_f: FloatArray
    p_ref: FloatArray
    v_ref: FloatArray
    ind: FloatArray
    cap: FloatArray
    k_pc: FloatArray
    k_ic: FloatArray
    k_pv: FloatArray
    k_iv: FloatArray

    @classmethod
    def build(cls, items: Sequence[tuple[int, int, int, GfmParams]]) -> _GfmGroup:
        def arr(attr: str) -> FloatArray:
            return np.array([getattr(p, attr) for *_, p in items], dtype=float)

        return cls(
            [b for b, *_ in items],
            np.array([k for _, k, _, _ in items], dtype=int),
            np.array([o for _, _, o, _ in items], dtype=int),
            arr("m"),
            arr("t_f"),
            arr("p_ref"),
            arr("v_ref"),
            arr("inductance"),
            arr("capacitance"),
            arr("k_pc"),
            arr("k_ic"),
            arr("k_pv"),
            arr("k_iv"),
        )


@dataclass
class _GflGroup:
    buses: list[int]
    pos: NDArray[np.int_]
    off: NDArray[np.int_]
    k_p: FloatArray
    k_i: FloatArray
    i_ref: NDArray[np.complex128]
    ind: FloatArray
    cap: FloatArray
    k_pi: FloatArray
    k_ii: FloatArray

    @classmethod
    def build(cls, items: Sequence[tuple[int, int, int, GflParams]]) -> _GflGroup:
        def arr(attr: str) -> FloatArray:
            return np.array([getattr(p, attr) for *_, p in items], dtype=float)

        return cls(
            [b for b, *_ in items],
            np.array([k for _, k, _, _ in items], dtype=int),
            np.array([o for _, _, o, _ in items], dtype=int),
            arr("k_p"),
            arr("k_i"),
            np.array([p.current_ref for *_, p in items], dtype=complex),
            arr("inductance"),
            arr("capacitance"),
            arr("k_pi"),
            arr("k_ii"),
        )


class Plant:
    """Compiled nonlinear right-hand side of a network.

    Holds the switchable parts of the model (line status and impedance,
    fault status, device parameters) so events can modify them in place.

    Parameters
    ----------
    top : NetworkTopology
        Network including every fault branch that events may close.
    omega_s : float
        Frame frequency, rad/s.
    """

    def __init__(self, top: NetworkTopology, omega_s: float) -> None:
        self.top = top
        self.omega_s = omega_s
        self.layout: NetworkLayout = build_layout(top)
        ids = top.bus_ids
        pos = {b: k for k, b in enumerate(ids)}
        self._pos = pos
        self.n_bus = len(ids)

        v_items = [(pos[b], off) for b in ids if (off := self.layout.voltage_offset(top, b)) is not None]
        self._v_pos = np.array([k for k, _ in v_items], dtype=int)
        self._v_off = np.array([o for _, o in v_items], dtype=int)
        self._src_pos = np.array([pos[b] for b in top.sources], dtype=int)
        self._src_val = np.array(list(top.sources.values()), dtype=complex)

        w0 = top.omega0
        self._ln_from = np.array([pos[ln.from_bus] for ln in top.lines], dtype=int)
        self._ln_to = np.array([pos[ln.to_bus] for ln in top.lines], dtype=int)
        self._ln_off = np.array(self.layout.line, dtype=int)
        self._ln_r0 = np.array([ln.r for ln in top.lines], dtype=float)
        self._ln_l0 = np.array([ln.x / w0 for ln in top.lines], dtype=float)
        self.line_r = self._ln_r0.copy()
        self.line_l = self._ln_l0.copy()
        self.line_in = np.ones(len(top.lines))
        self._incidence = np.zeros((self.n_bus, len(top.lines)))
        self._incidence[self._ln_from, np.arange(len(top.lines))] = -1.0
        self._incidence[self._ln_to, np.arange(len(top.lines))] = 1.0

        rl = [(b.id, off) for b in top.buses if (off := self.layout.load.get(b.id)) is not None]
        self._ld_pos = np.array([pos[b] for b, _ in rl], dtype=int)
        self._ld_off = np.array([o for _, o in rl], dtype=int)
        self._ld_r = np.array([top.bus(b).load_r or 0.0 for b, _ in rl], dtype=float)
        self._ld_l = np.array([top.bus(b).load_x / w0 for b, _ in rl], dtype=float)
        res = [b for b in top.buses if b.has_load and b.load_x == 0]
        self._rs_pos = np.array([pos[b.id] for b in res], dtype=int)
        self._rs_g = np.array([1.0 / (b.load_r or 1.0) for b in res], dtype=float)

        self._cap_pos = np.array([pos[b] for b in self.layout.cap], dtype=int)
        self._cap_off = np.array(list(self.layout.cap.values()), dtype=int)
        self._cap_c = np.array([top.shunt_capacitance_b(b) / w0 for b in self.layout.cap], dtype=float)

        self._ft_pos = np.array([pos[f.bus] for f in top.faults], dtype=int)
        self._ft_off = np.array(self.layout.fault, dtype=int)
        self._ft_r = np.array([f.r for f in top.faults], dtype=float)
        self._ft_l = np.array([f.x / w0 for f in top.faults], dtype=float)
        self.fault_on = np.zeros(len(top.faults))

        self.devices: dict[int, DeviceParams] = dict(top.devices)
        self.device_buses = [b for b in ids if b in self.devices]
        self.compile_devices()

    def compile_devices(self) -> None:
        """Rebuild the grouped device arrays from :attr:`devices`."""
        gfm, gfl = [], []
        for b in self.device_buses:
            p = self.devices[b]
            item = (b, self._pos[b], self.layout.device[b], p)
            (gfm if isinstance(p, GfmParams) else gfl).append(item)
        self._gfm = _GfmGroup.build(gfm)  # type: ignore[arg-type]
        self._gfl = _GflGroup.build(gfl)  # type: ignore[arg-type]
        self._dev_index = {b: k for k, b in enumerate(self.device_buses)}

    def _bus_voltages(self, x: FloatArray) -> NDArray[np.complex128]:
        v = np.zeros(self.n_bus, dtype=complex)
        v[self._v_pos] = _pairs(x, self._v_off)
        v[self._src_pos] = self._src_val
        return v

    def rhs(self, x: FloatArray) -> FloatArray:
        """State derivative at ``x``."""
        ws = self.omega_s
        dx = np.zeros_like(x)
        v = self._bus_voltages(x)
        inj = np.zeros(self.n_bus, dtype=complex)

        if self._ln_off.size:
            i = _pairs(x, self._ln_off)
            di = (v[self._ln_from] - v[self._ln_to] - self.line_r * i - 1j * ws * self.line_l * i) / self.line_l
            _put(dx, self._ln_off, di * self.line_in)
            inj += self._incidence @ i
        if self._ld_off.size:
            i = _pairs(x, self._ld_off)
            vl = v[self._ld_pos]
            _put(dx, self._ld_off, (vl - self._ld_r * i - 1j * ws * self._ld_l * i) / self._ld_l)
            inj[self._ld_pos] -= i
        if self._rs_pos.size:
            inj[self._rs_pos] -= self._rs_g * v[self._rs_pos]
        if self._ft_off.size:
            i = _pairs(x, self._ft_off)
            vf = v[self._ft_pos]
            _put(dx, self._ft_off, self.fault_on * (vf - self._ft_r * i - 1j * ws * self._ft_l * i) / self._ft_l)
            np.subtract.at(inj, self._ft_pos, i)
        if self._cap_off.size:
            vc = v[self._cap_pos]
            _put(dx, self._cap_off, (inj[self._cap_pos] - 1j * ws * self._cap_c * vc) / self._cap_c)

        g = self._gfm
        if g.off.size:
            o = g.off
            th, p_f = x[o], x[o + 1]
            xi_v, xi_c = _pairs(x, o + 2), _pairs(x, o + 4)
            i_f, vv = _pairs(x, o + 6), _pairs(x, o + 8)
            ip = inj[g.pos]
            rot = np.exp(-1j * th)
            err_v = g.v_ref - vv * rot
            err_c = ip * rot - (g.k_pv * err_v + xi_v) - i_f * rot
            e = -(g.k_pc * err_c + xi_c) / rot
            dx[o] = OMEGA0 * g.m * (p_f - g.p_ref) + OMEGA0 - ws
            dx[o + 1] = ((vv * np.conj(ip)).real - p_f) / g.t_f
            _put(dx, o + 2, g.k_iv * err_v)
            _put(dx, o + 4, g.k_ic * err_c)
            _put(dx, o + 6, (vv - e - 1j * ws * g.ind * i_f) / g.ind)
            _put(dx, o + 8, (ip - i_f - 1j * ws * g.cap * vv) / g.cap)

        h = self._gfl
        if h.off.size:
            o = h.off
            th, xi_pll = x[o], x[o + 1]
            xi_i, i_f, vv = _pairs(x, o + 2), _pairs(x, o + 4), _pairs(x, o + 6)
            ip = inj[h.pos]
            rot = np.exp(-1j * th)
            v_q = (vv * rot).imag
            err = h.i_ref - i_f * rot
            e = -(h.k_pi * err + xi_i) / rot
            dx[o] = OMEGA0 + h.k_p * v_q + xi_pll - ws
            dx[o + 1] = h.k_i * v_q
            _put(dx, o + 2, h.k_ii * err)
            _put(dx, o + 4, (vv - e - 1j * ws * h.ind * i_f) / h.ind)
            _put(dx, o + 6, (ip - i_f - 1j * ws * h.cap * vv) / h.cap)
        return dx

    def frequencies(self, x: FloatArray) -> FloatArray:
        """Device angular frequencies (rad/s), in :attr:`device_buses` order."""
        out = np.zeros(len(self.device_buses))
        g, h = self._gfm, self._gfl
        if g.off.size:
            idx = [self._dev_index[b] for b in g.buses]
            out[idx] = OMEGA0 + OMEGA0 * g.m * (x[g.off + 1] - g.p_ref)
        if h.off.size:
            idx = [self._dev_index[b] for b in h.buses]
            v_q = (_pairs(x, h.off + 6) * np.exp(-1j * x[h.off])).imag
            out[idx] = OMEGA0 + h.k_p * v_q + x[h.off + 1]
        return out

    def jacobian(self, x: FloatArray) -> FloatArray:
        """Central-difference Jacobian of :meth:`rhs`."""
        return numeric_jacobian(self.rhs, x)

    # -------- events --------------------------------------------------------
    def apply(self, event: Event, x: FloatArray) -> FloatArray:
        """Apply ``event`` and return the (possibly modified) state."""
        act = event.action
        x = x.copy()
        if act in (EventAction.SET_PARAM, EventAction.STEP_REF):
            bus = int(event.bus)  # type: ignore[arg-type]
            params = self.devices[bus]
            self.devices[bus] = params.with_overrides(**{event.name: event.value})
            self.compile_devices()
        elif act is EventAction.FAULT:
            k = self._fault_index(event)
            self.fault_on[k] = 1.0
        elif act is EventAction.CLEAR_FAULT:
            for k, f in enumerate(self.top.faults):
                if f.bus == event.bus:
                    self.fault_on[k] = 0.0
                    x[self.layout.fault[k] : self.layout.fault[k] + 2] = 0.0
        else:
            a, b = event.line  # type: ignore[misc]
            k = self.top.line_index(a, b)
            if act is EventAction.TRIP_LINE:
                self.line_in[k] = 0.0
                x[self.layout.line[k] : self.layout.line[k] + 2] = 0.0
            elif act is EventAction.CLOSE_LINE:
                self.line_in[k] = 1.0
            elif act is EventAction.SCALE_LINE:
                self.line_r[k] = self._ln_r0[k] * event.value
                self.line_l[k] = self._ln_l0[k] * event.value
            else:
                self.line_r[k] = event.r
                self.line_l[k] = event.x / self.top.omega0
        logger.info("applied event %s", event.describe())
        return x

    def _fault_index(self, event: Event) -> int:
        for k, f in enumerate(self.top.faults):
            if f.bus == event.bus and f.r == event.r and f.x == event.x:
                return k
        raise ValueError(f"no fault branch at bus {event.bus} with r={event.r}, x={event.x}")


def _with_event_faults(top: NetworkTopology, events: Sequence[Event]) -> NetworkTopology:
    """Add a fault branch for every distinct fault event not already in ``top``."""
    faults = list(top.faults)
    for ev in events:
        if ev.action is not EventAction.FAULT:
            continue
        branch = FaultBranch(int(ev.bus), ev.r, ev.x)  # type: ignore[arg-type]
        if branch not in faults:
            faults.append(branch)
    if len(faults) == len(top.faults):
        return top
    return replace(top, faults=tuple(faults))


def _check_events(top: NetworkTopology, events: Sequence[Event], cfg: SimConfig) -> None:
    names = {
        DeviceKind.GFM: {f.name for f in fields(GfmParams)},
        DeviceKind.GFL: {f.name for f in fields(GflParams)},
    }
    for ev in events:
        if ev.time > cfg.duration:
            raise ValueError(f"event at {ev.time} s falls after the simulated duration {cfg.duration} s")
        if ev.action in (EventAction.SET_PARAM, EventAction.STEP_REF):
            params = top.devices.get(int(ev.bus))  # type: ignore[arg-type]
            if params is None:
                raise ValueError(f"{ev.action.value}: no device at bus {ev.bus}")
            if ev.name not in names[params.kind]:
                raise ValueError(f"{ev.action.value}: {params.kind.value} has no parameter {ev.name!r}")
        elif ev.line is not None:
            top.line_index(*ev.line)
        elif ev.bus not in top.bus_ids:
            raise ValueError(f"{ev.action.value}: unknown bus {ev.bus}")


def _record(plant: Plant, t: FloatArray, states: FloatArray, omegas: FloatArray) -> dict[int, SimTrace]:
    traces = {}
    for k, bus in enumerate(plant.device_buses):
        params = plant.devices[bus]
        o = plant.layout.device[bus]
        v_off = plant.layout.state.offset(device_owner(bus, params), "v")
        i_off = plant.layout.state.offset(device_owner(bus, params), "i_f")
        th = states[:, o]
        rot = np.exp(-1j * th)
        v = (states[:, v_off] + 1j * states[:, v_off + 1]) * rot
        i = (states[:, i_off] + 1j * states[:, i_off + 1]) * rot
        traces[bus] = SimTrace(bus, params.kind, t, omegas[:, k] / TWO_PI, th, v.real, v.imag, i.real, i.imag)
    return traces


# -------- Simulation ------------------------------------------------------------
class Simulator:
    """Fixed-step RK4 integrator over a :class:`Plant`.

    Parameters
    ----------
    top : NetworkTopology
        Network to simulate.
    events : sequence of Event
        Scheduled changes.
    cfg : SimConfig
        Integration settings.

    Raises
    ------
    ValueError
        If an event refers to an unknown device, parameter, bus or line, or
        falls after the simulated duration.
    SteadyStateError
        If the initial equilibrium cannot be found.
    """

    def __init__(self, top: NetworkTopology, events: Sequence[Event] = (), cfg: SimConfig | None = None) -> None:
        self.cfg = cfg or SimConfig()
        self.events = expand_events(events)
        _check_events(top, self.events, self.cfg)
        self.top = _with_event_faults(top, self.events)
        steady = solve_steady_state(self.top)
        self.plant = Plant(self.top, steady.omega_s)
        residual = float(np.max(np.abs(self.plant.rhs(steady.state))))
        if residual > 1e-6:
            logger.warning("right-hand side residual %.3e at the initialized equilibrium", residual)
        self.steady: SteadyState = replace(steady, residual=residual)

    @property
    def initial_state(self) -> FloatArray:
        """Equilibrium state the run starts from."""
        return self.steady.state.copy()

    def run(self) -> SimResult:
        """Integrate and return the recorded traces."""
        cfg, plant = self.cfg, self.plant
        dt, steps, dec = cfg.dt, cfg.steps, cfg.decimation
        x = self.initial_state
        samples = steps // dec + 1
        t_rec = np.zeros(samples)
        s_rec = np.zeros((samples, x.size))
        w_rec = np.zeros((samples, len(plant.device_buses)))
        pending = list(self.events)
        applied: list[str] = []
        rec = 0
        diverged = False
        f = plant.rhs
        for step in range(steps + 1):
            t = step * dt
            while pending and pending[0].time <= t + 1e-12:
                ev = pending.pop(0)
                x = plant.apply(ev, x)
                applied.append(ev.describe())
            if step % dec == 0:
                t_rec[rec], s_rec[rec], w_rec[rec] = t, x, plant.frequencies(x)
                rec += 1
            if step == steps:
                break
            k1 = f(x)
            k2 = f(x + 0.5 * dt * k1)
            k3 = f(x + 0.5 * dt * k2)
            k4 = f(x + dt * k3)
            x_new = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(x_new)) or np.max(np.abs(x_new)) > DIVERGENCE_LIMIT:
                logger.warning("simulation diverged at t=%.6f s; trace truncated", t + dt)
                diverged = True
                if step % dec != 0:
                    t_rec[rec], s_rec[rec], w_rec[rec] = t, x, plant.frequencies(x)
                    rec += 1
                break
            x = x_new
        t_rec, s_rec, w_rec = t_rec[:rec], s_rec[:rec], w_rec[:rec]
        traces = _record(plant, t_rec, s_rec, w_rec)
        return SimResult(t_rec, traces, s_rec, plant.omega_s, diverged, tuple(applied))


def simulate(
    top: NetworkTopology,
    devices: Mapping[int, DeviceModel | DeviceParams] | None = None,
    events: Sequence[Event] = (),
    cfg: SimConfig | None = None,
) -> SimResult:
    """Simulate ``top`` from its equilibrium through ``events``.

    Parameters
    ----------
    top : NetworkTopology
        Network; its device map is replaced by ``devices`` when given.
    devices : mapping of int to DeviceModel or params, optional
        Devices per bus.
    events : sequence of Event
        Scheduled changes; faults with ``clear_time`` are expanded.
    cfg : SimConfig, optional
        Integration settings (defaults: 1 s at 2e-5 s, decimation 50).

    Returns
    -------
    SimResult
        Traces per device; ``diverged`` marks a truncated run.
    """
    return Simulator(resolve_devices(top, devices), events, cfg).run()
