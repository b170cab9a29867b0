"""Grid-forming and grid-following inverter models.

A grid-forming (GFM) inverter forms its terminal voltage through cascaded
voltage and current loops and synchronizes with a P-ω droop::

    ω = Ω0 + m Ω0 (P_f - P*),     T_f dP_f/dt = P - P_f

A grid-following (GFL) inverter forms its filter current through a current
loop and synchronizes with a PLL that drives the measured ``v_q`` to zero::

    ω = Ω0 + k_p v_q + ξ,         dξ/dt = k_i v_q

Both share an LC output filter with ``Ω0 L = x_f`` and ``Ω0 C = b_f`` and
are linearized around an :class:`~gfm_gfl_duality.dqframe.OperatingPoint`.

The module exposes three layers:

- closed-form s-domain objects (:func:`g_fd`, :func:`g_pll`, swing
  characteristic polynomials, the synchronization virtual port),
- port models of the inner loops obtained from the linear state-space
  (:func:`inner_impedance_gfm`, :func:`inner_admittance_gfl`),
- :func:`stamp_device`, which writes a device's linearized equations into a
  shared :class:`~gfm_gfl_duality.statespace.LinearBuilder`. The
  single-inverter-infinite-bus characteristic (:func:`modified_swing`) and
  the whole-network model both use it.

Notes
-----
- Currents follow the load convention: port current flows *into* the
  inverter, so a generating inverter has negative ``P``.
- The droop gain is in pu of Ω0 (``Δω = m Ω0 ΔP``); the GFM swing
  coefficients therefore carry a ``1/(m Ω0)`` scale.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, fields, replace
from enum import Enum
from typing import Any, ClassVar

import numpy as np
import scipy.linalg
import scipy.signal
from numpy.typing import NDArray

from gfm_gfl_duality.dqframe import (
    OMEGA0,
    Frame,
    OperatingPoint,
    RationalTransfer,
    TransferMatrix2,
    common_denominator,
    deflate,
    frame_rotation,
    model_to_dqpm,
    poles_of,
    signal_to_dqpm,
    sort_roots,
)
from gfm_gfl_duality.errors import IdealStiffGridError
from gfm_gfl_duality.statespace import LinearBuilder, StateLayout, drop_states

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi

Embedding = tuple[RationalTransfer, RationalTransfer]
"""dq± pair ``(W_+, W_-)`` of responses to the frame angle."""


def _check_override_names(params: Any, kwargs: dict[str, Any]) -> None:
    names = {f.name for f in fields(params)}
    unknown = sorted(set(kwargs) - names)
    if unknown:
        raise ValueError(f"unknown {type(params).__name__} parameter(s) {unknown}; valid: {sorted(names)}")


class DeviceKind(Enum):
    """Inverter synchronization type.

    Attributes
    ----------
    GFM : str
        Grid-forming, droop-synchronized voltage source.
    GFL : str
        Grid-following, PLL-synchronized current source.
    """

    GFM = "gfm"
    GFL = "gfl"


# -------- Parameters ----------------------------------------------------------
@dataclass(frozen=True, slots=True)
class GfmParams:
    """Grid-forming inverter parameters (rad/s and pu).

    Parameters
    ----------
    m : float, default 0.05
        Frequency droop gain, pu.
    omega_f : float, default 2π·15
        Power filter bandwidth, rad/s (``T_f = 1/omega_f``; ``inf`` disables it).
    omega_v : float, default 2π·250
        Voltage control bandwidth index, rad/s. The inner current loop runs
        at ``4 * omega_v``. Zero opens both loops.
    x_f, b_f : float, default 0.05, 0.02
        Filter reactance ``Ω0 L`` and susceptance ``Ω0 C``, pu.
    p_ref : float, default -0.5
        Active power setpoint ``P*`` (load convention), pu.
    v_ref : float, default 1.0
        Voltage magnitude setpoint ``V*``, pu.
    """

    kind: ClassVar[DeviceKind] = DeviceKind.GFM

    m: float = 0.05
    omega_f: float = TWO_PI * 15
    omega_v: float = TWO_PI * 250
    x_f: float = 0.05
    b_f: float = 0.02
    p_ref: float = -0.5
    v_ref: float = 1.0

    def __post_init__(self) -> None:
        if not self.m > 0:
            raise ValueError(f"droop gain m must be positive, got {self.m}")
        if not self.omega_f > 0:
            raise ValueError(f"omega_f must be positive, got {self.omega_f}")
        if not self.omega_v >= 0:
            raise ValueError(f"omega_v must be non-negative, got {self.omega_v}")
        if not (self.x_f > 0 and self.b_f > 0):
            raise ValueError(f"filter x_f and b_f must be positive, got {self.x_f}, {self.b_f}")

    @classmethod
    def from_hz(cls, *, f_f: float = 15.0, f_v: float = 250.0, **kwargs: Any) -> GfmParams:
        """Build from bandwidths given in Hz."""
        return cls(omega_f=TWO_PI * f_f, omega_v=TWO_PI * f_v, **kwargs)

    def with_overrides(self, **kwargs: Any) -> GfmParams:
        """Return a copy with some fields replaced.

        Raises
        ------
        ValueError
            For a name that is not a field.
        """
        _check_override_names(self, kwargs)
        return replace(self, **kwargs)

    @property
    def t_f(self) -> float:
        """Power filter time constant, s."""
        return 1.0 / self.omega_f

    @property
    def inductance(self) -> float:
        """Filter inductance ``L = x_f / Ω0``."""
        return self.x_f / OMEGA0

    @property
    def capacitance(self) -> float:
        """Filter capacitance ``C = b_f / Ω0``."""
        return self.b_f / OMEGA0

    @property
    def k_pc(self) -> float:
        """Current-loop proportional gain."""
        return 4 * self.omega_v * self.inductance

    @property
    def k_ic(self) -> float:
        """Current-loop integral gain."""
        return (4 * self.omega_v) ** 2 * self.inductance / 4

    @property
    def k_pv(self) -> float:
        """Voltage-loop proportional gain."""
        return 0.15 * self.omega_v * self.capacitance

    @property
    def k_iv(self) -> float:
        """Voltage-loop integral gain."""
        return 0.15 * self.omega_v**2 * self.capacitance


@dataclass(frozen=True, slots=True)
class GflParams:
    """Grid-following inverter parameters (rad/s and pu).

    Parameters
    ----------
    omega_pll : float, default 2π·15
        PLL bandwidth, rad/s. Sets the default PI gains
        ``k_p = omega_pll`` and ``k_i = omega_pll**2 / 4``.
    kp_pll, ki_pll : float, optional
        Explicit PI gains overriding the bandwidth tuning. ``ki_pll = 0``
        disables the PLL integrator.
    omega_i : float, default 2π·250
        Current control bandwidth index, rad/s. Zero opens the loop.
    x_f, b_f : float, default 0.05, 0.02
        Filter reactance and susceptance, pu.
    i_d_ref, i_q_ref : float, default -0.5, 0.0
        Filter current references in the PLL frame, pu.
    """

    kind: ClassVar[DeviceKind] = DeviceKind.GFL

    omega_pll: float = TWO_PI * 15
    kp_pll: float | None = None
    ki_pll: float | None = None
    omega_i: float = TWO_PI * 250
    x_f: float = 0.05
    b_f: float = 0.02
    i_d_ref: float = -0.5
    i_q_ref: float = 0.0

    def __post_init__(self) -> None:
        if not self.omega_pll >= 0:
            raise ValueError(f"omega_pll must be non-negative, got {self.omega_pll}")
        if self.k_p < 0 or self.k_i < 0:
            raise ValueError(f"PLL gains must be non-negative, got k_p={self.k_p}, k_i={self.k_i}")
        if not self.omega_i >= 0:
            raise ValueError(f"omega_i must be non-negative, got {self.omega_i}")
        if not (self.x_f > 0 and self.b_f > 0):
            raise ValueError(f"filter x_f and b_f must be positive, got {self.x_f}, {self.b_f}")

    @classmethod
    def from_hz(cls, *, f_pll: float = 15.0, f_i: float = 250.0, **kwargs: Any) -> GflParams:
        """Build from bandwidths given in Hz."""
        return cls(omega_pll=TWO_PI * f_pll, omega_i=TWO_PI * f_i, **kwargs)

    def with_overrides(self, **kwargs: Any) -> GflParams:
        """Return a copy with some fields replaced.

        Raises
        ------
        ValueError
            For a name that is not a field.
        """
        _check_override_names(self, kwargs)
        return replace(self, **kwargs)

    @property
    def k_p(self) -> float:
        """PLL proportional gain."""
        return self.omega_pll if self.kp_pll is None else self.kp_pll

    @property
    def k_i(self) -> float:
        """PLL integral gain."""
        return self.omega_pll**2 / 4 if self.ki_pll is None else self.ki_pll

    @property
    def current_ref(self) -> complex:
        """Filter current reference ``i_d* + j i_q*``."""
        return complex(self.i_d_ref, self.i_q_ref)

    @property
    def inductance(self) -> float:
        """Filter inductance ``L = x_f / Ω0``."""
        return self.x_f / OMEGA0

    @property
    def capacitance(self) -> float:
        """Filter capacitance ``C = b_f / Ω0``."""
        return self.b_f / OMEGA0

    @property
    def k_pi(self) -> float:
        """Current-loop proportional gain."""
        return self.omega_i * self.inductance

    @property
    def k_ii(self) -> float:
        """Current-loop integral gain."""
        return self.omega_i**2 * self.inductance / 4


DeviceParams = GfmParams | GflParams


@dataclass(frozen=True, slots=True)
class GridImpedance:
    """Series RL grid branch ``Z_g = R + jX`` (X at Ω0).

    Use :meth:`from_scale` for the ``c (1/5 + j)`` parameterization.
    """

    r: float
    x: float

    def __post_init__(self) -> None:
        if self.r < 0 or self.x < 0:
            raise ValueError(f"grid R and X must be non-negative, got {self.r}, {self.x}")

    @classmethod
    def from_scale(cls, scale: float) -> GridImpedance:
        """Return ``Z_g = scale * (1/5 + j)``."""
        return cls(r=scale / 5, x=scale)

    @property
    def is_short(self) -> bool:
        """``True`` for a zero-impedance (ideal stiff) grid."""
        return self.r == 0 and self.x == 0

    @property
    def complex(self) -> complex:
        """Impedance at the fundamental."""
        return complex(self.r, self.x)

    def impedance(self, omega0: float = OMEGA0) -> TransferMatrix2:
        """dq± impedance ``diag(R + (s + jΩ0)L, R + (s - jΩ0)L)``."""
        ind = self.x / omega0
        z = RationalTransfer.polynomial([ind, self.r])
        dq = TransferMatrix2.from_rows([[z, -omega0 * ind], [omega0 * ind, z]])
        return model_to_dqpm(dq)

    def admittance(self, omega0: float = OMEGA0) -> TransferMatrix2:
        """dq± admittance, the channel-wise inverse of :meth:`impedance`."""
        z = self.impedance(omega0)
        return TransferMatrix2.from_rows([[z[0, 0].inverse(), 0.0], [0.0, z[1, 1].inverse()]], Frame.DQPM)


# -------- Steady state of a device inside a network -------------------------
@dataclass(frozen=True, slots=True)
class DeviceSteady:
    """Steady quantities of a device expressed in a common (global) frame.

    Parameters
    ----------
    theta : float
        Device frame angle relative to the global frame, rad.
    voltage : complex
        Port (capacitor) voltage, global frame.
    current : complex
        Port current into the device, global frame.
    frame_frequency : float
        Angular frequency of the global frame, rad/s.
    """

    theta: float
    voltage: complex
    current: complex
    frame_frequency: float = OMEGA0

    def filter_current(self, params: DeviceParams) -> complex:
        """Inductor current from capacitor KCL at steady state."""
        return self.current - 1j * params.b_f * (self.frame_frequency / OMEGA0) * self.voltage

    def inverter_voltage(self, params: DeviceParams) -> complex:
        """Bridge voltage from inductor KVL at steady state."""
        return self.voltage - 1j * params.x_f * (self.frame_frequency / OMEGA0) * self.filter_current(params)

    @classmethod
    def from_operating_point(cls, op: OperatingPoint) -> DeviceSteady:
        """Express an operating point in its own steady frame (``theta = 0``)."""
        return cls(theta=0.0, voltage=op.voltage, current=op.current, frame_frequency=op.omega0)


GFM_STATES = ("theta", "p_f", "xi_v", "xi_c", "i_f", "v")
GFL_STATES = ("theta", "xi_pll", "xi_i", "i_f", "v")
_SIZES = {"theta": 1, "p_f": 1, "xi_pll": 1, "xi_v": 2, "xi_c": 2, "xi_i": 2, "i_f": 2, "v": 2}


def add_device_states(layout: StateLayout, owner: str, params: DeviceParams) -> int:
    """Append a device's states to ``layout`` and return the block offset."""
    names = GFM_STATES if params.kind is DeviceKind.GFM else GFL_STATES
    start = layout.size
    for name in names:
        suffixes = ("d", "q") if name.startswith("xi_") else ("re", "im")
        layout.add(owner, name, _SIZES[name], suffixes)
    return start


def device_state_count(params: DeviceParams) -> int:
    """Number of real states of a device block."""
    names = GFM_STATES if params.kind is DeviceKind.GFM else GFL_STATES
    return sum(_SIZES[n] for n in names)


def initial_states(params: DeviceParams, steady: DeviceSteady) -> NDArray[np.float64]:
    """Closed-form internal states reproducing ``steady`` with zero derivatives.

    Parameters
    ----------
    params : GfmParams or GflParams
        Device parameters.
    steady : DeviceSteady
        Port voltage, port current and frame angle.

    Returns
    -------
    numpy.ndarray
        State block in :data:`GFM_STATES` / :data:`GFL_STATES` order.
    """
    rot = np.exp(-1j * steady.theta)
    v = steady.voltage
    i_f = steady.filter_current(params)
    e_dq = steady.inverter_voltage(params) * rot
    if params.kind is DeviceKind.GFM:
        p = (v * np.conj(steady.current)).real
        xi_v = (steady.current - i_f) * rot
        xi_c = -e_dq
        return np.array(
            [steady.theta, p, xi_v.real, xi_v.imag, xi_c.real, xi_c.imag, i_f.real, i_f.imag, v.real, v.imag]
        )
    xi_pll = steady.frame_frequency - OMEGA0
    xi_i = -e_dq
    return np.array([steady.theta, xi_pll, xi_i.real, xi_i.imag, i_f.real, i_f.imag, v.real, v.imag])


# -------- Linearized device equations -----------------------------------------
def _to_device_frame(rows: NDArray[np.float64], steady_value: complex, theta: float, th_col: int) -> NDArray:
    """Perturbation of ``x e^{-jθ}`` given rows for ``x̂`` in the global frame."""
    out = LinearBuilder.rotate(rows, -theta)
    local = steady_value * np.exp(-1j * theta)
    out[0, th_col] += local.imag
    out[1, th_col] -= local.real
    return out


def stamp_device(
    builder: LinearBuilder,
    layout: StateLayout,
    owner: str,
    params: DeviceParams,
    steady: DeviceSteady,
    port_rows: NDArray[np.float64],
) -> None:
    """Write the linearized device equations into ``builder``.

    Parameters
    ----------
    builder : LinearBuilder
        Target matrix.
    layout : StateLayout
        Layout containing the device block under ``owner``.
    owner : str
        Block owner name.
    params : GfmParams or GflParams
        Device parameters.
    steady : DeviceSteady
        Linearization point in the global frame.
    port_rows : numpy.ndarray
        ``(2, n)`` rows expressing the port current perturbation (global
        frame) in terms of the builder columns.
    """
    b = builder
    ws = steady.frame_frequency
    off = {name: layout.offset(owner, name) for name in (GFM_STATES if params.kind is DeviceKind.GFM else GFL_STATES)}
    th = off["theta"]
    i_f0 = steady.filter_current(params)
    e0 = steady.inverter_voltage(params)
    v_dq = _to_device_frame(b.select(off["v"]), steady.voltage, steady.theta, th)
    if_dq = _to_device_frame(b.select(off["i_f"]), i_f0, steady.theta, th)

    if params.kind is DeviceKind.GFM:
        ip_dq = _to_device_frame(port_rows, steady.current, steady.theta, th)
        v0, ip0 = steady.voltage, steady.current
        sel_v = b.select(off["v"])
        p_rows = v0.real * port_rows[0] + v0.imag * port_rows[1] + ip0.real * sel_v[0] + ip0.imag * sel_v[1]
        b.matrix[th, off["p_f"]] += params.m * OMEGA0
        b.stamp(off["p_f"], p_rows[None, :], 1 / params.t_f)
        b.matrix[off["p_f"], off["p_f"]] -= 1 / params.t_f
        err_v = -v_dq
        b.stamp(off["xi_v"], err_v, params.k_iv)
        err_c = ip_dq - params.k_pv * err_v - b.select(off["xi_v"]) - if_dq
        b.stamp(off["xi_c"], err_c, params.k_ic)
        e_dq = -(params.k_pc * err_c + b.select(off["xi_c"]))
    else:
        b.stamp(th, v_dq[1:2], params.k_p)
        b.matrix[th, off["xi_pll"]] += 1.0
        b.stamp(off["xi_pll"], v_dq[1:2], params.k_i)
        err = -if_dq
        b.stamp(off["xi_i"], err, params.k_ii)
        e_dq = -(params.k_pi * err + b.select(off["xi_i"]))

    e_rows = LinearBuilder.rotate(e_dq, steady.theta)
    e_rows[0, th] -= e0.imag
    e_rows[1, th] += e0.real
    ind, cap = params.inductance, params.capacitance
    sel_if, sel_v = b.select(off["i_f"]), b.select(off["v"])
    b.stamp(off["i_f"], sel_v - e_rows - ws * ind * b.jmul(sel_if), 1 / ind)
    b.stamp(off["v"], port_rows - sel_if - ws * cap * b.jmul(sel_v), 1 / cap)


def frozen_states(layout: StateLayout, owner: str, params: DeviceParams) -> list[int]:
    """States with identically zero dynamics that must be removed before eigen-analysis."""
    if params.kind is DeviceKind.GFL and params.k_i == 0:
        return [layout.offset(owner, "xi_pll")]
    return []


# -------- s-domain synchronization objects -----------------------------------
def g_fd(p: GfmParams) -> RationalTransfer:
    """Droop controller ``m / (1 + s T_f)`` in pu."""
    return RationalTransfer(np.array([p.m]), np.array([p.t_f, 1.0]), unit="pu")


def g_pll(p: GflParams) -> RationalTransfer:
    """PLL PI controller ``(k_p s + k_i) / s``; a pure gain when ``k_i = 0``."""
    if p.k_i == 0:
        return RationalTransfer.constant(p.k_p)
    return RationalTransfer(np.array([p.k_p, p.k_i]), np.array([1.0, 0.0]))


def swing_char_gfm(p: GfmParams, op: OperatingPoint) -> RationalTransfer:
    """Current-angle swing characteristic ``J s² + K_D s + K_S``.

    With the droop acting in pu of Ω0, ``J = T_f/(m Ω0)``, ``K_D = 1/(m Ω0)``
    and ``K_S = -V_d0 I_q0``.
    """
    mw = p.m * op.omega0
    return RationalTransfer.polynomial([p.t_f / mw, 1.0 / mw, -op.v_d0 * op.i_q0])


def swing_char_gfl(p: GflParams, op: OperatingPoint) -> RationalTransfer:
    """Voltage-angle swing characteristic.

    Returns ``(s²/k_i + s k_p V_d0/k_i + V_d0) / (1 + s k_p/k_i)``; the
    numerator roots are the swing modes. With ``k_i = 0`` the first-order
    form ``s + k_p V_d0`` is returned.

    Raises
    ------
    ValueError
        If both PI gains are zero.
    """
    if p.k_p == 0 and p.k_i == 0:
        raise ValueError("PLL with k_p = k_i = 0 has no swing characteristic")
    if p.k_i == 0:
        return RationalTransfer.polynomial([1.0, p.k_p * op.v_d0])
    num = np.array([1.0 / p.k_i, p.k_p * op.v_d0 / p.k_i, op.v_d0])
    return RationalTransfer(num, np.array([p.k_p / p.k_i, 1.0]))


def sync_virtual_port(dev: DeviceModel) -> TransferMatrix2:
    """dq± port contribution of the synchronization loop.

    GFM: ``Z_FD = a G b^T / (s - G c^T a)`` with ``G = m Ω0 / (1 + s T_f)``,
    ``a = (jV_+0, -jV_-0)``, ``b^T = ½(V_-0, V_+0)``, ``c^T = ½(I_-0, I_+0)``.

    GFL: ``Y_PLL = a_i G c_v^T / (s + G V_d0)`` with ``G`` the PLL PI,
    ``a_i = (jI_+0, -jI_-0)`` built from the filter current and
    ``c_v^T = (1/2j, -1/2j)``.

    Raises
    ------
    ValueError
        If the steady port voltage is zero.
    """
    op = dev.op
    if abs(op.voltage) == 0:
        raise ValueError("synchronization undefined at zero steady voltage")
    v_pm = signal_to_dqpm(op.v_d0, op.v_q0)
    if isinstance(dev.params, GfmParams):
        i_pm = signal_to_dqpm(op.i_d0, op.i_q0)
        rot = frame_rotation(op, v_pm)
        a = (-complex(rot[0, 0](0.0)), -complex(rot[1, 1](0.0)))  # (jV_+0, -jV_-0)
        b_row = (0.5 * v_pm[1], 0.5 * v_pm[0])
        c_row = (0.5 * i_pm[1], 0.5 * i_pm[0])
        gain = g_fd(dev.params)
        num = op.omega0 * gain.numerator
        ca = c_row[0] * a[0] + c_row[1] * a[1]
        den = np.polyadd(np.polymul([1.0, 0.0], gain.denominator), -ca * num)
        row_b = b_row
    else:
        i_f = DeviceSteady.from_operating_point(op).filter_current(dev.params)
        i_pm = signal_to_dqpm(i_f.real, i_f.imag)
        rot = frame_rotation(op, i_pm)
        a = (-complex(rot[0, 0](0.0)), -complex(rot[1, 1](0.0)))  # (jI_+0, -jI_-0)
        row_b = (1 / 2j, -1 / 2j)
        gain = g_pll(dev.params)
        num = gain.numerator
        den = np.polyadd(np.polymul([1.0, 0.0], gain.denominator), op.v_d0 * num)
    entries = [[RationalTransfer(a[k] * row_b[m] * num, den) for m in range(2)] for k in range(2)]
    return TransferMatrix2.from_rows(entries, Frame.DQPM)  # type: ignore[arg-type]


# -------- Inner-loop port models ---------------------------------------------
def _inner_block(params: DeviceParams, op: OperatingPoint) -> tuple[NDArray, StateLayout, int]:
    """Device block with two pseudo-input columns appended for the port current."""
    layout = StateLayout()
    add_device_states(layout, "dev", params)
    port = layout.add("input", "i_port", 2)
    builder = LinearBuilder(layout.size)
    stamp_device(builder, layout, "dev", params, DeviceSteady.from_operating_point(op), builder.select(port))
    return builder.matrix, layout, port


def _transfer_numerators(a: NDArray, b: NDArray, c: NDArray) -> tuple[NDArray, NDArray]:
    """Numerators ``(n_out, n_in, n + 1)`` over the shared denominator ``det(sI - a)``."""
    nums = []
    den = np.poly(a)
    for k in range(b.shape[1]):
        num, _ = scipy.signal.ss2tf(a, b, c, np.zeros((c.shape[0], b.shape[1])), input=k)
        nums.append(num)
    return np.stack(nums, axis=1), den


def _inner_loop(params: DeviceParams, op: OperatingPoint) -> tuple[TransferMatrix2, Embedding]:
    """Inner-loop port model and frame embedding, all entries over one denominator.

    GFM: states without ``theta`` and ``p_f``, inputs port current and
    frame angle, output capacitor voltage. GFL: states without ``theta``,
    ``xi_pll`` and the capacitor voltage, inputs port voltage and frame
    angle, output filter current; the capacitor joins ``Y_c`` as a shunt.
    """
    full, layout, port = _inner_block(params, op)
    th = layout.offset("dev", "theta")
    v = layout.offset("dev", "v")
    if params.kind is DeviceKind.GFM:
        frozen = [th, layout.offset("dev", "p_f")]
        inputs, out = [port, port + 1, th], v
    else:
        frozen = [th, layout.offset("dev", "xi_pll"), v, v + 1]
        inputs, out = [v, v + 1, th], layout.offset("dev", "i_f")
    states = [k for k in range(port) if k not in frozen]
    c = np.zeros((2, len(states)))
    c[0, states.index(out)] = 1.0
    c[1, states.index(out + 1)] = 1.0
    nums, den = _transfer_numerators(full[np.ix_(states, states)], full[np.ix_(states, inputs)], c)
    block = [[nums[o, k] for k in range(2)] for o in range(2)]
    if params.kind is DeviceKind.GFL:
        cap = params.capacitance
        shunt = [[[cap, 0.0], [-op.omega0 * cap]], [[op.omega0 * cap], [cap, 0.0]]]
        block = [[np.polyadd(block[o][k], np.polymul(den, shunt[o][k])) for k in range(2)] for o in range(2)]
    dq = TransferMatrix2.from_rows([[RationalTransfer(block[o][k], den) for k in range(2)] for o in range(2)])
    w_d, w_q = nums[0, 2], nums[1, 2]
    embedding = (RationalTransfer(w_d + 1j * w_q, den), RationalTransfer(w_d - 1j * w_q, den))
    return model_to_dqpm(dq), embedding


def inner_impedance_gfm(p: GfmParams, op: OperatingPoint) -> TransferMatrix2:
    """dq± impedance ``Z_c`` of the closed voltage/current loops plus filter.

    Obtained from the linearized device with the synchronization angle
    frozen: input is the port current, output the capacitor voltage. With
    ``omega_v = 0`` it falls back to the bare LC filter.
    """
    return _inner_loop(p, op)[0]


def inner_admittance_gfl(p: GflParams, op: OperatingPoint) -> TransferMatrix2:
    """dq± admittance ``Y_c`` of the closed current loop plus filter.

    The inductor branch is obtained from the linearized device with the PLL
    frozen and the port voltage as input; the filter capacitor contributes
    ``(s ± jΩ0) C`` in parallel.
    """
    return _inner_loop(p, op)[0]


def frame_embedding(params: DeviceParams, op: OperatingPoint) -> Embedding:
    """dq± response ``(W_+, W_-)`` of the inner loops to the frame angle.

    GFM: capacitor voltage per radian with the port current held. GFL:
    filter current per radian with the port voltage held. For ideal inner
    loops these tend to ``(jV_+0, -jV_-0)`` and ``(jI_+0, -jI_-0)``.
    """
    return _inner_loop(params, op)[1]


def _power_rows(op: OperatingPoint) -> tuple[tuple[complex, complex], tuple[complex, complex]]:
    """``b`` and ``c`` with ``P̂ = b^T î + c^T v̂`` in dq±."""
    v_pm = signal_to_dqpm(op.v_d0, op.v_q0)
    i_pm = signal_to_dqpm(op.i_d0, op.i_q0)
    return (0.5 * v_pm[1], 0.5 * v_pm[0]), (0.5 * i_pm[1], 0.5 * i_pm[0])


_PLL_ROW = (1 / 2j, -1 / 2j)


# -------- Device model --------------------------------------------------------
@dataclass(frozen=True, slots=True, eq=False)
class DeviceModel:
    """An inverter linearized at an operating point.

    Use :meth:`build` or :meth:`at_infinite_bus`; ``sync``, ``inner`` and
    ``embedding`` are derived there. ``inner`` and ``embedding`` are
    expected over one shared denominator, as :meth:`build` produces them.

    Parameters
    ----------
    params : GfmParams or GflParams
        Device parameters.
    op : OperatingPoint
        Port quantities in the device's steady frame.
    sync : RationalTransfer
        Synchronization controller ``G_FD`` or ``G_PLL``.
    inner : TransferMatrix2
        dq± inner-loop model ``Z_c`` (GFM) or ``Y_c`` (GFL).
    embedding : tuple of RationalTransfer
        :func:`frame_embedding` of the device.
    """

    params: DeviceParams
    op: OperatingPoint
    sync: RationalTransfer
    inner: TransferMatrix2
    embedding: Embedding

    @property
    def kind(self) -> DeviceKind:
        """Device kind."""
        return self.params.kind

    @property
    def port(self) -> TransferMatrix2:
        """dq± port model with the synchronization loop closed around the inner loops.

        Impedance for GFM, admittance for GFL. Differs from
        ``sync_virtual_port(dev) + inner`` by the coupling of the frame
        angle through the inner loops.
        """
        den, n, w = _shared_form(self)
        g = self.sync
        if isinstance(self.params, GfmParams):
            b, c = _power_rows(self.op)
            k_num = self.op.omega0 * g.numerator
            k_den = np.polymul([1.0, 0.0], g.denominator)
            q = np.polyadd(np.polymul(k_den, den), -np.polymul(k_num, np.polyadd(c[0] * w[0], c[1] * w[1])))
            rows = [np.polyadd(b[j] * den, np.polyadd(c[0] * n[0][j], c[1] * n[1][j])) for j in range(2)]
            upper = [
                RationalTransfer(
                    np.polyadd(np.polymul(q, n[0][j]), np.polymul(k_num, np.polymul(w[0], rows[j]))),
                    np.polymul(den, q),
                )
                for j in range(2)
            ]
        else:
            pll = np.polyadd(np.polymul([1.0, 0.0], g.denominator), self.op.v_d0 * g.numerator)
            upper = [
                RationalTransfer(
                    np.polyadd(np.polymul(pll, n[0][j]), _PLL_ROW[j] * np.polymul(g.numerator, w[0])),
                    np.polymul(den, pll),
                )
                for j in range(2)
            ]
        return TransferMatrix2(((upper[0], upper[1]), (upper[1].mirror(), upper[0].mirror())), Frame.DQPM)

    @classmethod
    def build(cls, params: DeviceParams, op: OperatingPoint) -> DeviceModel:
        """Linearize ``params`` at ``op``."""
        sync = g_fd(params) if isinstance(params, GfmParams) else g_pll(params)
        inner, embedding = _inner_loop(params, op)
        return cls(params, op, sync, inner, embedding)

    @classmethod
    def at_infinite_bus(
        cls,
        params: DeviceParams,
        grid: GridImpedance,
        source: float = 1.0,
        omega0: float = OMEGA0,
    ) -> DeviceModel:
        """Linearize at the equilibrium against an infinite bus ``|E| = source``."""
        return cls.build(params, infinite_bus_operating_point(params, grid, source, omega0))


def _shared_form(dev: DeviceModel) -> tuple[NDArray, list[list[NDArray]], list[NDArray]]:
    """Denominator, inner numerators and embedding numerators over one denominator."""
    inner = dev.inner
    items = common_denominator([inner[0, 0], inner[0, 1], inner[1, 0], inner[1, 1], *dev.embedding])
    n = [[items[0].numerator, items[1].numerator], [items[2].numerator, items[3].numerator]]
    return items[0].denominator, n, [items[4].numerator, items[5].numerator]


def infinite_bus_operating_point(
    params: DeviceParams,
    grid: GridImpedance,
    source: float = 1.0,
    omega0: float = OMEGA0,
) -> OperatingPoint:
    """Equilibrium of one inverter behind ``Z_g`` from an infinite bus.

    The grid current ``i_p`` flows from the source into the device:
    ``E = V + Z_g i_p``. GFM: ``V = V*`` on the d axis and ``i_d = P*/V*``.
    GFL: ``i_f = i*`` in the PLL frame (``v_q = 0``).

    Raises
    ------
    ValueError
        If no equilibrium exists for the given grid.
    """
    z = grid.complex
    if isinstance(params, GfmParams):
        vs = params.v_ref
        i_d = params.p_ref / vs
        if z == 0:
            raise IdealStiffGridError("GFM equilibrium undefined for an ideal stiff grid")
        u = vs + z * i_d
        jz = 1j * z
        qa, qb, qc = abs(jz) ** 2, 2 * (u * np.conj(jz)).real, abs(u) ** 2 - source**2
        disc = qb * qb - 4 * qa * qc
        if disc < 0:
            raise ValueError(f"no GFM equilibrium for P*={params.p_ref} behind Z_g={z}")
        roots = [(-qb + s * np.sqrt(disc)) / (2 * qa) for s in (1, -1)]
        i_q = min(roots, key=abs)
        e = u + jz * i_q
        return OperatingPoint(vs, 0.0, i_d, i_q, theta0=-float(np.angle(e)), omega0=omega0)
    alpha = 1 + 1j * z * params.b_f
    beta = z * params.current_ref
    qa, qb, qc = abs(alpha) ** 2, 2 * (alpha * np.conj(beta)).real, abs(beta) ** 2 - source**2
    disc = qb * qb - 4 * qa * qc
    if disc < 0:
        raise ValueError(f"no GFL equilibrium for i*={params.current_ref} behind Z_g={z}")
    vd = (-qb + np.sqrt(disc)) / (2 * qa)
    i_p = params.current_ref + 1j * params.b_f * vd
    e = vd * alpha + beta
    return OperatingPoint(vd, 0.0, i_p.real, i_p.imag, theta0=-float(np.angle(e)), omega0=omega0)


# -------- Single-inverter-infinite-bus characteristic ------------------------
def smib_state_matrix(dev: DeviceModel, grid: GridImpedance) -> tuple[NDArray[np.float64], StateLayout]:
    """Linear state matrix of one inverter behind ``Z_g`` from an infinite bus.

    The model is built in the device's steady frame. For a zero-impedance
    grid the GFL port voltage is clamped (its states are removed).

    Raises
    ------
    IdealStiffGridError
        For a GFM inverter and ``Z_g = 0``.
    """
    params = dev.params
    if grid.is_short and params.kind is DeviceKind.GFM:
        raise IdealStiffGridError(
            "grid-forming inverter on an ideal stiff grid (Z_g = 0): interaction term is unbounded"
        )
    if grid.x == 0 and not grid.is_short:
        raise ValueError(f"grid branch needs X > 0 for its current state, got R={grid.r}, X={grid.x}")
    layout = StateLayout()
    add_device_states(layout, "dev", params)
    line = layout.add("grid", "i_g", 2)
    b = LinearBuilder(layout.size)
    stamp_device(b, layout, "dev", params, DeviceSteady.from_operating_point(dev.op), b.select(line))
    drop = frozen_states(layout, "dev", params)
    if grid.is_short:
        v = layout.offset("dev", "v")
        drop += [v, v + 1, line, line + 1]
    else:
        ind = grid.x / dev.op.omega0
        sel = b.select(line)
        b.stamp(line, -b.select(layout.offset("dev", "v")) - grid.r * sel - dev.op.omega0 * ind * b.jmul(sel), 1 / ind)
    matrix, _ = drop_states(b.matrix, drop)
    return matrix, layout


def swing_modes(dev: DeviceModel, grid: GridImpedance) -> NDArray[np.complex128]:
    """Eigenvalues of :func:`smib_state_matrix`, sorted by descending real part."""
    matrix, _ = smib_state_matrix(dev, grid)
    return sort_roots(scipy.linalg.eigvals(matrix))


def modified_swing(dev: DeviceModel, grid: GridImpedance) -> RationalTransfer:
    """Characteristic function ``S'`` of the closed single-inverter loop.

    Closes the dq± inner-loop model and frame embedding of ``dev`` over the
    grid branch ``Z_g`` and returns the scalar angle-loop characteristic

    - GFM: ``S' = s/(Ω0 G_FD) + r^T (Z_c + Z_g)^-1 W`` with
      ``r = b - Z_g c`` (``b``, ``c`` the power rows),
    - GFL: ``S' = s/G_PLL + V_d0 + c_v^T (I + Z_g Y_c)^-1 Z_g W``.

    With ideal inner loops (``Z_c = 0``, ``Y_c = 0``, ``W = a``) these
    reduce to ``S_iθ + b^T Y_g a`` and ``S_vθ + c_v^T Z_g a_i``. The matrix
    inverse is carried as ``adj(M)/det(M)`` over the inner-loop denominator
    ``d``, whose roots are struck from ``det(M)`` and from the adjugate
    numerator. The numerator roots of ``S'`` are the single-inverter modes,
    one per state of :func:`smib_state_matrix`.

    Parameters
    ----------
    dev : DeviceModel
        Linearized inverter.
    grid : GridImpedance
        Grid branch; its dq± form is ``grid.impedance()``.

    Raises
    ------
    IdealStiffGridError
        For a GFM inverter on ``Z_g = 0``.
    ValueError
        For a grid branch with ``R > 0`` and ``X = 0``.
    """
    op = dev.op
    if grid.is_short and dev.kind is DeviceKind.GFM:
        raise IdealStiffGridError(
            "grid-forming inverter on an ideal stiff grid (Z_g = 0): interaction term is unbounded"
        )
    if grid.x == 0 and not grid.is_short:
        raise ValueError(f"grid branch needs X > 0 for its current state, got R={grid.r}, X={grid.x}")
    den, n, w = _shared_form(dev)
    zg = grid.impedance(op.omega0)
    z = [zg[0, 0].numerator, zg[1, 1].numerator]
    g = dev.sync
    if isinstance(dev.params, GfmParams):
        b, c = _power_rows(op)
        head = np.polymul([1.0, 0.0], g.denominator)
        gain = op.omega0 * g.numerator
        m = [[np.polyadd(n[i][j], np.polymul(den, z[j])) if i == j else n[i][j] for j in range(2)] for i in range(2)]
        left = [np.polyadd([b[j]], -c[j] * z[j]) for j in range(2)]
        right = w
    else:
        head = np.polyadd(np.polymul([1.0, 0.0], g.denominator), op.v_d0 * g.numerator)
        gain = g.numerator
        if grid.is_short:
            return RationalTransfer(np.real(np.polymul(head, den)), np.real(np.polymul(gain, den)))
        m = [[np.polyadd(den if i == j else [0.0], np.polymul(z[i], n[i][j])) for j in range(2)] for i in range(2)]
        left = [np.array([_PLL_ROW[j]]) for j in range(2)]
        right = [np.polymul(z[j], w[j]) for j in range(2)]
    closed = TransferMatrix2.from_rows(
        [[RationalTransfer.polynomial(m[i][j]) for j in range(2)] for i in range(2)], Frame.DQPM
    )
    adj = [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]]
    coupling = np.zeros(1, dtype=np.complex128)
    for i in range(2):
        for j in range(2):
            coupling = np.polyadd(coupling, np.polymul(left[i], np.polymul(adj[i][j], right[j])))
    inner_poles = poles_of(RationalTransfer(np.ones(1), den))
    # both polynomials are real up to rounding
    e = np.real(deflate(np.real(closed.determinant().numerator), inner_poles))
    h = np.real(deflate(np.real(coupling), inner_poles))
    logger.debug("S' closure: det(M) degree %d, coupling degree %d", e.size - 1, h.size - 1)
    return RationalTransfer(np.polyadd(np.polymul(head, e), np.polymul(gain, h)), np.polymul(gain, e))
