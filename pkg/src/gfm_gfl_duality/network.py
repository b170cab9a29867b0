"""Multi-inverter networks: topology, steady state and whole-system poles.

A :class:`NetworkTopology` holds buses (with optional constant-impedance
loads and shunt capacitance), series RL lines, inverters attached to buses,
optional infinite buses (``sources``) and optional fault branches used by the
time-domain studies.

Every network element is dynamic:

- each line and each inductive load carries its current as a state,
- a bus with neither an inverter nor a source carries its voltage as a
  state across a shunt capacitance (line half-charging plus bus shunt,
  floored at ``b_min``),
- inverter buses take their voltage from the inverter's filter capacitor.

The equations are written in a global frame rotating at ``ω_s``. With an
infinite bus ``ω_s = Ω0``; an islanded network settles at a frequency set
by droop/PLL sharing, solved together with the bus voltages by
:func:`solve_steady_state`. :func:`assemble` linearizes around that point
(analytically, using :func:`~gfm_gfl_duality.devices.stamp_device`) and
:func:`system_poles` classifies the eigenvalues.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.sparse
import scipy.sparse.csgraph
from numpy.typing import NDArray

from gfm_gfl_duality.devices import (
    DeviceKind,
    DeviceModel,
    DeviceParams,
    DeviceSteady,
    GfmParams,
    add_device_states,
    frozen_states,
    initial_states,
    stamp_device,
)
from gfm_gfl_duality.dqframe import OMEGA0, Frame, RationalTransfer, TransferMatrix2
from gfm_gfl_duality.errors import NumericalError, SteadyStateError, TopologyError
from gfm_gfl_duality.smallsignal import ModeReport
from gfm_gfl_duality.statespace import LinearBuilder, StateLayout, deflate_symmetry, drop_states

logger = logging.getLogger(__name__)

_STEADY_TOL = 1e-8


# -------- Topology ------------------------------------------------------------
@dataclass(frozen=True, slots=True)
class Bus:
    """A network bus.

    Parameters
    ----------
    id : int
        Unique bus number.
    load_r, load_x : float, optional
        Series RL load (pu at Ω0). ``load_x = 0`` gives a resistive load.
    shunt_b : float, default 0.0
        Bus shunt susceptance, pu.
    """

    id: int
    load_r: float | None = None
    load_x: float = 0.0
    shunt_b: float = 0.0

    def __post_init__(self) -> None:
        if self.load_r is not None and (self.load_r < 0 or self.load_x < 0):
            raise TopologyError(f"bus {self.id}: load R and X must be non-negative")
        if self.load_r is not None and self.load_r == 0 and self.load_x == 0:
            raise TopologyError(f"bus {self.id}: zero-impedance load")

    @property
    def has_load(self) -> bool:
        """``True`` if a load is connected."""
        return self.load_r is not None


@dataclass(frozen=True, slots=True)
class Line:
    """Series RL branch with optional total charging susceptance ``b``."""

    from_bus: int
    to_bus: int
    r: float
    x: float
    b: float = 0.0

    def __post_init__(self) -> None:
        if self.x <= 0 or self.r < 0:
            raise TopologyError(f"line {self.from_bus}-{self.to_bus}: need R >= 0 and X > 0, got {self.r}, {self.x}")
        if self.from_bus == self.to_bus:
            raise TopologyError(f"line {self.from_bus}-{self.to_bus} is a self-loop")

    @property
    def key(self) -> tuple[int, int]:
        """Unordered bus pair."""
        return (min(self.from_bus, self.to_bus), max(self.from_bus, self.to_bus))

    def scaled(self, factor: float) -> Line:
        """Return the line with R and X multiplied by ``factor``."""
        return replace(self, r=self.r * factor, x=self.x * factor)


@dataclass(frozen=True, slots=True)
class FaultBranch:
    """RL fault branch to ground, closed only during fault events."""

    bus: int
    r: float = 1e-3
    x: float = 1e-2

    def __post_init__(self) -> None:
        if self.x <= 0 or self.r < 0:
            raise TopologyError(f"fault at bus {self.bus}: need R >= 0 and X > 0")


@dataclass(frozen=True, slots=True)
class NetworkTopology:
    """Buses, lines, attached inverters and infinite buses.

    Parameters
    ----------
    buses : tuple of Bus
        All buses; ids must be unique.
    lines : tuple of Line
        Series branches.
    devices : mapping of int to GfmParams or GflParams
        Inverter attached at each bus id.
    sources : mapping of int to complex
        Infinite buses with fixed EMF (global frame).
    faults : tuple of FaultBranch
        Fault branches available to events.
    omega0 : float
        Base angular frequency, rad/s.
    b_min : float
        Minimum shunt susceptance for buses without a device.
    name : str
        Label used in reports.

    Raises
    ------
    TopologyError
        On duplicate ids, unknown bus references, a bus with both a device
        and a source, or a disconnected graph.
    """

    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    devices: Mapping[int, DeviceParams] = field(default_factory=dict)
    sources: Mapping[int, complex] = field(default_factory=dict)
    faults: tuple[FaultBranch, ...] = ()
    omega0: float = OMEGA0
    b_min: float = 0.01
    name: str = ""

    def __post_init__(self) -> None:
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise TopologyError(f"duplicate bus ids in {ids}")
        if not ids:
            raise TopologyError("topology has no buses")
        known = set(ids)
        for ln in self.lines:
            for end in (ln.from_bus, ln.to_bus):
                if end not in known:
                    raise TopologyError(f"line {ln.from_bus}-{ln.to_bus} references unknown bus {end}")
        for bus in self.devices:
            if bus not in known:
                raise TopologyError(f"device on nonexistent bus {bus}")
            if bus in self.sources:
                raise TopologyError(f"bus {bus} has both a device and a source")
        for bus in self.sources:
            if bus not in known:
                raise TopologyError(f"source on nonexistent bus {bus}")
        for f in self.faults:
            if f.bus not in known:
                raise TopologyError(f"fault on nonexistent bus {f.bus}")
        if self.b_min <= 0:
            raise TopologyError(f"b_min must be positive, got {self.b_min}")
        self._check_connected(ids)

    def _check_connected(self, ids: Sequence[int]) -> None:
        if len(ids) == 1:
            return
        pos = {bid: k for k, bid in enumerate(ids)}
        rows = [pos[ln.from_bus] for ln in self.lines]
        cols = [pos[ln.to_bus] for ln in self.lines]
        graph = scipy.sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(ids), len(ids)))
        n_comp, _ = scipy.sparse.csgraph.connected_components(graph, directed=False)
        if n_comp != 1:
            raise TopologyError(f"network graph is disconnected ({n_comp} components)")

    @property
    def bus_ids(self) -> tuple[int, ...]:
        """Bus ids in declaration order."""
        return tuple(b.id for b in self.buses)

    def bus(self, bus_id: int) -> Bus:
        """Return the bus with id ``bus_id``."""
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise TopologyError(f"unknown bus {bus_id}")

    def line_index(self, a: int, b: int) -> int:
        """Index of the line between buses ``a`` and ``b``."""
        key = (min(a, b), max(a, b))
        for k, ln in enumerate(self.lines):
            if ln.key == key:
                return k
        raise TopologyError(f"no line between buses {a} and {b}")

    def with_devices(self, devices: Mapping[int, DeviceParams]) -> NetworkTopology:
        """Return a copy with the device map replaced."""
        return replace(self, devices=dict(devices))

    def with_device(self, bus: int, params: DeviceParams) -> NetworkTopology:
        """Return a copy with one device replaced or added."""
        return self.with_devices({**self.devices, bus: params})

    def with_scaled_lines(self, pairs: Sequence[tuple[int, int]], factor: float) -> NetworkTopology:
        """Return a copy with the named lines' impedance multiplied by ``factor``."""
        idx = {self.line_index(a, b) for a, b in pairs}
        lines = tuple(ln.scaled(factor) if k in idx else ln for k, ln in enumerate(self.lines))
        return replace(self, lines=lines)

    def with_line(self, index: int, line: Line | None) -> NetworkTopology:
        """Return a copy with line ``index`` replaced (``None`` removes it)."""
        lines = list(self.lines)
        if line is None:
            lines.pop(index)
        else:
            lines[index] = line
        return replace(self, lines=tuple(lines))

    def shunt_capacitance_b(self, bus_id: int) -> float:
        """Capacitive susceptance carried by a bus voltage state."""
        total = self.bus(bus_id).shunt_b
        for ln in self.lines:
            if bus_id in (ln.from_bus, ln.to_bus):
                total += ln.b / 2
        return max(total, self.b_min)

    def has_state_voltage(self, bus_id: int) -> bool:
        """``True`` when the bus voltage is a capacitor state of its own."""
        return bus_id not in self.devices and bus_id not in self.sources


# -------- Nodal admittance ----------------------------------------------------
@dataclass(frozen=True, slots=True, eq=False)
class NodalAdmittance:
    """Bus-indexed dq± nodal admittance of the line network.

    Series branches are diagonal in dq±, so each entry is stored as its
    forward and backward channels.
    """

    bus_ids: tuple[int, ...]
    plus: tuple[tuple[RationalTransfer, ...], ...]
    minus: tuple[tuple[RationalTransfer, ...], ...]

    def entry(self, a: int, b: int) -> TransferMatrix2:
        """dq± entry between bus ids ``a`` and ``b``."""
        i, j = self.bus_ids.index(a), self.bus_ids.index(b)
        return TransferMatrix2.from_rows([[self.plus[i][j], 0.0], [0.0, self.minus[i][j]]], Frame.DQPM)

    def evaluate(self, s: complex, channel: int = 0) -> NDArray[np.complex128]:
        """Evaluate the forward (``channel=0``) or backward channel matrix at ``s``."""
        src = self.plus if channel == 0 else self.minus
        return np.array([[complex(y(s)) for y in row] for row in src])  # type: ignore[arg-type]


def nodal_admittance(top: NetworkTopology) -> NodalAdmittance:
    """Dynamic nodal admittance of the series line network.

    Entry ``(k, k)`` sums the incident branch admittances; ``(k, m)`` is the
    negated branch admittance. A branch contributes ``1/(R + (s ± jΩ0) L)``
    in the forward/backward channel with ``L = X/Ω0``.
    """
    ids = top.bus_ids
    n = len(ids)
    pos = {bid: k for k, bid in enumerate(ids)}
    zero = RationalTransfer.constant(0.0)
    plus = [[zero for _ in range(n)] for _ in range(n)]
    minus = [[zero for _ in range(n)] for _ in range(n)]
    for ln in top.lines:
        ind = ln.x / top.omega0
        for table, sign in ((plus, 1.0), (minus, -1.0)):
            y = RationalTransfer(np.array([1.0]), np.array([ind, ln.r + sign * 1j * top.omega0 * ind]))
            f, t = pos[ln.from_bus], pos[ln.to_bus]
            table[f][f] = table[f][f] + y
            table[t][t] = table[t][t] + y
            table[f][t] = table[f][t] - y
            table[t][f] = table[t][f] - y
    return NodalAdmittance(ids, tuple(map(tuple, plus)), tuple(map(tuple, minus)))


# -------- State layout shared by the linear and nonlinear models -------------
def device_owner(bus: int, params: DeviceParams) -> str:
    """Owner label of the device block at ``bus``."""
    return f"{params.kind.value}@{bus}"


@dataclass
class NetworkLayout:
    """Offsets of every state block of a network.

    Blocks appear in the order: devices (bus order), lines, inductive
    loads, bus capacitors, fault branches.
    """

    state: StateLayout
    device: dict[int, int]
    line: list[int]
    load: dict[int, int]
    cap: dict[int, int]
    fault: list[int]

    @property
    def size(self) -> int:
        """Total number of states."""
        return self.state.size

    def voltage_offset(self, top: NetworkTopology, bus: int) -> int | None:
        """Offset of the bus voltage state (``None`` for a source bus)."""
        if bus in top.devices:
            return self.state.offset(device_owner(bus, top.devices[bus]), "v")
        if bus in self.cap:
            return self.cap[bus]
        return None


def build_layout(top: NetworkTopology) -> NetworkLayout:
    """Lay out the state vector of ``top``."""
    st = StateLayout()
    dev = {}
    for bid in top.bus_ids:
        if bid in top.devices:
            dev[bid] = add_device_states(st, device_owner(bid, top.devices[bid]), top.devices[bid])
    lines = [st.add(f"line {ln.from_bus}-{ln.to_bus}#{k}", "i", 2) for k, ln in enumerate(top.lines)]
    loads = {b.id: st.add(f"load@{b.id}", "i", 2) for b in top.buses if b.has_load and b.load_x > 0}
    caps = {bid: st.add(f"bus@{bid}", "v", 2) for bid in top.bus_ids if top.has_state_voltage(bid)}
    faults = [st.add(f"fault@{f.bus}#{k}", "i", 2) for k, f in enumerate(top.faults)]
    return NetworkLayout(st, dev, lines, loads, caps, faults)


# -------- Steady state --------------------------------------------------------
@dataclass(frozen=True, slots=True)
class SteadyState:
    """Equilibrium of a network.

    Parameters
    ----------
    omega_s : float
        Frame (system) frequency, rad/s.
    voltages : dict of int to complex
        Bus voltages in the global frame.
    port_currents : dict of int to complex
        Current into each device port, global frame.
    state : numpy.ndarray
        Full state vector in :func:`build_layout` order.
    residual : float
        Max-norm of the phasor residual, or of the simulator right-hand side
        once checked by :class:`~gfm_gfl_duality.timedomain.Simulator`.
    """

    omega_s: float
    voltages: dict[int, complex]
    port_currents: dict[int, complex]
    state: NDArray[np.float64] = field(repr=False)
    residual: float

    def device_steady(self, bus: int) -> DeviceSteady:
        """Device linearization point at ``bus``."""
        v = self.voltages[bus]
        return DeviceSteady(float(np.angle(v)), v, self.port_currents[bus], self.omega_s)


def reference_device(top: NetworkTopology) -> int | None:
    """Angle reference for an islanded network: first GFM, else first device."""
    if top.sources:
        return None
    gfm = [b for b in top.bus_ids if b in top.devices and top.devices[b].kind is DeviceKind.GFM]
    if gfm:
        return gfm[0]
    devs = [b for b in top.bus_ids if b in top.devices]
    return devs[0] if devs else None


def _branch_currents(top: NetworkTopology, v: Mapping[int, complex], xr: float) -> dict[int, complex]:
    """Current leaving each bus into lines, loads and bus shunts at frame ratio ``xr``."""
    out = {bid: 0j for bid in top.bus_ids}
    for ln in top.lines:
        d = (v[ln.from_bus] - v[ln.to_bus]) / complex(ln.r, ln.x * xr)
        out[ln.from_bus] += d
        out[ln.to_bus] -= d
    for b in top.buses:
        if b.has_load:
            out[b.id] += v[b.id] / complex(b.load_r or 0.0, b.load_x * xr)
        if top.has_state_voltage(b.id):
            out[b.id] += 1j * xr * top.shunt_capacitance_b(b.id) * v[b.id]
    return out


def _steady_residual(top: NetworkTopology, u: NDArray[np.float64], ref: int | None) -> NDArray[np.float64]:
    ids = top.bus_ids
    n = len(ids)
    omega_s = top.omega0 if ref is None else top.omega0 + u[2 * n]
    xr = omega_s / top.omega0
    v = {bid: complex(u[2 * k], u[2 * k + 1]) for k, bid in enumerate(ids)}
    leaving = _branch_currents(top, v, xr)
    res: list[float] = []
    for bid in ids:
        if bid in top.sources:
            e = v[bid] - top.sources[bid]
            res += [e.real, e.imag]
            continue
        params = top.devices.get(bid)
        if params is None:
            res += [leaving[bid].real, leaving[bid].imag]
            continue
        i_port = -leaving[bid]
        if isinstance(params, GfmParams):
            p = (v[bid] * np.conj(i_port)).real
            res += [abs(v[bid]) - params.v_ref, p - (params.p_ref + (omega_s - OMEGA0) / (params.m * OMEGA0))]
        else:
            want = params.current_ref * np.exp(1j * np.angle(v[bid])) + 1j * params.b_f * xr * v[bid]
            e = i_port - want
            res += [e.real, e.imag]
    if ref is not None:
        res.append(v[ref].imag)
    return np.asarray(res)


RhsFunction = Callable[[NDArray[np.float64]], NDArray[np.float64]]


def _root(fun: RhsFunction, x0: NDArray[np.float64]) -> scipy.optimize.OptimizeResult:
    best = None
    for method in ("hybr", "lm"):
        sol = scipy.optimize.root(fun, x0, method=method, tol=1e-13)
        res = float(np.max(np.abs(sol.fun)))
        logger.debug("steady state via %s: residual %.3e after %s evaluations", method, res, sol.get("nfev"))
        if best is None or res < best[0]:
            best = (res, sol)
        if res < _STEADY_TOL:
            break
    assert best is not None
    return best[1]


def solve_steady_state(top: NetworkTopology) -> SteadyState:
    """Solve the network equilibrium and the matching full state vector.

    The phasor network is solved at ``ω_s`` with GFM buses holding ``|V| = V*``
    and droop-consistent power, GFL buses injecting their current reference
    behind the filter shunt, and capacitor buses satisfying KCL. Internal
    controller states then follow in closed form.

    Raises
    ------
    TopologyError
        If the network has neither devices nor sources.
    SteadyStateError
        If the solve does not converge; the message names the residual.
    """
    if not top.devices and not top.sources:
        raise TopologyError("network has neither devices nor sources")
    ref = reference_device(top)
    ids = top.bus_ids
    u0 = np.tile([1.0, 0.0], len(ids))
    if ref is not None:
        u0 = np.append(u0, 0.0)
    sol = _root(lambda u: _steady_residual(top, u, ref), u0)
    res = float(np.max(np.abs(sol.fun)))
    if res > _STEADY_TOL:
        raise SteadyStateError(f"steady-state solve did not converge (residual {res:.3e})")
    u = sol.x
    n = len(ids)
    omega_s = top.omega0 if ref is None else top.omega0 + float(u[2 * n])
    xr = omega_s / top.omega0
    v = {bid: complex(u[2 * k], u[2 * k + 1]) for k, bid in enumerate(ids)}
    leaving = _branch_currents(top, v, xr)
    ports = {bid: -leaving[bid] for bid in top.devices}

    layout = build_layout(top)
    x = np.zeros(layout.size)
    for k, ln in enumerate(top.lines):
        i = (v[ln.from_bus] - v[ln.to_bus]) / complex(ln.r, ln.x * xr)
        x[layout.line[k] : layout.line[k] + 2] = (i.real, i.imag)
    for bid, off in layout.load.items():
        b = top.bus(bid)
        i = v[bid] / complex(b.load_r or 0.0, b.load_x * xr)
        x[off : off + 2] = (i.real, i.imag)
    for bid, off in layout.cap.items():
        x[off : off + 2] = (v[bid].real, v[bid].imag)
    for bid, off in layout.device.items():
        steady = DeviceSteady(float(np.angle(v[bid])), v[bid], ports[bid], omega_s)
        block = initial_states(top.devices[bid], steady)
        x[off : off + block.size] = block

    logger.debug("steady state of %s: omega_s=%.6f rad/s, %d states", top.name or "network", omega_s, layout.size)
    return SteadyState(omega_s, v, ports, x, res)


# -------- Whole-system linear model ------------------------------------------
@dataclass(frozen=True, slots=True, eq=False)
class WholeSystemModel:
    """Linearized interconnected network.

    Parameters
    ----------
    matrix : numpy.ndarray
        Real state matrix after removing frozen states and, for islanded
        networks, the rotational-symmetry direction.
    labels : tuple of (str, str)
        ``(owner, state)`` label of every row of ``matrix``.
    bus_map : dict of int to str
        Device owner label per bus.
    steady : SteadyState
        Linearization point.
    deflated : bool
        ``True`` if the symmetry zero eigenvalue was removed.
    """

    matrix: NDArray[np.float64]
    labels: tuple[tuple[str, str], ...]
    bus_map: dict[int, str]
    steady: SteadyState
    deflated: bool = False

    @property
    def n(self) -> int:
        """Number of states."""
        return int(self.matrix.shape[0])


def resolve_devices(
    top: NetworkTopology, devices: Mapping[int, DeviceModel | DeviceParams] | None
) -> NetworkTopology:
    """Return ``top`` with its device map replaced by ``devices`` (parameters only)."""
    if devices is None:
        return top
    params = {bus: (d.params if isinstance(d, DeviceModel) else d) for bus, d in devices.items()}
    for bus in params:
        if bus not in top.bus_ids:
            raise TopologyError(f"device on nonexistent bus {bus}")
    return top.with_devices(params)


def linear_state_matrix(top: NetworkTopology, steady: SteadyState) -> tuple[NDArray[np.float64], NetworkLayout]:
    """Full analytic state matrix (every state of :func:`build_layout`, nothing removed)."""
    layout = build_layout(top)
    b = LinearBuilder(layout.size)
    ws = steady.omega_s
    v_rows = {}
    for bid in top.bus_ids:
        off = layout.voltage_offset(top, bid)
        v_rows[bid] = b.zeros() if off is None else b.select(off)
    inj = {bid: b.zeros() for bid in top.bus_ids}
    for k, ln in enumerate(top.lines):
        sel = b.select(layout.line[k])
        inj[ln.from_bus] = inj[ln.from_bus] - sel
        inj[ln.to_bus] = inj[ln.to_bus] + sel
        ind = ln.x / top.omega0
        b.stamp(layout.line[k], v_rows[ln.from_bus] - v_rows[ln.to_bus] - ln.r * sel - ws * ind * b.jmul(sel), 1 / ind)
    for bus in top.buses:
        if not bus.has_load:
            continue
        if bus.id in layout.load:
            sel = b.select(layout.load[bus.id])
            ind = bus.load_x / top.omega0
            b.stamp(layout.load[bus.id], v_rows[bus.id] - (bus.load_r or 0.0) * sel - ws * ind * b.jmul(sel), 1 / ind)
            inj[bus.id] = inj[bus.id] - sel
        else:
            inj[bus.id] = inj[bus.id] - v_rows[bus.id] / (bus.load_r or 0.0)
    for k, f in enumerate(top.faults):
        inj[f.bus] = inj[f.bus] - b.select(layout.fault[k])
    for bid, off in layout.cap.items():
        cap = top.shunt_capacitance_b(bid) / top.omega0
        b.stamp(off, inj[bid] - ws * cap * b.jmul(b.select(off)), 1 / cap)
    for bid, params in top.devices.items():
        stamp_device(b, layout.state, device_owner(bid, params), params, steady.device_steady(bid), inj[bid])
    return b.matrix, layout


def _symmetry_direction(top: NetworkTopology, layout: NetworkLayout, x: NDArray[np.float64]) -> NDArray[np.float64]:
    """Tangent of a uniform rotation of every global-frame quantity."""
    g = np.zeros(layout.size)
    pairs: list[int] = list(layout.line) + list(layout.load.values()) + list(layout.cap.values()) + list(layout.fault)
    for bid, params in top.devices.items():
        owner = device_owner(bid, params)
        g[layout.state.offset(owner, "theta")] = 1.0
        pairs += [layout.state.offset(owner, "i_f"), layout.state.offset(owner, "v")]
    for off in pairs:
        g[off] = -x[off + 1]
        g[off + 1] = x[off]
    return g


def assemble(
    top: NetworkTopology,
    devices: Mapping[int, DeviceModel | DeviceParams] | None = None,
    steady: SteadyState | None = None,
) -> WholeSystemModel:
    """Interconnect the inverters with the dynamic network and linearize.

    Parameters
    ----------
    top : NetworkTopology
        Network; its own device map is used when ``devices`` is ``None``.
    devices : mapping of int to DeviceModel or params, optional
        Devices per bus. Operating points are recomputed from the network
        equilibrium; only the parameters of a :class:`DeviceModel` are used.
    steady : SteadyState, optional
        Pre-computed equilibrium of ``top``.

    Raises
    ------
    TopologyError
        If no device is attached or a device sits on an unknown bus.
    SteadyStateError
        If the equilibrium cannot be found.
    """
    top = resolve_devices(top, devices)
    if not top.devices:
        raise TopologyError("assemble needs at least one device")
    if steady is None:
        steady = solve_steady_state(top)
    matrix, layout = linear_state_matrix(top, steady)
    drop: list[int] = [off + k for off in layout.fault for k in (0, 1)]
    for bid, params in top.devices.items():
        drop += frozen_states(layout.state, device_owner(bid, params), params)
    reduced, keep = drop_states(matrix, drop)
    labels = [layout.state.labels[k] for k in keep]
    deflated = False
    ref = reference_device(top)
    if ref is not None:
        g = _symmetry_direction(top, layout, steady.state)[keep]
        pivot = int(np.flatnonzero(keep == layout.state.offset(device_owner(ref, top.devices[ref]), "theta"))[0])
        reduced = deflate_symmetry(reduced, g, pivot)
        labels.pop(pivot)
        deflated = True
    bus_map = {bid: device_owner(bid, p) for bid, p in top.devices.items()}
    logger.debug("assembled %s: %d states (deflated=%s)", top.name or "network", reduced.shape[0], deflated)
    return WholeSystemModel(reduced, tuple(labels), bus_map, steady, deflated)


def system_poles(model: WholeSystemModel) -> ModeReport:
    """Eigenvalues of the whole-system model with their classification.

    Raises
    ------
    NumericalError
        If the state matrix contains non-finite entries.
    """
    if not np.all(np.isfinite(model.matrix)):
        raise NumericalError("whole-system state matrix has non-finite entries")
    return ModeReport.from_poles(scipy.linalg.eigvals(model.matrix))
