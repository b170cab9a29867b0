"""JSON ingestion of topologies, scenarios and command-line overrides.

Topology files use per-unit fields with explicit unit suffixes::

    {
      "name": "island",
      "omega0_hz": 50,
      "b_min_pu": 0.01,
      "buses":   [{"id": 1, "load_r_pu": 1.0, "load_x_pu": 0.2}],
      "lines":   [{"from": 1, "to": 2, "r_pu": 0.01, "x_pu": 0.05, "b_pu": 0.0}],
      "sources": [{"bus": 2, "e_re_pu": 1.0, "e_im_pu": 0.0}],
      "devices": [{"bus": 1, "kind": "gfl", "f_pll_hz": 15, "i_d_ref_pu": -0.5}],
      "faults":  [{"bus": 1, "r_pu": 0.001, "x_pu": 0.01}]
    }

A scenario file is a topology plus an ``events`` array and an optional
``sim`` block (``duration_s``, ``dt_s``, ``decimation``). Malformed input
raises :class:`ValueError` naming the JSON path of the offending field, for
example ``devices[2].kind``.
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from importlib.resources import files
from pathlib import Path
from typing import TYPE_CHECKING, Any

from gfm_gfl_duality.devices import DeviceParams, GflParams, GfmParams
from gfm_gfl_duality.network import Bus, FaultBranch, Line, NetworkTopology
from gfm_gfl_duality.timedomain import Event, EventAction, SimConfig

if TYPE_CHECKING:
    from importlib.abc import Traversable

logger = logging.getLogger(__name__)

_MISSING = object()

_GFM_KEYS = {
    "m": "m",
    "x_f_pu": "x_f",
    "b_f_pu": "b_f",
    "p_ref_pu": "p_ref",
    "v_ref_pu": "v_ref",
}
_GFL_KEYS = {
    "kp_pll": "kp_pll",
    "ki_pll": "ki_pll",
    "x_f_pu": "x_f",
    "b_f_pu": "b_f",
    "i_d_ref_pu": "i_d_ref",
    "i_q_ref_pu": "i_q_ref",
}


# -------- Low-level field access -----------------------------------------------
def _number(obj: Mapping[str, Any], key: str, path: str, default: Any = _MISSING) -> float:
    if key not in obj:
        if default is _MISSING:
            raise ValueError(f"{path}.{key}: required field is missing")
        return float(default)
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValueError(f"{path}.{key}: expected a finite number, got {value!r}")
    return float(value)


def _integer(obj: Mapping[str, Any], key: str, path: str) -> int:
    if key not in obj:
        raise ValueError(f"{path}.{key}: required field is missing")
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"{path}.{key}: expected an integer, got {value!r}")
    return value


def _array(obj: Mapping[str, Any], key: str, path: str) -> list[Any]:
    value = obj.get(key, [])
    if not isinstance(value, list):
        raise ValueError(f"{path}.{key}: expected an array, got {type(value).__name__}")
    return value


def _object(value: Any, path: str) -> Mapping[str, Any]:
    if not isinstance(value, dict):
        raise ValueError(f"{path}: expected an object, got {type(value).__name__}")
    return value


def _reject_unknown(obj: Mapping[str, Any], allowed: set[str], path: str) -> None:
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ValueError(f"{path}: unknown field(s) {', '.join(extra)}")


# -------- Files ----------------------------------------------------------------
def data_file(name: str) -> Traversable:
    """Locate a shipped data file (``.json`` is appended when missing)."""
    if not name.endswith(".json"):
        name = f"{name}.json"
    return files("gfm_gfl_duality") / "data" / name


def shipped_names() -> list[str]:
    """Names of the shipped topology/scenario files, without extension."""
    folder = files("gfm_gfl_duality") / "data"
    return sorted(p.name.removesuffix(".json") for p in folder.iterdir() if p.name.endswith(".json"))


def read_json(source: str | Path | Traversable) -> dict[str, Any]:
    """Parse a JSON document.

    ``source`` may be a filesystem path or a shipped data file name.

    Raises
    ------
    ValueError
        On a syntax error (with line and column) or a non-object document.
    OSError
        If the file cannot be read.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        shipped = data_file(str(source))
        if not path.exists() and shipped.is_file():
            source = shipped
        else:
            source = path
    text = source.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{source}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ValueError(f"{source}: top-level JSON value must be an object")
    logger.debug("read %s", source)
    return doc


# -------- Topology --------------------------------------------------------------
def parse_device(obj: Mapping[str, Any], path: str) -> tuple[int, DeviceParams]:
    """Parse one entry of ``devices``."""
    bus = _integer(obj, "bus", path)
    kind = obj.get("kind")
    try:
        if kind == "gfm":
            _reject_unknown(obj, {"bus", "kind", "f_f_hz", "f_v_hz", *_GFM_KEYS}, path)
            kw = {attr: _number(obj, key, path) for key, attr in _GFM_KEYS.items() if key in obj}
            return bus, GfmParams.from_hz(
                f_f=_number(obj, "f_f_hz", path, 15.0), f_v=_number(obj, "f_v_hz", path, 250.0), **kw
            )
        if kind == "gfl":
            _reject_unknown(obj, {"bus", "kind", "f_pll_hz", "f_i_hz", *_GFL_KEYS}, path)
            kw = {attr: _number(obj, key, path) for key, attr in _GFL_KEYS.items() if key in obj}
            return bus, GflParams.from_hz(
                f_pll=_number(obj, "f_pll_hz", path, 15.0), f_i=_number(obj, "f_i_hz", path, 250.0), **kw
            )
    except ValueError as exc:
        if str(exc).startswith(path):
            raise
        raise ValueError(f"{path}: {exc}") from exc
    raise ValueError(f"{path}.kind: expected 'gfm' or 'gfl', got {kind!r}")


def parse_topology(doc: Mapping[str, Any]) -> NetworkTopology:
    """Build a :class:`NetworkTopology` from a parsed JSON document.

    Raises
    ------
    ValueError
        On malformed fields (the message names the JSON path) or an invalid
        topology (:class:`~gfm_gfl_duality.errors.TopologyError`).
    """
    buses = []
    for k, raw in enumerate(_array(doc, "buses", "$")):
        path = f"buses[{k}]"
        b = _object(raw, path)
        _reject_unknown(b, {"id", "load_r_pu", "load_x_pu", "shunt_b_pu"}, path)
        load_r = _number(b, "load_r_pu", path) if "load_r_pu" in b else None
        load_x = _number(b, "load_x_pu", path, 0.0)
        buses.append(Bus(_integer(b, "id", path), load_r, load_x, _number(b, "shunt_b_pu", path, 0.0)))
    lines = []
    for k, raw in enumerate(_array(doc, "lines", "$")):
        path = f"lines[{k}]"
        ln = _object(raw, path)
        _reject_unknown(ln, {"from", "to", "r_pu", "x_pu", "b_pu"}, path)
        lines.append(
            Line(
                _integer(ln, "from", path),
                _integer(ln, "to", path),
                _number(ln, "r_pu", path, 0.0),
                _number(ln, "x_pu", path),
                _number(ln, "b_pu", path, 0.0),
            )
        )
    devices: dict[int, DeviceParams] = {}
    for k, raw in enumerate(_array(doc, "devices", "$")):
        path = f"devices[{k}]"
        bus, params = parse_device(_object(raw, path), path)
        if bus in devices:
            raise ValueError(f"{path}.bus: bus {bus} already has a device")
        devices[bus] = params
    sources = {}
    for k, raw in enumerate(_array(doc, "sources", "$")):
        path = f"sources[{k}]"
        src = _object(raw, path)
        _reject_unknown(src, {"bus", "e_re_pu", "e_im_pu"}, path)
        sources[_integer(src, "bus", path)] = complex(
            _number(src, "e_re_pu", path, 1.0), _number(src, "e_im_pu", path, 0.0)
        )
    faults = []
    for k, raw in enumerate(_array(doc, "faults", "$")):
        path = f"faults[{k}]"
        f = _object(raw, path)
        _reject_unknown(f, {"bus", "r_pu", "x_pu"}, path)
        r, x = _number(f, "r_pu", path, 1e-3), _number(f, "x_pu", path, 1e-2)
        faults.append(FaultBranch(_integer(f, "bus", path), r, x))
    name = doc.get("name", "")
    return NetworkTopology(
        tuple(buses),
        tuple(lines),
        devices,
        sources,
        tuple(faults),
        omega0=2 * math.pi * _number(doc, "omega0_hz", "$", 50.0),
        b_min=_number(doc, "b_min_pu", "$", 0.01),
        name=str(name),
    )


def load_topology(source: str | Path) -> NetworkTopology:
    """Read and parse a topology from a path or a shipped data name."""
    return parse_topology(read_json(source))


# -------- Scenarios -------------------------------------------------------------
def parse_event(obj: Mapping[str, Any], path: str) -> Event:
    """Parse one entry of ``events``.

    ``value_hz`` may replace ``value`` for bandwidth parameters; it is
    converted to rad/s.
    """
    _reject_unknown(
        obj, {"time_s", "action", "bus", "line", "name", "value", "value_hz", "r_pu", "x_pu", "clear_time_s"}, path
    )
    try:
        action = EventAction(obj.get("action"))
    except ValueError:
        choices = ", ".join(a.value for a in EventAction)
        raise ValueError(f"{path}.action: expected one of {choices}, got {obj.get('action')!r}") from None
    line = obj.get("line")
    if line is not None:
        if not (isinstance(line, list) and len(line) == 2 and all(isinstance(v, int) for v in line)):
            raise ValueError(f"{path}.line: expected [from, to], got {line!r}")
        line = (line[0], line[1])
    value = _number(obj, "value", path, 0.0)
    if "value_hz" in obj:
        value = 2 * math.pi * _number(obj, "value_hz", path)
    clear = _number(obj, "clear_time_s", path) if "clear_time_s" in obj else None
    try:
        return Event(
            _number(obj, "time_s", path),
            action,
            bus=_integer(obj, "bus", path) if "bus" in obj else None,
            line=line,
            name=str(obj.get("name", "")),
            value=value,
            r=_number(obj, "r_pu", path, 1e-3),
            x=_number(obj, "x_pu", path, 1e-2),
            clear_time=clear,
        )
    except ValueError as exc:
        if str(exc).startswith(path):
            raise
        raise ValueError(f"{path}: {exc}") from exc


def parse_sim_config(obj: Mapping[str, Any] | None, path: str = "sim") -> SimConfig:
    """Parse the optional ``sim`` block."""
    if obj is None:
        return SimConfig()
    _reject_unknown(obj, {"duration_s", "dt_s", "decimation"}, path)
    dec = obj.get("decimation", 50)
    if isinstance(dec, bool) or not isinstance(dec, int):
        raise ValueError(f"{path}.decimation: expected an integer, got {dec!r}")
    return SimConfig(_number(obj, "duration_s", path, 1.0), _number(obj, "dt_s", path, 2e-5), dec)


@dataclass(frozen=True, slots=True)
class Scenario:
    """Topology, events and integration settings read from one file."""

    topology: NetworkTopology
    events: tuple[Event, ...]
    sim: SimConfig


def parse_scenario(doc: Mapping[str, Any]) -> Scenario:
    """Parse a scenario document (topology plus ``events`` and ``sim``)."""
    topo_doc = {k: v for k, v in doc.items() if k not in ("events", "sim")}
    events = tuple(
        parse_event(_object(raw, f"events[{k}]"), f"events[{k}]") for k, raw in enumerate(_array(doc, "events", "$"))
    )
    sim = parse_sim_config(_object(doc["sim"], "sim") if "sim" in doc else None)
    return Scenario(parse_topology(topo_doc), events, sim)


def load_scenario(source: str | Path) -> Scenario:
    """Read and parse a scenario from a path or a shipped data name."""
    return parse_scenario(read_json(source))


# -------- Overrides -------------------------------------------------------------
def parse_overrides(pairs: Sequence[str]) -> dict[str, float]:
    """Parse ``name=value`` strings from the command line.

    Names ending in ``_hz`` are converted to the matching rad/s field
    (``omega_pll_hz=60`` becomes ``omega_pll``).

    Raises
    ------
    ValueError
        On a missing ``=`` or a non-numeric value.
    """
    out: dict[str, float] = {}
    for item in pairs:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ValueError(f"override {item!r} must look like name=value")
        try:
            value = float(raw)
        except ValueError:
            raise ValueError(f"override {key}: {raw!r} is not a number") from None
        if key.endswith("_hz"):
            key, value = key.removesuffix("_hz"), 2 * math.pi * value
        out[key.strip()] = value
    return out
