"""GFM/GFL duality.

Small-signal, time-domain and transient analysis of grid-forming and
grid-following inverters, alone on an infinite bus or inside a network.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("gfm-gfl-duality")
except PackageNotFoundError:
    __version__ = "0.0.0.dev0"

# Devices
from .devices import (
    DeviceKind,
    DeviceModel,
    GflParams,
    GfmParams,
    GridImpedance,
    frame_embedding,
    g_fd,
    g_pll,
    modified_swing,
    swing_char_gfl,
    swing_char_gfm,
    sync_virtual_port,
)

# Frames and transfer functions
from .dqframe import Frame, OperatingPoint, RationalTransfer, TransferMatrix2, poles_of
from .errors import (
    DualityError,
    FrameError,
    IdealStiffGridError,
    NoEquilibriumError,
    NumericalError,
    SteadyStateError,
    SweepError,
    TopologyError,
)

# Networks
from .network import Bus, FaultBranch, Line, NetworkTopology, assemble, solve_steady_state, system_poles
from .smallsignal import ModeReport, SweepParameter, SweepSpec, Verdict, classify, preset, root_locus
from .timedomain import Event, SimConfig, SimResult, simulate

# Transient stability
from .transient import TwoInverterCase, angle_curve, equilibria, inertia_swap, max_decel_area, swing_ode

__all__ = [
    # Frames and transfer functions
    "Frame",
    "OperatingPoint",
    "RationalTransfer",
    "TransferMatrix2",
    "poles_of",
    # Devices
    "DeviceKind",
    "DeviceModel",
    "GfmParams",
    "GflParams",
    "GridImpedance",
    "frame_embedding",
    "g_fd",
    "g_pll",
    "swing_char_gfm",
    "swing_char_gfl",
    "sync_virtual_port",
    "modified_swing",
    # Small-signal sweeps
    "ModeReport",
    "SweepParameter",
    "SweepSpec",
    "Verdict",
    "classify",
    "preset",
    "root_locus",
    # Networks
    "Bus",
    "FaultBranch",
    "Line",
    "NetworkTopology",
    "assemble",
    "solve_steady_state",
    "system_poles",
    # Time domain
    "Event",
    "SimConfig",
    "SimResult",
    "simulate",
    # Transient stability
    "TwoInverterCase",
    "angle_curve",
    "equilibria",
    "inertia_swap",
    "max_decel_area",
    "swing_ode",
    # Errors
    "DualityError",
    "FrameError",
    "IdealStiffGridError",
    "NoEquilibriumError",
    "NumericalError",
    "SteadyStateError",
    "SweepError",
    "TopologyError",
]
