"""Exception hierarchy.

All package-specific failures derive from :class:`DualityError`. Each
subclass also inherits from the closest builtin (``ValueError`` for bad
inputs, ``RuntimeError`` for numerical failures) so callers that only catch
builtins keep working, and the command-line front-end can map the two
families onto distinct exit codes.
"""

from __future__ import annotations


class DualityError(Exception):
    """Root of every error raised by this package."""


class FrameError(DualityError, ValueError):
    """A transfer matrix carries the wrong frame tag or breaks dq± structure."""


class IdealStiffGridError(DualityError, ValueError):
    """A grid-forming inverter was connected to a zero-impedance grid."""


class TopologyError(DualityError, ValueError):
    """A network description is inconsistent."""


class NoEquilibriumError(DualityError, ValueError):
    """A power-angle curve has no equilibrium at the requested setpoint."""


class SteadyStateError(DualityError, RuntimeError):
    """Equilibrium initialization failed to converge."""


class NumericalError(DualityError, RuntimeError):
    """A numerical routine received or produced non-finite data."""


class SweepError(DualityError, RuntimeError):
    """A sweep point could not be constructed.

    Parameters
    ----------
    value : float
        The swept parameter value at which construction failed.
    message : str
        Description of the underlying failure.
    """

    def __init__(self, value: float, message: str) -> None:
        super().__init__(f"sweep failed at value {value!r}: {message}")
        self.value = value
