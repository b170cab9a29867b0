"""Labelled real state-space assembly.

Complex quantities (currents, voltages, integrator states in the dq plane)
are stored as consecutive ``(real, imaginary)`` pairs. Linearized equations
are built as *rows*: small ``(k, n)`` arrays expressing a quantity as a linear
combination of the ``n`` states. Rows for a complex quantity have ``k = 2``
and can be rotated or multiplied by ``j`` before being stamped into the state
matrix.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

_J = np.array([[0.0, -1.0], [1.0, 0.0]])


def rotation(angle: float) -> FloatArray:
    """Return the 2×2 real matrix that multiplies a complex pair by ``e^{j angle}``."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass
class StateLayout:
    """Ordered, labelled state vector.

    Each entry is an ``(owner, name)`` pair; complex states expand to
    ``name.d`` and ``name.q`` (or ``name.re`` / ``name.im`` for global-frame
    quantities, by caller choice of ``suffixes``).
    """

    labels: list[tuple[str, str]] = field(default_factory=list)
    _offsets: dict[tuple[str, str], int] = field(default_factory=dict)

    def add(self, owner: str, name: str, size: int = 1, suffixes: tuple[str, str] = ("re", "im")) -> int:
        """Append a scalar (``size=1``) or complex (``size=2``) state and return its offset."""
        key = (owner, name)
        if key in self._offsets:
            raise ValueError(f"duplicate state {owner}.{name}")
        if size not in (1, 2):
            raise ValueError(f"state size must be 1 or 2, got {size}")
        off = len(self.labels)
        self._offsets[key] = off
        if size == 1:
            self.labels.append(key)
        else:
            self.labels.extend([(owner, f"{name}.{suffixes[0]}"), (owner, f"{name}.{suffixes[1]}")])
        return off

    def offset(self, owner: str, name: str) -> int:
        """Return the offset of a previously added state."""
        return self._offsets[(owner, name)]

    def has(self, owner: str, name: str) -> bool:
        """Return ``True`` if the state exists."""
        return (owner, name) in self._offsets

    @property
    def size(self) -> int:
        """Total number of real states."""
        return len(self.labels)


class LinearBuilder:
    """Accumulates a dense state matrix from row expressions.

    Parameters
    ----------
    n : int
        Number of columns (states plus any pseudo-input columns).
    """

    def __init__(self, n: int) -> None:
        self.n = n
        self.matrix = np.zeros((n, n))

    def zeros(self, k: int = 2) -> FloatArray:
        """Return an empty ``(k, n)`` row block."""
        return np.zeros((k, self.n))

    def select(self, offset: int, size: int = 2) -> FloatArray:
        """Rows selecting the state(s) at ``offset``."""
        rows = self.zeros(size)
        rows[np.arange(size), offset + np.arange(size)] = 1.0
        return rows

    @staticmethod
    def jmul(rows: FloatArray) -> FloatArray:
        """Multiply a complex row pair by ``j``."""
        return _J @ rows

    @staticmethod
    def rotate(rows: FloatArray, angle: float) -> FloatArray:
        """Multiply a complex row pair by ``e^{j angle}``."""
        return rotation(angle) @ rows

    def stamp(self, offset: int, rows: FloatArray, gain: float = 1.0) -> None:
        """Add ``gain * rows`` into the matrix rows starting at ``offset``."""
        self.matrix[offset : offset + rows.shape[0]] += gain * rows


def numeric_jacobian(f: Callable[[FloatArray], FloatArray], x: FloatArray, rel_step: float = 1e-6) -> FloatArray:
    """Central-difference Jacobian of ``f`` at ``x``.

    Parameters
    ----------
    f : callable
        Right-hand side ``f(x) -> dx``.
    x : numpy.ndarray
        Point of linearization.
    rel_step : float, default 1e-6
        Step relative to ``max(1, |x_j|)``.

    Returns
    -------
    numpy.ndarray
        ``(n, n)`` Jacobian.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    jac = np.zeros((n, n))
    for j in range(n):
        h = rel_step * max(1.0, abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (f(xp) - f(xm)) / (2 * h)
    return jac


def drop_states(matrix: FloatArray, drop: Iterable[int]) -> tuple[FloatArray, NDArray[np.int_]]:
    """Remove rows and columns ``drop``; return the reduced matrix and kept indices."""
    dropped = set(drop)
    keep = np.array([k for k in range(matrix.shape[0]) if k not in dropped], dtype=int)
    return matrix[np.ix_(keep, keep)], keep


def deflate_symmetry(matrix: FloatArray, direction: FloatArray, pivot: int) -> FloatArray:
    """Remove a known zero-eigenvalue direction from ``matrix``.

    ``direction`` must span a right null vector of ``matrix``. Changing
    coordinates so that the ``pivot`` basis vector is replaced by
    ``direction`` makes the ``pivot`` column of the transformed matrix zero;
    dropping row and column ``pivot`` then leaves the remaining eigenvalues.
    """
    n = matrix.shape[0]
    t = np.eye(n)
    t[:, pivot] = direction
    if abs(direction[pivot]) < 1e-12:
        raise ValueError("symmetry direction has no component on the pivot state")
    transformed = np.linalg.solve(t, matrix @ t)
    reduced, _ = drop_states(transformed, [pivot])
    return reduced
