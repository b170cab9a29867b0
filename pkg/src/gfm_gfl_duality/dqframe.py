"""Complex dq± frame algebra.

Every small-signal object in the package (controllers, port impedances and
admittances, characteristic functions) is a rational function of the Laplace
variable ``s`` with complex coefficients. :class:`RationalTransfer` carries
one such function; :class:`TransferMatrix2` carries a 2×2 multi-input
multi-output model in either the real ``dq`` frame or the complex ``dq±``
frame.

The ``dq±`` frame replaces a real pair ``(u_d, u_q)`` by the forward and
backward complex space vectors::

    u_+ = u_d + j u_q
    u_- = u_d - j u_q

so that a real ``dq`` model ``G_dq`` maps to ``G_dq± = T_j G_dq T_j^-1`` with
``T_j = [[1, j], [1, -j]]``. For a real-coefficient ``G_dq`` the lower row of
``G_dq±`` is the conjugate mirror of the upper row: ``G_--(s) = conj(G_++(s*))``
and ``G_-+(s) = conj(G_+-(s*))``.

Notes
-----
- All frequencies are in rad/s; per-unit everywhere else.
- Rational arithmetic strips leading zeros only. Pole-zero cancellation is
  never performed implicitly; :meth:`RationalTransfer.cancel` is opt-in.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Literal

import numpy as np
import scipy.linalg
import scipy.optimize
from numpy.typing import ArrayLike, NDArray

from gfm_gfl_duality.errors import FrameError, NumericalError

logger = logging.getLogger(__name__)

OMEGA0 = 2.0 * np.pi * 50.0
"""Base angular frequency in rad/s."""

_MIRROR_TOL = 1e-12
_SAMPLE_S = np.array([0.37j, 1.9j, 13.0j, 0.5 + 101.0j, -2.0 + 7.0j])

ComplexArray = NDArray[np.complex128]


def _as_coefficients(values: ArrayLike, *, name: str) -> ComplexArray:
    arr = np.atleast_1d(np.asarray(values, dtype=np.complex128)).ravel()
    if arr.size == 0:
        raise ValueError(f"{name} coefficients must not be empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} coefficients must be finite, got {arr}")
    nz = np.flatnonzero(arr)
    if nz.size == 0:
        return np.zeros(1, dtype=np.complex128)
    return arr[nz[0] :].copy()


def _poly_shift(coeffs: ComplexArray, offset: complex) -> ComplexArray:
    """Return the coefficients of ``p(s + offset)``."""
    out = np.zeros(1, dtype=np.complex128)
    step = np.array([1.0, offset], dtype=np.complex128)
    for c in coeffs:
        out = np.polyadd(np.polymul(out, step), [c])
    return np.asarray(out, dtype=np.complex128)


# -------- Scalar transfer function -------------------------------------------
@dataclass(frozen=True, slots=True, eq=False)
class RationalTransfer:
    """Rational function of ``s`` with complex coefficients.

    Parameters
    ----------
    numerator : array_like of complex
        Numerator coefficients in descending powers of ``s``.
    denominator : array_like of complex, optional
        Denominator coefficients in descending powers of ``s``. Defaults to
        ``[1]`` (a polynomial).
    unit : str, optional
        Free-form unit tag (``"pu"``, ``"pu/rad"``...). Carried through
        arithmetic only when both operands agree.

    Raises
    ------
    ValueError
        If a coefficient is non-finite or the denominator is identically zero.
    """

    numerator: ComplexArray
    denominator: ComplexArray = field(default_factory=lambda: np.ones(1, dtype=np.complex128))
    unit: str = ""

    def __post_init__(self) -> None:
        num = _as_coefficients(self.numerator, name="numerator")
        den = _as_coefficients(self.denominator, name="denominator")
        if den[0] == 0:
            raise ValueError("denominator must not be identically zero")
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "denominator", den)

    # ---- constructors ---
    @classmethod
    def constant(cls, value: complex, unit: str = "") -> RationalTransfer:
        """Return the constant transfer ``value``."""
        return cls(np.array([value]), unit=unit)

    @classmethod
    def polynomial(cls, coeffs: ArrayLike, unit: str = "") -> RationalTransfer:
        """Return a polynomial transfer with the given descending coefficients."""
        return cls(np.asarray(coeffs, dtype=np.complex128), unit=unit)

    @classmethod
    def s(cls) -> RationalTransfer:
        """Return the Laplace variable itself."""
        return cls(np.array([1.0, 0.0]))

    # ---- properties ---
    @property
    def is_polynomial(self) -> bool:
        """``True`` when the denominator is a constant."""
        return self.denominator.size == 1

    @property
    def is_zero(self) -> bool:
        """``True`` when the numerator is identically zero."""
        return self.numerator.size == 1 and self.numerator[0] == 0

    @property
    def order(self) -> tuple[int, int]:
        """Return ``(numerator degree, denominator degree)``."""
        return self.numerator.size - 1, self.denominator.size - 1

    # ---- evaluation ---
    def __call__(self, s: ArrayLike) -> NDArray[np.complex128] | complex:
        """Evaluate at complex frequency ``s`` (scalar or array)."""
        sv = np.asarray(s, dtype=np.complex128)
        val = np.polyval(self.numerator, sv) / np.polyval(self.denominator, sv)
        if val.ndim == 0:
            return complex(val)
        return val

    # ---- arithmetic ---
    def _unit_with(self, other: RationalTransfer) -> str:
        return self.unit if self.unit == other.unit else ""

    def __add__(self, other: object) -> RationalTransfer:
        o = _coerce(other)
        if o is None:
            return NotImplemented
        if np.array_equal(self.denominator, o.denominator):
            num = np.polyadd(self.numerator, o.numerator)
            return RationalTransfer(num, self.denominator, self._unit_with(o))
        num = np.polyadd(np.polymul(self.numerator, o.denominator), np.polymul(o.numerator, self.denominator))
        return RationalTransfer(num, np.polymul(self.denominator, o.denominator), self._unit_with(o))

    __radd__ = __add__

    def __neg__(self) -> RationalTransfer:
        return RationalTransfer(-self.numerator, self.denominator, self.unit)

    def __sub__(self, other: object) -> RationalTransfer:
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other: object) -> RationalTransfer:
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return o + (-self)

    def __mul__(self, other: object) -> RationalTransfer:
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return RationalTransfer(
            np.polymul(self.numerator, o.numerator),
            np.polymul(self.denominator, o.denominator),
            self.unit or o.unit,
        )

    __rmul__ = __mul__

    def inverse(self) -> RationalTransfer:
        """Return ``1 / self``.

        Raises
        ------
        ZeroDivisionError
            If the numerator is identically zero.
        """
        if self.is_zero:
            raise ZeroDivisionError("cannot invert a zero transfer function")
        return RationalTransfer(self.denominator, self.numerator)

    def __truediv__(self, other: object) -> RationalTransfer:
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other: object) -> RationalTransfer:
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    # ---- frame helpers ---
    def shift(self, omega: float) -> RationalTransfer:
        """Return ``G(s + j*omega)``: the same dynamics seen from a frame offset by ``omega``."""
        return RationalTransfer(
            _poly_shift(self.numerator, 1j * omega),
            _poly_shift(self.denominator, 1j * omega),
            self.unit,
        )

    def mirror(self) -> RationalTransfer:
        """Return ``conj(G(conj(s)))``, the conjugate-mirror partner in dq±."""
        return RationalTransfer(np.conj(self.numerator), np.conj(self.denominator), self.unit)

    def cancel(self, tol: float = 1e-9) -> RationalTransfer:
        """Strike pole-zero pairs closer than ``tol`` (relative).

        Off by default everywhere in the package: a silently cancelled pair
        can hide a right-half-plane mode.
        """
        if self.is_zero or self.is_polynomial or self.numerator.size == 1:
            return self
        zeros = list(np.roots(self.numerator))
        poles = list(np.roots(self.denominator))
        kept_poles = []
        for p in poles:
            match = next((k for k, z in enumerate(zeros) if abs(z - p) <= tol * max(1.0, abs(p))), None)
            if match is None:
                kept_poles.append(p)
            else:
                zeros.pop(match)
        gain = self.numerator[0] / self.denominator[0]
        return RationalTransfer(gain * np.poly(zeros), np.poly(kept_poles), self.unit)

    def __repr__(self) -> str:
        return f"RationalTransfer(num={self.numerator!r}, den={self.denominator!r})"


def _coerce(value: object) -> RationalTransfer | None:
    if isinstance(value, RationalTransfer):
        return value
    if isinstance(value, (int, float, complex, np.number)):
        return RationalTransfer.constant(complex(value))  # type: ignore[arg-type]
    return None


# -------- 2x2 transfer matrix -------------------------------------------------
class Frame(Enum):
    """Reference frame of a :class:`TransferMatrix2`.

    Attributes
    ----------
    DQ : str
        Real synchronous ``dq`` frame.
    DQPM : str
        Complex forward/backward ``dq±`` frame.
    """

    DQ = "dq"
    DQPM = "dq±"


Entries = tuple[tuple[RationalTransfer, RationalTransfer], tuple[RationalTransfer, RationalTransfer]]


def _mirror_gap(a: RationalTransfer, b: RationalTransfer) -> float:
    """Largest relative mismatch between ``b(s)`` and ``conj(a(conj(s)))`` over sample points."""
    with np.errstate(divide="ignore", invalid="ignore"):
        av = np.conj(np.asarray(a(np.conj(_SAMPLE_S))))
        bv = np.asarray(b(_SAMPLE_S))
    scale = np.maximum(1.0, np.maximum(np.abs(av), np.abs(bv)))
    gap = np.abs(av - bv) / scale
    return float(np.nanmax(gap)) if np.any(np.isfinite(gap)) else 0.0


@dataclass(frozen=True, slots=True, eq=False)
class TransferMatrix2:
    """2×2 matrix of :class:`RationalTransfer` tagged with its frame.

    Parameters
    ----------
    entries : tuple of tuple of RationalTransfer
        Row-major entries ``((g11, g12), (g21, g22))``.
    frame : Frame
        ``Frame.DQ`` or ``Frame.DQPM``.

    Raises
    ------
    FrameError
        If a ``dq±`` matrix breaks the conjugate-mirror structure by more
        than 1e-12 (relative) at the sample frequencies.
    """

    entries: Entries
    frame: Frame = Frame.DQ

    def __post_init__(self) -> None:
        if self.frame is Frame.DQPM:
            (a, b), (c, d) = self.entries
            gap = max(_mirror_gap(a, d), _mirror_gap(b, c))
            if gap > _MIRROR_TOL:
                raise FrameError(f"dq± matrix breaks conjugate-mirror structure (gap {gap:.3e})")

    @classmethod
    def from_rows(
        cls,
        rows: Sequence[Sequence[RationalTransfer | complex]],
        frame: Frame = Frame.DQ,
    ) -> TransferMatrix2:
        """Build from a nested 2×2 sequence, coercing scalars to constants."""
        conv = [[e if isinstance(e, RationalTransfer) else RationalTransfer.constant(e) for e in r] for r in rows]
        return cls(((conv[0][0], conv[0][1]), (conv[1][0], conv[1][1])), frame)

    @classmethod
    def identity(cls, frame: Frame = Frame.DQ) -> TransferMatrix2:
        """Return the identity matrix in ``frame``."""
        return cls.from_rows([[1.0, 0.0], [0.0, 1.0]], frame)

    @classmethod
    def zeros(cls, frame: Frame = Frame.DQ) -> TransferMatrix2:
        """Return the zero matrix in ``frame``."""
        return cls.from_rows([[0.0, 0.0], [0.0, 0.0]], frame)

    def __getitem__(self, idx: tuple[int, int]) -> RationalTransfer:
        i, j = idx
        return self.entries[i][j]

    def __call__(self, s: complex) -> NDArray[np.complex128]:
        """Evaluate every entry at ``s`` and return a 2×2 complex array."""
        return np.array([[complex(self.entries[i][j](s)) for j in range(2)] for i in range(2)])  # type: ignore[arg-type]

    def _check_frame(self, other: TransferMatrix2) -> None:
        if other.frame is not self.frame:
            raise FrameError(f"frame mismatch: {self.frame.value} vs {other.frame.value}")

    def __add__(self, other: TransferMatrix2) -> TransferMatrix2:
        self._check_frame(other)
        return TransferMatrix2(
            tuple(tuple(self.entries[i][j] + other.entries[i][j] for j in range(2)) for i in range(2)),  # type: ignore[arg-type]
            self.frame,
        )

    def __matmul__(self, other: TransferMatrix2) -> TransferMatrix2:
        self._check_frame(other)
        e, f = self.entries, other.entries
        return TransferMatrix2(
            tuple(tuple(e[i][0] * f[0][j] + e[i][1] * f[1][j] for j in range(2)) for i in range(2)),  # type: ignore[arg-type]
            self.frame,
        )

    def scaled(self, gain: complex | RationalTransfer) -> TransferMatrix2:
        """Return every entry multiplied by ``gain``."""
        return TransferMatrix2(
            tuple(tuple(gain * self.entries[i][j] for j in range(2)) for i in range(2)),  # type: ignore[arg-type]
            self.frame,
        )

    def determinant(self) -> RationalTransfer:
        """Return ``g11 g22 - g12 g21``."""
        (a, b), (c, d) = self.entries
        return a * d - b * c


def common_denominator(items: Sequence[RationalTransfer]) -> list[RationalTransfer]:
    """Rewrite ``items`` over one shared denominator.

    Denominators are compared coefficient-wise; each distinct one enters
    the product once, so items built over the same denominator keep it.
    """
    distinct: list[ComplexArray] = []
    for it in items:
        if not any(np.array_equal(it.denominator, d) for d in distinct):
            distinct.append(it.denominator)
    common = np.ones(1, dtype=np.complex128)
    for d in distinct:
        common = np.polymul(common, d)
    out = []
    for it in items:
        rest = np.ones(1, dtype=np.complex128)
        for d in distinct:
            if not np.array_equal(it.denominator, d):
                rest = np.polymul(rest, d)
        out.append(RationalTransfer(np.polymul(it.numerator, rest), common, it.unit))
    return out


def _combine(terms: Sequence[tuple[complex, RationalTransfer]]) -> RationalTransfer:
    """Linear combination of transfers that already share a denominator."""
    den = terms[0][1].denominator
    num = np.zeros(1, dtype=np.complex128)
    for k, t in terms:
        num = np.polyadd(num, k * t.numerator)
    return RationalTransfer(num, den, terms[0][1].unit)


# -------- Operations ----------------------------------------------------------
def signal_to_dqpm(u_d: float, u_q: float) -> tuple[complex, complex]:
    """Map a real dq pair to its forward and backward complex space vectors.

    Parameters
    ----------
    u_d, u_q : float
        Direct and quadrature components.

    Returns
    -------
    tuple of complex
        ``(u_d + j u_q, u_d - j u_q)``.
    """
    return complex(u_d, u_q), complex(u_d, -u_q)


def signal_from_dqpm(u_plus: complex, u_minus: complex) -> tuple[float, float]:
    """Inverse of :func:`signal_to_dqpm` (real parts of the reconstruction)."""
    return ((u_plus + u_minus) / 2).real, ((u_plus - u_minus) / 2j).real


def model_to_dqpm(g_dq: TransferMatrix2) -> TransferMatrix2:
    """Map a real ``dq`` model to the ``dq±`` frame, ``T_j G T_j^-1``.

    Parameters
    ----------
    g_dq : TransferMatrix2
        Model tagged ``Frame.DQ``.

    Returns
    -------
    TransferMatrix2
        ``dq±``-tagged model.

    Raises
    ------
    FrameError
        If ``g_dq`` is not in the ``dq`` frame.
    """
    if g_dq.frame is not Frame.DQ:
        raise FrameError(f"model_to_dqpm expects a dq-frame model, got {g_dq.frame.value}")
    g11, g12, g21, g22 = common_denominator([g_dq[0, 0], g_dq[0, 1], g_dq[1, 0], g_dq[1, 1]])
    pp = _combine([(0.5, g11), (0.5, g22), (0.5j, g21), (-0.5j, g12)])
    pm = _combine([(0.5, g11), (-0.5, g22), (0.5j, g21), (0.5j, g12)])
    mp = _combine([(0.5, g11), (-0.5, g22), (-0.5j, g21), (-0.5j, g12)])
    mm = _combine([(0.5, g11), (0.5, g22), (-0.5j, g21), (0.5j, g12)])
    return TransferMatrix2(((pp, pm), (mp, mm)), Frame.DQPM)


def model_from_dqpm(g_pm: TransferMatrix2) -> TransferMatrix2:
    """Map a ``dq±`` model back to the real ``dq`` frame, ``T_j^-1 G T_j``.

    Raises
    ------
    FrameError
        If ``g_pm`` is not in the ``dq±`` frame.
    """
    if g_pm.frame is not Frame.DQPM:
        raise FrameError(f"model_from_dqpm expects a dq± model, got {g_pm.frame.value}")
    a, b, c, d = common_denominator([g_pm[0, 0], g_pm[0, 1], g_pm[1, 0], g_pm[1, 1]])
    g11 = _combine([(0.5, a), (0.5, b), (0.5, c), (0.5, d)])
    g12 = _combine([(0.5j, a), (-0.5j, b), (0.5j, c), (-0.5j, d)])
    g21 = _combine([(-0.5j, a), (-0.5j, b), (0.5j, c), (0.5j, d)])
    g22 = _combine([(0.5, a), (-0.5, b), (-0.5, c), (0.5, d)])
    return TransferMatrix2(((g11, g12), (g21, g22)), Frame.DQ)


# -------- Operating point -----------------------------------------------------
@dataclass(frozen=True, slots=True)
class OperatingPoint:
    """Steady-state quantities a linearization is anchored to.

    Currents follow the load convention: positive into the inverter port.

    Parameters
    ----------
    v_d0, v_q0 : float
        Port voltage in the device's steady frame, pu.
    i_d0, i_q0 : float
        Port current in the device's steady frame, pu.
    theta0 : float, default 0.0
        Steady frame angle relative to the global frame, rad.
    omega0 : float, default ``OMEGA0``
        Frame angular frequency, rad/s.
    """

    v_d0: float
    v_q0: float
    i_d0: float
    i_q0: float
    theta0: float = 0.0
    omega0: float = OMEGA0

    def __post_init__(self) -> None:
        if not self.omega0 > 0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")
        vals = (self.v_d0, self.v_q0, self.i_d0, self.i_q0, self.theta0, self.omega0)
        if not all(np.isfinite(vals)):
            raise ValueError(f"operating point must be finite, got {vals}")

    @property
    def voltage(self) -> complex:
        """Port voltage as a complex number ``v_d0 + j v_q0``."""
        return complex(self.v_d0, self.v_q0)

    @property
    def current(self) -> complex:
        """Port current as a complex number ``i_d0 + j i_q0``."""
        return complex(self.i_d0, self.i_q0)


def frame_rotation(op: OperatingPoint, steady_quantity: tuple[complex, complex]) -> TransferMatrix2:
    """Linearized gain from the frame-angle perturbation to a rotated signal.

    A signal observed in a frame rotated by ``θ`` is ``u e^{-jθ}``; around a
    steady value ``(U_+0, U_-0)`` the induced ``dq±`` perturbation is
    ``(-j U_+0 θ̂, +j U_-0 θ̂)``. Since ``θ̂`` is real its ``dq±`` image is
    ``(θ̂, θ̂)``, so the gain is the diagonal matrix returned here.

    Parameters
    ----------
    op : OperatingPoint
        Operating point the linearization belongs to.
    steady_quantity : tuple of complex
        ``(U_+0, U_-0)`` of the signal, e.g. ``signal_to_dqpm(op.i_d0, op.i_q0)``.

    Returns
    -------
    TransferMatrix2
        Constant ``dq±`` gain ``diag(-j U_+0, +j U_-0)``.
    """
    u_plus, u_minus = steady_quantity
    logger.debug("frame rotation at omega0=%.3f for steady value %s", op.omega0, steady_quantity)
    return TransferMatrix2.from_rows([[-1j * u_plus, 0.0], [0.0, 1j * u_minus]], Frame.DQPM)


def poles_of(
    tf: RationalTransfer,
    part: Literal["denominator", "numerator"] = "denominator",
) -> NDArray[np.complex128]:
    """Roots of the denominator (poles) or numerator (e.g. characteristic roots).

    Roots are the eigenvalues of the balanced companion matrix.

    Parameters
    ----------
    tf : RationalTransfer
        Transfer function to analyse.
    part : {"denominator", "numerator"}, default "denominator"
        Which polynomial to factor.

    Returns
    -------
    numpy.ndarray of complex
        Roots sorted by descending real part, ties by descending imaginary part.

    Raises
    ------
    NumericalError
        If the polynomial is of degree zero or has non-finite coefficients.
    """
    coeffs = tf.denominator if part == "denominator" else tf.numerator
    if not np.all(np.isfinite(coeffs)):
        raise NumericalError(f"non-finite coefficients in {part}")
    if coeffs.size < 2:
        raise NumericalError(f"{part} is a degree-0 polynomial; no roots to extract")
    monic = coeffs[1:] / coeffs[0]
    n = monic.size
    companion = np.zeros((n, n), dtype=np.complex128)
    companion[0, :] = -monic
    if n > 1:
        companion[np.arange(1, n), np.arange(n - 1)] = 1.0
    balanced, _ = scipy.linalg.matrix_balance(companion)
    roots = scipy.linalg.eigvals(balanced)
    return sort_roots(roots)


def deflate(coeffs: ArrayLike, known: ArrayLike) -> ComplexArray:
    """Strike ``known`` roots from a polynomial that contains them.

    Each known root removes the computed root nearest to it (one-to-one
    assignment) and the polynomial is rebuilt from its leading coefficient
    and the roots left over.

    Parameters
    ----------
    coeffs : array_like of complex
        Polynomial coefficients in descending powers of ``s``.
    known : array_like of complex
        Roots to remove, with multiplicity.

    Returns
    -------
    numpy.ndarray of complex
        Coefficients of the quotient.

    Raises
    ------
    NumericalError
        If the polynomial has fewer roots than ``known``.
    """
    p = _as_coefficients(coeffs, name="polynomial")
    drop = np.atleast_1d(np.asarray(known, dtype=np.complex128))
    if drop.size == 0 or (p.size == 1 and p[0] == 0):
        return p
    if p.size - 1 < drop.size:
        raise NumericalError(f"cannot remove {drop.size} roots from a degree-{p.size - 1} polynomial")
    roots = poles_of(RationalTransfer.polynomial(p), "numerator")
    _, cols = scipy.optimize.linear_sum_assignment(np.abs(drop[:, None] - roots[None, :]))
    keep = np.delete(roots, cols)
    return np.asarray(p[0] * np.poly(keep), dtype=np.complex128)


def sort_roots(roots: ArrayLike) -> NDArray[np.complex128]:
    """Sort by descending real part, ties by descending imaginary part."""
    r = np.asarray(roots, dtype=np.complex128)
    order = np.lexsort((-r.imag, -r.real))
    return r[order]
