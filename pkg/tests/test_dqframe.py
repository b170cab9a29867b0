"""Tests for the dq± frame algebra in ``dqframe.py``."""

from __future__ import annotations

import numpy as np
import pytest
import scipy.optimize

from gfm_gfl_duality.dqframe import (
    OMEGA0,
    Frame,
    OperatingPoint,
    RationalTransfer,
    TransferMatrix2,
    deflate,
    frame_rotation,
    model_from_dqpm,
    model_to_dqpm,
    poles_of,
    signal_from_dqpm,
    signal_to_dqpm,
    sort_roots,
)
from gfm_gfl_duality.errors import FrameError, NumericalError

T_J = np.array([[1.0, 1j], [1.0, -1j]])
SAMPLE_S = (0.3j, 2.0 + 5.0j, -1.0 + 40.0j, 314.0j)


def random_real_dq(rng: np.random.Generator) -> TransferMatrix2:
    """Real-coefficient 2x2 model with random first/second-order entries."""
    rows = []
    for _ in range(2):
        row = []
        for _ in range(2):
            num = rng.normal(size=rng.integers(1, 3))
            den = np.concatenate([[1.0], np.abs(rng.normal(size=rng.integers(1, 3))) + 0.1])
            row.append(RationalTransfer(num, den))
        rows.append(row)
    return TransferMatrix2.from_rows(rows)


# ------------------------------------------------------------ scalar algebra ---


class TestRationalTransfer:
    def test_strips_leading_zeros(self) -> None:
        tf = RationalTransfer([0.0, 0.0, 2.0, 1.0], [0.0, 1.0, 3.0])
        np.testing.assert_allclose(tf.numerator, [2.0, 1.0])
        np.testing.assert_allclose(tf.denominator, [1.0, 3.0])
        assert tf.order == (1, 1)

    def test_rejects_zero_denominator(self) -> None:
        with pytest.raises(ValueError, match="denominator"):
            RationalTransfer([1.0], [0.0, 0.0])

    def test_rejects_non_finite(self) -> None:
        with pytest.raises(ValueError, match="finite"):
            RationalTransfer([1.0, np.nan])

    def test_arithmetic_matches_pointwise(self) -> None:
        a = RationalTransfer([1.0, 2.0], [1.0, 0.5, 3.0])
        b = RationalTransfer([0.5j, 1.0], [1.0, 4.0])
        for s in SAMPLE_S:
            np.testing.assert_allclose((a + b)(s), a(s) + b(s), rtol=1e-12)
            np.testing.assert_allclose((a - b)(s), a(s) - b(s), rtol=1e-12)
            np.testing.assert_allclose((a * b)(s), a(s) * b(s), rtol=1e-12)
            np.testing.assert_allclose((a / b)(s), a(s) / b(s), rtol=1e-12)
            np.testing.assert_allclose((2.0 - a)(s), 2.0 - a(s), rtol=1e-12)

    def test_inverse_of_zero_raises(self) -> None:
        with pytest.raises(ZeroDivisionError):
            RationalTransfer.constant(0.0).inverse()

    def test_shift_evaluates_offset_frequency(self) -> None:
        tf = RationalTransfer([1.0, 3.0], [1.0, 2.0, 5.0])
        shifted = tf.shift(OMEGA0)
        for s in SAMPLE_S:
            np.testing.assert_allclose(shifted(s), tf(s + 1j * OMEGA0), rtol=1e-10)

    def test_mirror_is_conjugate_reflection(self) -> None:
        tf = RationalTransfer([1.0 + 2.0j, 3.0], [1.0, 2.0 - 1.0j])
        for s in SAMPLE_S:
            np.testing.assert_allclose(tf.mirror()(s), np.conj(tf(np.conj(s))), rtol=1e-12)

    def test_cancel_is_opt_in(self) -> None:
        tf = RationalTransfer(np.poly([-1.0, -3.0]), np.poly([-1.0, -2.0]))
        assert tf.order == (2, 2)
        reduced = tf.cancel()
        assert reduced.order == (1, 1)
        np.testing.assert_allclose(poles_of(reduced), [-2.0], atol=1e-9)

    def test_unit_tag_survives_matching_operands(self) -> None:
        a = RationalTransfer([1.0], unit="pu")
        assert (a + a).unit == "pu"
        assert (a + RationalTransfer([1.0], unit="rad")).unit == ""


# ---------------------------------------------------------------- dq± frame ---


class TestSignals:
    def test_round_trip(self, rng) -> None:
        for u_d, u_q in rng.normal(size=(20, 2)):
            up, um = signal_to_dqpm(u_d, u_q)
            assert um == np.conj(up)
            np.testing.assert_allclose(signal_from_dqpm(up, um), (u_d, u_q), atol=1e-15)


class TestModelConversion:
    def test_round_trip_and_mirror_on_random_models(self, rng) -> None:
        for _ in range(100):
            g = random_real_dq(rng)
            pm = model_to_dqpm(g)
            assert pm.frame is Frame.DQPM
            back = model_from_dqpm(pm)
            for s in SAMPLE_S:
                np.testing.assert_allclose(back(s), g(s), rtol=1e-12, atol=1e-12)
                # lower row mirrors the upper row
                np.testing.assert_allclose(pm(s)[1, 1], np.conj(pm(np.conj(s))[0, 0]), rtol=1e-12, atol=1e-12)
                np.testing.assert_allclose(pm(s)[1, 0], np.conj(pm(np.conj(s))[0, 1]), rtol=1e-12, atol=1e-12)

    def test_matches_similarity_transform(self, rng) -> None:
        g = random_real_dq(rng)
        pm = model_to_dqpm(g)
        for s in SAMPLE_S:
            expected = T_J @ g(s) @ np.linalg.inv(T_J)
            np.testing.assert_allclose(pm(s), expected, rtol=1e-12, atol=1e-12)

    def test_wrong_frame_rejected(self, rng) -> None:
        g = random_real_dq(rng)
        with pytest.raises(FrameError, match="dq-frame"):
            model_to_dqpm(model_to_dqpm(g))
        with pytest.raises(FrameError, match="dq± model"):
            model_from_dqpm(g)

    def test_broken_mirror_rejected(self) -> None:
        with pytest.raises(FrameError, match="conjugate-mirror"):
            TransferMatrix2.from_rows([[1.0, 0.0], [0.0, 2.0]], Frame.DQPM)

    def test_mixed_frame_arithmetic_rejected(self) -> None:
        with pytest.raises(FrameError, match="frame mismatch"):
            TransferMatrix2.identity(Frame.DQ) + TransferMatrix2.identity(Frame.DQPM)

    def test_cross_coupling_becomes_diagonal(self) -> None:
        x = 0.3
        pm = model_to_dqpm(TransferMatrix2.from_rows([[0.0, -x], [x, 0.0]]))
        for s in SAMPLE_S:
            np.testing.assert_allclose(pm(s), np.diag([1j * x, -1j * x]), atol=1e-15)

    def test_rl_branch_shifts_by_the_frame_frequency(self) -> None:
        r, ind = 0.04, 0.2 / OMEGA0
        z = RationalTransfer.polynomial([ind, r])
        pm = model_to_dqpm(TransferMatrix2.from_rows([[z, -OMEGA0 * ind], [OMEGA0 * ind, z]]))
        for s in SAMPLE_S:
            expected = np.diag([r + (s + 1j * OMEGA0) * ind, r + (s - 1j * OMEGA0) * ind])
            np.testing.assert_allclose(pm(s), expected, rtol=1e-13, atol=1e-15)

    def test_matmul_and_determinant(self, rng) -> None:
        a, b = random_real_dq(rng), random_real_dq(rng)
        s = 1.0 + 3.0j
        np.testing.assert_allclose((a @ b)(s), a(s) @ b(s), rtol=1e-11)
        np.testing.assert_allclose(a.determinant()(s), np.linalg.det(a(s)), rtol=1e-11)


class TestFrameRotation:
    def test_diagonal_gain(self) -> None:
        op = OperatingPoint(1.0, 0.0, -0.5, 0.1)
        gain = frame_rotation(op, signal_to_dqpm(op.i_d0, op.i_q0))
        m = gain(0.0)
        np.testing.assert_allclose(m, np.diag([-1j * (-0.5 + 0.1j), 1j * (-0.5 - 0.1j)]))

    def test_rotated_current_and_voltage_components(self) -> None:
        op = OperatingPoint(1.02, 0.0, -0.5, 0.13)
        ones = np.array([1.0, 1.0])
        i_hat = frame_rotation(op, signal_to_dqpm(op.i_d0, op.i_q0))(0.0) @ ones
        v_hat = frame_rotation(op, signal_to_dqpm(op.v_d0, op.v_q0))(0.0) @ ones
        i_d, _ = signal_from_dqpm(*i_hat)
        v_d, v_q = signal_from_dqpm(*v_hat)
        assert i_d == pytest.approx(op.i_q0)
        assert v_q == pytest.approx(-op.v_d0)
        assert v_d == pytest.approx(op.v_q0, abs=1e-15)

    def test_operating_point_validation(self) -> None:
        with pytest.raises(ValueError, match="omega0"):
            OperatingPoint(1.0, 0.0, 0.0, 0.0, omega0=0.0)
        with pytest.raises(ValueError, match="finite"):
            OperatingPoint(np.inf, 0.0, 0.0, 0.0)


# -------------------------------------------------------------------- roots ---


class TestPolesOf:
    def test_known_roots_sorted(self) -> None:
        tf = RationalTransfer([1.0], np.poly([-1.0, 2.0, -0.5 + 3j, -0.5 - 3j]))
        np.testing.assert_allclose(poles_of(tf), [2.0, -0.5 + 3j, -0.5 - 3j, -1.0], atol=1e-10)

    def test_numerator_roots(self) -> None:
        tf = RationalTransfer(np.poly([-4.0, -5.0]), [1.0, 1.0])
        np.testing.assert_allclose(poles_of(tf, "numerator"), [-4.0, -5.0], atol=1e-10)

    def test_degree_zero_raises(self) -> None:
        with pytest.raises(NumericalError, match="degree-0"):
            poles_of(RationalTransfer.constant(2.0))

    def test_sort_ties_favour_positive_imaginary(self) -> None:
        np.testing.assert_array_equal(sort_roots([-1 - 2j, -1 + 2j, 0.5]), [0.5, -1 + 2j, -1 - 2j])

    @pytest.mark.parametrize("degree", range(1, 13))
    def test_random_polynomials(self, rng, degree) -> None:
        while True:
            roots = rng.uniform(-5.0, 5.0, degree) + 1j * rng.uniform(-5.0, 5.0, degree)
            gaps = np.abs(roots[:, None] - roots[None, :]) + np.eye(degree) * 10.0
            if np.min(gaps) > 0.3:
                break
        found = poles_of(RationalTransfer(rng.uniform(0.5, 2.0) * np.poly(roots), [1.0]), "numerator")
        rows, cols = scipy.optimize.linear_sum_assignment(np.abs(roots[:, None] - found[None, :]))
        np.testing.assert_allclose(found[cols], roots[rows], atol=1e-8)


class TestDeflate:
    def test_strikes_known_roots(self) -> None:
        p = 3.0 * np.poly([-1.0, -2.0 + 5j, -2.0 - 5j, -400.0, -1500.0])
        out = deflate(p, [-400.0, -1500.0])
        np.testing.assert_allclose(out, 3.0 * np.poly([-1.0, -2.0 + 5j, -2.0 - 5j]), rtol=1e-10)

    def test_nearest_root_is_struck_once(self) -> None:
        out = deflate(np.poly([-3.0, -3.0 + 1e-9, -7.0]), [-3.0])
        assert out.size == 3
        np.testing.assert_allclose(sorted(np.roots(out).real), [-7.0, -3.0], rtol=1e-7)

    def test_empty_and_zero_pass_through(self) -> None:
        np.testing.assert_array_equal(deflate([2.0, 1.0], []), [2.0, 1.0])
        np.testing.assert_array_equal(deflate([0.0], [-1.0]), [0.0])

    def test_too_many_roots_rejected(self) -> None:
        with pytest.raises(NumericalError, match="cannot remove 2 roots"):
            deflate([1.0, 2.0], [-2.0, -1.0])
