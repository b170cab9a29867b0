"""Tests for inverter parameters, operating points and linearized models in ``devices.py``."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest
import scipy.optimize

from gfm_gfl_duality.devices import (
    TWO_PI,
    DeviceKind,
    DeviceModel,
    DeviceSteady,
    GflParams,
    GfmParams,
    GridImpedance,
    device_state_count,
    frame_embedding,
    g_fd,
    g_pll,
    infinite_bus_operating_point,
    inner_admittance_gfl,
    inner_impedance_gfm,
    modified_swing,
    smib_state_matrix,
    swing_char_gfl,
    swing_char_gfm,
    swing_modes,
    sync_virtual_port,
)
from gfm_gfl_duality.dqframe import OMEGA0, Frame, OperatingPoint, poles_of
from gfm_gfl_duality.errors import IdealStiffGridError


def _matched(reference: np.ndarray, other: np.ndarray) -> np.ndarray:
    """``other`` reordered to pair each entry with its nearest ``reference`` entry."""
    rows, cols = scipy.optimize.linear_sum_assignment(np.abs(reference[:, None] - other[None, :]))
    out = np.empty_like(reference)
    out[rows] = other[cols]
    return out


# -------------------------------------------------------------- parameters ---


class TestParams:
    def test_gfm_defaults_and_gains(self, gfm_params) -> None:
        assert gfm_params.kind is DeviceKind.GFM
        np.testing.assert_allclose(gfm_params.t_f, 1 / (TWO_PI * 15))
        np.testing.assert_allclose(gfm_params.inductance, 0.05 / OMEGA0)
        np.testing.assert_allclose(gfm_params.k_pc, 4 * gfm_params.omega_v * gfm_params.inductance)
        np.testing.assert_allclose(gfm_params.k_iv, 0.15 * gfm_params.omega_v**2 * gfm_params.capacitance)

    def test_gfl_gain_tuning(self, gfl_params) -> None:
        w = TWO_PI * 15
        assert gfl_params.k_p == pytest.approx(w)
        assert gfl_params.k_i == pytest.approx(w**2 / 4)
        assert gfl_params.current_ref == complex(-0.5, 0.0)
        explicit = gfl_params.with_overrides(kp_pll=10.0, ki_pll=0.0)
        assert (explicit.k_p, explicit.k_i) == (10.0, 0.0)

    def test_from_hz(self) -> None:
        p = GfmParams.from_hz(f_f=10.0, f_v=200.0, m=0.1)
        np.testing.assert_allclose([p.omega_f, p.omega_v, p.m], [TWO_PI * 10, TWO_PI * 200, 0.1])
        q = GflParams.from_hz(f_pll=60.0, f_i=150.0)
        np.testing.assert_allclose([q.omega_pll, q.omega_i], [TWO_PI * 60, TWO_PI * 150])

    @pytest.mark.parametrize(
        "kwargs, match",
        [({"m": 0.0}, "droop"), ({"omega_f": -1.0}, "omega_f"), ({"x_f": 0.0}, "filter")],
    )
    def test_gfm_validation(self, kwargs, match) -> None:
        with pytest.raises(ValueError, match=match):
            GfmParams(**kwargs)

    def test_gfl_validation(self) -> None:
        with pytest.raises(ValueError, match="PLL gains"):
            GflParams(ki_pll=-1.0)
        with pytest.raises(ValueError, match="omega_i"):
            GflParams(omega_i=-1.0)

    def test_unknown_override_rejected(self, gfm_params) -> None:
        with pytest.raises(ValueError, match="unknown GfmParams parameter"):
            gfm_params.with_overrides(omega_pll=1.0)

    def test_state_counts(self, gfm_params, gfl_params) -> None:
        assert device_state_count(gfm_params) == 10
        assert device_state_count(gfl_params) == 8


class TestGridImpedance:
    def test_from_scale(self) -> None:
        g = GridImpedance.from_scale(0.2)
        assert (g.r, g.x) == pytest.approx((0.04, 0.2))
        assert not g.is_short
        assert GridImpedance(0.0, 0.0).is_short

    def test_negative_rejected(self) -> None:
        with pytest.raises(ValueError, match="non-negative"):
            GridImpedance(-0.1, 0.2)

    def test_admittance_inverts_impedance(self) -> None:
        g = GridImpedance.from_scale(0.3)
        s = 2j * np.pi * 7.0
        prod = g.impedance()(s) @ g.admittance()(s)
        np.testing.assert_allclose(prod, np.eye(2), atol=1e-12)


# --------------------------------------------------------- operating points ---


class TestInfiniteBusOperatingPoint:
    def test_gfm_power_and_source_magnitude(self, gfm_params, gfm_grid) -> None:
        op = infinite_bus_operating_point(gfm_params, gfm_grid)
        assert (op.v_d0, op.v_q0) == (gfm_params.v_ref, 0.0)
        p = op.v_d0 * op.i_d0 + op.v_q0 * op.i_q0
        np.testing.assert_allclose(p, gfm_params.p_ref, rtol=1e-12)
        np.testing.assert_allclose(abs(op.voltage + gfm_grid.complex * op.current), 1.0, rtol=1e-12)

    def test_gfl_current_and_source_magnitude(self, gfl_params, gfl_grid) -> None:
        op = infinite_bus_operating_point(gfl_params, gfl_grid)
        assert op.v_q0 == 0.0
        filter_current = op.current - 1j * gfl_params.b_f * op.voltage
        np.testing.assert_allclose(filter_current, gfl_params.current_ref, atol=1e-12)
        np.testing.assert_allclose(abs(op.voltage + gfl_grid.complex * op.current), 1.0, rtol=1e-12)

    def test_gfm_ideal_stiff_grid(self, gfm_params) -> None:
        with pytest.raises(IdealStiffGridError):
            infinite_bus_operating_point(gfm_params, GridImpedance(0.0, 0.0))

    def test_infeasible_power(self) -> None:
        with pytest.raises(ValueError, match="no GFM equilibrium"):
            infinite_bus_operating_point(GfmParams(p_ref=-5.0), GridImpedance.from_scale(1.0))


# ------------------------------------------------------ synchronization loops ---


class TestSwingCharacteristics:
    def test_gfm_coefficients(self, gfm_params) -> None:
        op = OperatingPoint(1.0, 0.0, -0.5, 0.2)
        s_char = swing_char_gfm(gfm_params, op)
        mw = gfm_params.m * OMEGA0
        np.testing.assert_allclose(
            s_char.numerator, [gfm_params.t_f / mw, 1 / mw, -op.v_d0 * op.i_q0], rtol=1e-15
        )

    def test_gfl_critically_damped_double_root(self, gfl_params) -> None:
        op = OperatingPoint(1.0, 0.0, -0.5, 0.0)
        a, b, c = swing_char_gfl(gfl_params, op).numerator.real
        assert abs(b * b - 4 * a * c) <= 1e-10 * b * b
        np.testing.assert_allclose(-b / (2 * a), -gfl_params.omega_pll / 2, rtol=1e-10)

    def test_gfl_first_order_without_integrator(self) -> None:
        p = GflParams(kp_pll=50.0, ki_pll=0.0)
        op = OperatingPoint(0.9, 0.0, -0.5, 0.0)
        np.testing.assert_allclose(poles_of(swing_char_gfl(p, op), "numerator"), [-45.0])
        assert g_pll(p).is_polynomial

    def test_gfl_without_gains_rejected(self) -> None:
        with pytest.raises(ValueError, match="k_p = k_i = 0"):
            swing_char_gfl(GflParams(kp_pll=0.0, ki_pll=0.0), OperatingPoint(1.0, 0.0, 0.0, 0.0))

    def test_droop_controller_dc_gain(self, gfm_params) -> None:
        np.testing.assert_allclose(g_fd(gfm_params)(0.0), gfm_params.m)
        assert poles_of(g_fd(gfm_params))[0] == pytest.approx(-gfm_params.omega_f)


class TestDeviceModel:
    def test_ports_are_dqpm(self, gfm_model, gfl_model) -> None:
        assert gfm_model.port.frame is Frame.DQPM
        assert gfl_model.port.frame is Frame.DQPM
        assert sync_virtual_port(gfm_model).frame is Frame.DQPM

    def test_stiff_current_loop_has_small_low_frequency_admittance(self, gfl_params, gfl_op) -> None:
        y = inner_admittance_gfl(gfl_params, gfl_op)(2j * np.pi * 0.5)
        assert np.linalg.norm(y, 2) < 0.1

    def test_gfm_on_ideal_stiff_grid_raises(self, gfm_params, gfm_grid) -> None:
        dev = DeviceModel.at_infinite_bus(gfm_params, gfm_grid)
        with pytest.raises(IdealStiffGridError, match="ideal stiff"):
            smib_state_matrix(dev, GridImpedance(0.0, 0.0))

    def test_gfl_on_ideal_stiff_grid_drops_port_states(self, gfl_params, gfl_grid) -> None:
        dev = DeviceModel.at_infinite_bus(gfl_params, gfl_grid)
        full, _ = smib_state_matrix(dev, gfl_grid)
        clamped, _ = smib_state_matrix(dev, GridImpedance(0.0, 0.0))
        assert clamped.shape[0] == full.shape[0] - 4

    def test_frozen_pll_integrator_removed(self, gfl_grid) -> None:
        dev = DeviceModel.at_infinite_bus(GflParams(ki_pll=0.0), gfl_grid)
        matrix, _ = smib_state_matrix(dev, gfl_grid)
        assert matrix.shape[0] == device_state_count(dev.params) + 2 - 1

    def test_gfl_pll_bandwidth_sets_low_frequency_mode(self) -> None:
        # very weak PLL on a stiff grid approaches the ideal-source characteristic
        p = GflParams.from_hz(f_pll=2.0)
        grid = GridImpedance.from_scale(0.01)
        dev = DeviceModel.at_infinite_bus(p, grid)
        modes = swing_modes(dev, grid)
        ideal = poles_of(swing_char_gfl(p, dev.op), "numerator")
        slowest = modes[np.argsort(np.abs(modes))[:2]]
        np.testing.assert_allclose(slowest.sum().real, ideal.sum().real, rtol=0.1)


# ------------------------------------------------------------- inner loops ---


class TestInnerLoops:
    @staticmethod
    def _shifted(s: complex) -> np.ndarray:
        return np.array([s + 1j * OMEGA0, s - 1j * OMEGA0])

    @pytest.mark.parametrize("s", [2j * np.pi * 5.0, 2j * np.pi * 120.0, 3.0 + 40j])
    def test_gfm_open_loops_leave_bare_filter(self, gfm_op, s) -> None:
        p = GfmParams(omega_v=0.0)
        sh = self._shifted(s)
        expected = np.diag(1.0 / (p.capacitance * sh + 1.0 / (p.inductance * sh)))
        np.testing.assert_allclose(inner_impedance_gfm(p, gfm_op)(s), expected, rtol=1e-6, atol=1e-9)

    def test_gfm_voltage_loop_holds_low_frequency_impedance(self, gfm_params, gfm_op) -> None:
        z = inner_impedance_gfm(gfm_params, gfm_op)(2j * np.pi * 5.0)
        assert np.linalg.norm(z, 2) < 0.1

    def test_gfm_impedance_vanishes_with_fast_loops(self, gfm_op) -> None:
        s = 2j * np.pi * 5.0
        norms = [
            np.linalg.norm(inner_impedance_gfm(GfmParams.from_hz(f_v=f), gfm_op)(s), 2) for f in (250.0, 1000.0, 4000.0)
        ]
        assert norms[0] > norms[1] > norms[2]
        assert norms[2] < 1e-5

    @pytest.mark.parametrize("s", [2j * np.pi * 5.0, 2j * np.pi * 120.0, 3.0 + 40j])
    def test_gfl_open_loop_leaves_passive_filter(self, gfl_op, s) -> None:
        p = GflParams(omega_i=0.0)
        sh = self._shifted(s)
        expected = np.diag(1.0 / (p.inductance * sh) + p.capacitance * sh)
        np.testing.assert_allclose(inner_admittance_gfl(p, gfl_op)(s), expected, rtol=1e-6, atol=1e-9)

    def test_gfl_fast_current_loop_leaves_shunt_capacitor(self, gfl_op) -> None:
        s = 2j * np.pi * 5.0
        shunt = np.diag(GflParams().capacitance * self._shifted(s))
        gaps = [
            np.linalg.norm(inner_admittance_gfl(GflParams.from_hz(f_i=f), gfl_op)(s) - shunt, 2)
            for f in (250.0, 2500.0, 25000.0)
        ]
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-3

    def test_fast_gfm_loops_rotate_the_voltage_with_the_frame(self, gfm_op) -> None:
        w = frame_embedding(GfmParams.from_hz(f_v=4000.0), gfm_op)
        s = 2j * np.pi * 5.0
        np.testing.assert_allclose([w[0](s), w[1](s)], [1j * gfm_op.v_d0, -1j * gfm_op.v_d0], rtol=1e-3)

    def test_fast_gfl_loop_rotates_the_filter_current_with_the_frame(self, gfl_op) -> None:
        p = GflParams.from_hz(f_i=25000.0)
        i_f = DeviceSteady.from_operating_point(gfl_op).filter_current(p)
        w = frame_embedding(p, gfl_op)
        s = 2j * np.pi * 5.0
        np.testing.assert_allclose([w[0](s), w[1](s)], [1j * i_f, -1j * np.conj(i_f)], rtol=1e-3)

    def test_inner_and_embedding_share_a_denominator(self, gfm_model) -> None:
        den = gfm_model.inner[0, 0].denominator
        for tf in (gfm_model.inner[0, 1], gfm_model.inner[1, 1], *gfm_model.embedding):
            np.testing.assert_array_equal(tf.denominator, den)


# -------------------------------------------------- synchronization ports ---


class TestSyncVirtualPort:
    def test_gfm_poles_are_current_angle_swing_roots(self, gfm_model) -> None:
        poles = poles_of(sync_virtual_port(gfm_model)[0, 0])
        swing = poles_of(swing_char_gfm(gfm_model.params, gfm_model.op), "numerator")
        np.testing.assert_allclose(poles, swing, rtol=1e-8)

    def test_gfl_poles_are_voltage_angle_swing_roots(self, gfl_model) -> None:
        poles = poles_of(sync_virtual_port(gfl_model)[0, 0])
        swing = poles_of(swing_char_gfl(gfl_model.params, gfl_model.op), "numerator")
        np.testing.assert_allclose(poles, swing, rtol=1e-8)

    def test_zero_voltage_rejected(self, gfm_params) -> None:
        dev = DeviceModel.build(gfm_params, OperatingPoint(1.0, 0.0, -0.5, 0.1))
        dead = dataclasses.replace(dev, op=OperatingPoint(0.0, 0.0, -0.5, 0.1))
        with pytest.raises(ValueError, match="zero steady voltage"):
            sync_virtual_port(dead)


# ------------------------------------------------ single inverter on a bus ---


def _smib_case(kind: str) -> tuple[DeviceModel, GridImpedance]:
    params, grid = {
        "gfm": (GfmParams(), GridImpedance.from_scale(0.2)),
        "gfm-weak": (GfmParams(m=0.02), GridImpedance.from_scale(0.6)),
        "gfl": (GflParams(), GridImpedance.from_scale(0.4)),
        "gfl-no-integrator": (GflParams(ki_pll=0.0), GridImpedance.from_scale(0.4)),
        "gfl-stiff": (GflParams(), GridImpedance(0.0, 0.0)),
    }[kind]
    return DeviceModel.at_infinite_bus(params, grid), grid


SMIB_CASES = ["gfm", "gfm-weak", "gfl", "gfl-no-integrator", "gfl-stiff"]


class TestModifiedSwing:
    @pytest.mark.parametrize("kind", SMIB_CASES)
    def test_roots_are_swing_modes(self, kind) -> None:
        dev, grid = _smib_case(kind)
        roots = poles_of(modified_swing(dev, grid), "numerator")
        modes = swing_modes(dev, grid)
        assert roots.size == modes.size
        np.testing.assert_allclose(_matched(modes, roots), modes, rtol=1e-5)
        np.testing.assert_allclose(roots[0].real, modes[0].real, rtol=1e-5, atol=1e-6)

    @pytest.mark.parametrize("kind", ["gfm", "gfm-weak", "gfl", "gfl-no-integrator"])
    def test_closed_port_is_singular_at_dominant_mode(self, kind) -> None:
        dev, grid = _smib_case(kind)
        lam = complex(poles_of(modified_swing(dev, grid), "numerator")[0])
        zg = grid.impedance(dev.op.omega0)

        def closure(s: complex) -> complex:
            if dev.kind is DeviceKind.GFM:
                return complex(np.linalg.det(dev.port(s) + zg(s)))
            return complex(np.linalg.det(np.eye(2) + zg(s) @ dev.port(s)))

        assert abs(closure(lam)) < 1e-3 * abs(closure(lam * 1.01))

    def test_reduces_to_swing_characteristic_without_interaction(self, gfl_params) -> None:
        # stiff grid: the PLL sees the ideal source and the inner loop stays apart
        dev, grid = _smib_case("gfl-stiff")
        roots = poles_of(modified_swing(dev, grid), "numerator")
        ideal = poles_of(swing_char_gfl(gfl_params, dev.op), "numerator")
        inner = poles_of(dev.inner[0, 0])
        expected = np.concatenate([ideal, inner])
        np.testing.assert_allclose(_matched(expected, roots), expected, rtol=1e-6)

    @pytest.mark.parametrize("part", ["inner", "embedding"])
    def test_characteristic_follows_the_port_models(self, gfm_model, gfm_grid, part) -> None:
        base = poles_of(modified_swing(gfm_model, gfm_grid), "numerator")
        if part == "inner":
            changed = dataclasses.replace(gfm_model, inner=gfm_model.inner.scaled(2.0))
        else:
            changed = dataclasses.replace(gfm_model, embedding=tuple(0.5 * w for w in gfm_model.embedding))
        moved = poles_of(modified_swing(changed, gfm_grid), "numerator")
        assert moved.size == base.size
        assert np.max(np.abs(_matched(base, moved) - base) / np.abs(base)) > 1e-3

    def test_gfm_on_ideal_stiff_grid_raises(self, gfm_model) -> None:
        with pytest.raises(IdealStiffGridError):
            modified_swing(gfm_model, GridImpedance(0.0, 0.0))

    def test_resistive_grid_rejected(self, gfl_model) -> None:
        with pytest.raises(ValueError, match="X > 0"):
            modified_swing(gfl_model, GridImpedance(0.1, 0.0))
