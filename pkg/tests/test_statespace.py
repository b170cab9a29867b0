"""Tests for the labelled state-space builder in ``statespace.py``."""

from __future__ import annotations

import numpy as np
import pytest

from gfm_gfl_duality.statespace import (
    LinearBuilder,
    StateLayout,
    deflate_symmetry,
    drop_states,
    numeric_jacobian,
    rotation,
)


class TestStateLayout:
    def test_offsets_and_labels(self) -> None:
        st = StateLayout()
        assert st.add("dev", "theta") == 0
        assert st.add("dev", "xi", 2, ("d", "q")) == 1
        assert st.add("line", "i", 2) == 3
        assert st.size == 5
        assert st.labels[1:3] == [("dev", "xi.d"), ("dev", "xi.q")]
        assert st.labels[3] == ("line", "i.re")
        assert st.offset("line", "i") == 3
        assert st.has("dev", "theta")
        assert not st.has("dev", "omega")

    def test_duplicate_rejected(self) -> None:
        st = StateLayout()
        st.add("dev", "theta")
        with pytest.raises(ValueError, match="duplicate"):
            st.add("dev", "theta")

    def test_size_validated(self) -> None:
        with pytest.raises(ValueError, match="size"):
            StateLayout().add("dev", "x", 3)


class TestLinearBuilder:
    def test_jmul_and_rotate_act_like_complex_products(self) -> None:
        b = LinearBuilder(4)
        x = np.array([0.3, -1.2, 2.0, 0.5])
        z = complex(x[2], x[3])
        rows = b.select(2)
        jz = b.jmul(rows) @ x
        np.testing.assert_allclose(jz, [(1j * z).real, (1j * z).imag])
        rz = b.rotate(rows, 0.7) @ x
        w = z * np.exp(0.7j)
        np.testing.assert_allclose(rz, [w.real, w.imag])
        np.testing.assert_allclose(rotation(np.pi / 2) @ [1.0, 0.0], [0.0, 1.0], atol=1e-15)

    def test_stamp_accumulates(self) -> None:
        b = LinearBuilder(3)
        b.stamp(0, b.select(1, 1), 2.0)
        b.stamp(0, b.select(2, 1), -1.0)
        b.stamp(0, b.select(1, 1))
        np.testing.assert_allclose(b.matrix[0], [0.0, 3.0, -1.0])


class TestNumericJacobian:
    def test_matches_analytic(self) -> None:
        def f(x):
            return np.array([np.sin(x[0]) * x[1], x[0] ** 2 - 3 * x[1]])

        x = np.array([0.4, 1.7])
        expected = np.array([[np.cos(0.4) * 1.7, np.sin(0.4)], [0.8, -3.0]])
        np.testing.assert_allclose(numeric_jacobian(f, x), expected, rtol=1e-8)


class TestReductions:
    def test_drop_states(self) -> None:
        m = np.arange(16.0).reshape(4, 4)
        reduced, keep = drop_states(m, [1, 3])
        np.testing.assert_array_equal(keep, [0, 2])
        np.testing.assert_allclose(reduced, [[0.0, 2.0], [8.0, 10.0]])

    def test_deflate_removes_zero_eigenvalue(self, rng) -> None:
        # matrix with a known null vector g and eigenvalues {0, -1, -2, -3}
        t = rng.normal(size=(4, 4)) + 4 * np.eye(4)
        m = t @ np.diag([0.0, -1.0, -2.0, -3.0]) @ np.linalg.inv(t)
        g = t[:, 0]
        reduced = deflate_symmetry(m, g, int(np.argmax(np.abs(g))))
        np.testing.assert_allclose(np.sort(np.linalg.eigvals(reduced).real), [-3.0, -2.0, -1.0], atol=1e-9)

    def test_deflate_requires_pivot_component(self) -> None:
        with pytest.raises(ValueError, match="pivot"):
            deflate_symmetry(np.zeros((2, 2)), np.array([0.0, 1.0]), 0)
