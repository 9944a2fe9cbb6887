"""Charts, fields, forms and their serialization."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crlab.fields import (Chart, ChartError, Field, Form, exterior_d, integrate, load_field,
                          partial_derivative, save_field, volume_form, wedge)
from crlab.phstructure import random_bandlimited


def _trig(chart, kx, ky, kz):
    x, y, z = chart.nodes()
    return Field(chart, np.exp(1j * (kx * x + ky * y + kz * z)))


class TestChart:
    def test_rejects_odd_or_small_grids(self):
        with pytest.raises(ChartError):
            Chart.periodic3(7)
        with pytest.raises(ChartError):
            Chart.periodic3(6)

    def test_spacetime_needs_five_slices(self):
        with pytest.raises(ChartError):
            Chart.spacetime(Chart.periodic3(8), 4, 0.0, 1.0)

    def test_filter_removes_upper_third(self):
        c = Chart.periodic3(12)
        f = _trig(c, 5, 0, 0)
        assert np.max(np.abs(c.filter(f.values))) < 1e-14
        g = _trig(c, 4, 0, 0)
        assert np.allclose(c.filter(g.values), g.values)


class TestField:
    @given(st.integers(-5, 5), st.integers(-5, 5), st.integers(-5, 5))
    def test_spectral_derivative_of_modes(self, kx, ky, kz):
        c = Chart.periodic3(16)
        f = _trig(c, kx, ky, kz)
        for ax, k in enumerate((kx, ky, kz)):
            assert np.max(np.abs(f.diff(ax).values - 1j * k * f.values)) < 1e-11

    def test_invariant2_fiber_derivative_is_zero(self):
        c = Chart.invariant2(8)
        f = Field(c, np.cos(c.nodes()[0]))
        assert f.diff(2).max_norm() == 0.0

    def test_addition_keeps_left_weight(self):
        c = Chart.periodic3(8)
        a = Field.constant(c, 1.0, weight=2)
        b = Field.constant(c, 2.0, weight=-1)
        assert (a + b).weight == 2

    def test_grid_mismatch_raises(self):
        with pytest.raises(ChartError):
            Field.constant(Chart.periodic3(8), 1.0) + Field.constant(Chart.periodic3(10), 1.0)

    def test_partial_derivative_matches_diff(self, rng):
        c = Chart.periodic3(16)
        f = random_bandlimited(c, rng)
        assert np.allclose(partial_derivative(f, 1).values, f.diff(1).values)

    def test_pointset_derivative_callbacks(self):
        pts = np.random.default_rng(0).standard_normal((20, 3))
        c = Chart.pointset(pts)
        x = Field(c, pts[:, 0], deriv=lambda a: Field.constant(c, float(a == 0)))
        sq = x * x
        assert np.allclose(sq.diff(0).values, 2 * pts[:, 0])


class TestForms:
    @given(st.integers(0, 2**31 - 1))
    def test_d_squared_vanishes_on_heisenberg_frame(self, seed):
        rng = np.random.default_rng(seed)
        c = Chart.invariant2(16)
        a = Form.from_components(c, [random_bandlimited(c, rng, kmax=3) for _ in range(3)])
        assert exterior_d(exterior_d(a)).max_norm() < 1e-9

    def test_basis_differential_from_structure_constants(self):
        c = Chart.invariant2(8)
        de2 = exterior_d(Form.basis(c, 2))
        # d e^2 = e^0 ^ e^1 for the Heisenberg frame
        assert np.allclose(de2[(0, 1)].values, 1.0)

    @given(st.integers(0, 2**31 - 1))
    def test_wedge_graded_commutativity(self, seed):
        rng = np.random.default_rng(seed)
        c = Chart.periodic3(8)
        a = Form.from_components(c, [random_bandlimited(c, rng, kmax=2) for _ in range(3)])
        b = Form.from_components(c, [random_bandlimited(c, rng, kmax=2) for _ in range(3)])
        assert (wedge(a, b) + wedge(b, a)).max_norm() < 1e-12

    def test_evaluate_and_interior(self):
        c = Chart.periodic3(8)
        one = Field.constant(c, 1.0)
        zero = Field.constant(c, 0.0)
        w = wedge(Form.basis(c, 0), Form.basis(c, 1))
        e0 = [one, zero, zero]
        e1 = [zero, one, zero]
        assert np.allclose(w.evaluate(e0, e1).values, 1.0)
        assert np.allclose(w.interior(e0)[(1,)].values, 1.0)

    def test_integrate_constant(self):
        c = Chart.periodic3(8)
        val = integrate(Field.constant(c, 1.0), volume_form(c))
        assert val == pytest.approx((2 * np.pi) ** 3)

    def test_integrate_invariant2_multiplies_fiber(self):
        c = Chart.invariant2(8, fiber_length=3.0)
        assert integrate(Field.constant(c, 1.0), volume_form(c)) == pytest.approx(3 * (2 * np.pi) ** 2)


class TestSerialization:
    def test_roundtrip_is_bitwise(self, tmp_path, rng):
        c = Chart.periodic3(8)
        f = random_bandlimited(c, rng, weight=2)
        save_field(tmp_path / "f", f)
        g = load_field(tmp_path / "f")
        assert g.weight == 2
        assert np.array_equal(f.values, g.values)
        assert g.chart.shape == c.shape
