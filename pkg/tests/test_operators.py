"""Endomorphism algebra, operators, pairings and the transport oracle."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crlab import operators as ops
from crlab.fields import Field
from crlab.phstructure import random_bandlimited
from crlab.transport import flow_displacement, lie_derivative_endo

seeds = st.integers(0, 2**31 - 1)


def _rand_endo(S, rng):
    return ops.EndomorphismField.anticommuting(random_bandlimited(S.chart, rng, kmax=2, weight=2))


class TestAlgebra:
    def test_J_squares_to_minus_identity(self, t3_16):
        J = ops.J_endomorphism(t3_16)
        JJ = ops.compose(J, J)
        assert np.allclose(JJ.E11b.values, -1) and np.allclose(JJ.E1b1.values, -1)
        assert JJ.E11.max_norm() == 0 and JJ.E1b1b.max_norm() == 0

    @given(seeds)
    def test_anticommuting_fields_anticommute_with_J(self, t3_16, seed):
        E = _rand_endo(t3_16, np.random.default_rng(seed))
        assert E.anticommutator_with_J(t3_16).max_norm() < 1e-14

    @given(st.complex_numbers(max_magnitude=3))
    def test_cr_structure_squares_to_minus_identity(self, t3_16, k):
        K = ops.EndomorphismField.cr(Field.constant(t3_16.chart, k, weight=2))
        KK = ops.compose(K, K)
        assert np.allclose(KK.E11b.values, -1) and np.allclose(KK.E1b1.values, -1)
        assert KK.E11.max_norm() < 1e-12

    @given(seeds)
    def test_frame_coordinate_roundtrip(self, t3_16, seed):
        E = _rand_endo(t3_16, np.random.default_rng(seed))
        back = ops.coord_to_endo(ops.endo_to_coord(E, t3_16), t3_16)
        assert back.distance(E) < 1e-12


class TestOperators:
    def test_cartan_tensor_hand_value(self, t3_16):
        Q = ops.cartan_tensor(t3_16)
        assert np.allclose(np.abs(Q.values), 3 / 8, atol=1e-10)

    @given(seeds)
    def test_DJ_duality(self, t3_16, seed):
        rng = np.random.default_rng(seed)
        f = random_bandlimited(t3_16.chart, rng, kmax=2, real=True)
        E = _rand_endo(t3_16, rng)
        lhs = ops.inner_endo(t3_16, ops.op_DJ(t3_16, f), E)
        rhs = ops.inner_fn(t3_16, f, ops.op_DJ_star(t3_16, E))
        assert lhs == pytest.approx(rhs, rel=1e-8)

    @given(seeds, st.complex_numbers(max_magnitude=2))
    def test_Lalpha_adjoint(self, t3_16, seed, alpha):
        rng = np.random.default_rng(seed)
        C = random_bandlimited(t3_16.chart, rng, kmax=2, weight=2)
        D = random_bandlimited(t3_16.chart, rng, kmax=2, weight=2)
        lhs = ops.inner_weight2(t3_16, ops.op_Lalpha(t3_16, C, alpha), D)
        rhs = ops.inner_weight2(t3_16, C, ops.op_Lalpha(t3_16, D, np.conj(alpha)))
        assert abs(lhs - rhs) <= 1e-8 * max(1.0, abs(lhs))

    @given(seeds)
    def test_two_re_frakD_decomposition(self, t3_16, seed):
        h = random_bandlimited(t3_16.chart, np.random.default_rng(seed), kmax=3)
        J = ops.J_endomorphism(t3_16)
        lhs = ops.two_re(ops.frakD_endomorphism(t3_16, h))
        rhs = ops.compose(J, ops.op_DJ(t3_16, h.imag())) + ops.op_DJ(t3_16, h.real())
        assert lhs.distance(rhs) < 1e-9

    def test_constants_in_kernel_of_DJ_only_without_torsion(self, t3_16):
        one = Field.constant(t3_16.chart, 1.0)
        assert np.allclose(np.abs(ops.op_DJ_component(t3_16, one).values), 0.5)

    def test_energy_hand_value(self, t3_16):
        assert ops.action_energy(t3_16) == pytest.approx(-0.5 * (2 * np.pi) ** 3, rel=1e-10)


class TestTransport:
    def test_constant_field_displacement(self):
        from crlab.fields import Chart

        c = Chart.periodic3(8)
        X = [np.full(c.shape, 0.3), np.zeros(c.shape), np.full(c.shape, -0.1)]
        d = flow_displacement(c, X, 0.5)
        assert np.allclose(d[0], 0.15) and np.allclose(d[2], -0.05)

    @pytest.mark.slow
    def test_reeb_lie_derivative_of_J(self, t3_16):
        L = lie_derivative_endo(t3_16, t3_16.T, t3_16.J_coord())
        target = ops.compose(ops.J_endomorphism(t3_16), ops.torsion_endomorphism(t3_16)) * 2.0
        assert L.distance(target) < 1e-8
