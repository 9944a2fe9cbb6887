"""Structure equations, identities and deformations."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crlab import catalog
from crlab.fields import Field, Form
from crlab.phstructure import (DeformationState, StructureError, admissible_coframe,
                               commutation_residuals, rescale_contact_form, random_bandlimited,
                               solve_structure, verify_identities)
from crlab.poly import HeisPoly

seeds = st.integers(0, 2**31 - 1)


class TestOracles:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_t3_roto_hand_values(self, n):
        S = catalog.t3_roto(n, 16).structure()
        assert np.allclose(S.W.values, n / 2, atol=1e-10)
        assert np.allclose(np.abs(S.A11.values), n / 2, atol=1e-10)
        assert np.allclose(S.omega0.values, -0.5j * n, atol=1e-10)

    def test_degenerate_contact_form_raises(self):
        c = catalog.Chart.periodic3(8)
        one, zero = Field.constant(c, 1.0), Field.constant(c, 0.0)
        theta = Form.from_components(c, [one, zero, zero])  # dx is closed
        theta1 = Form.from_components(c, [zero, one, one * 1j])
        with pytest.raises(StructureError):
            solve_structure(theta, theta1)

    def test_theta1_must_annihilate_reeb(self):
        c = catalog.Chart.periodic3(8)
        _, _, z = c.nodes()
        cz, sz = Field(c, np.cos(z)), Field(c, np.sin(z))
        theta = Form.from_components(c, [cz, sz, Field.constant(c, 0.0)])
        bad = Form.from_components(c, [cz, sz, Field.constant(c, 1.0)])
        with pytest.raises(StructureError):
            admissible_coframe(theta, bad)


class TestIdentities:
    @given(seeds, st.integers(-2, 2))
    def test_commutation_on_t3(self, t3_16, seed, k):
        C = random_bandlimited(t3_16.chart, np.random.default_rng(seed), kmax=3, weight=k)
        assert max(commutation_residuals(t3_16, C)) < 1e-9

    @settings(max_examples=4)
    @given(seeds)
    def test_identities_on_deformed_t3(self, t3_32, seed):
        rng = np.random.default_rng(seed)
        beta = random_bandlimited(t3_32.chart, rng, kmax=1, amplitude=0.05)
        S = DeformationState(t3_32, beta).structure()
        rep = verify_identities(S, rng=rng, reeb_check=False)
        assert max(rep["commutation"]) < 1e-6
        assert rep["bianchi"] < 1e-6
        assert max(rep["structure"].values()) < 1e-6

    def test_commutation_on_heisenberg_pointset(self):
        g = catalog.heis_flat()
        S = g.structure()
        fields = [catalog.heis_field(g.chart, HeisPoly.wave(1.0, 2.0, 0.5, 1.0, (1, 0, 2)), k)
                  for k in (-1, 0, 2)]
        rep = verify_identities(S, fields=fields, reeb_check=False)
        assert max(rep["commutation"]) < 1e-10

    def test_nil_invariant_identities(self):
        S = catalog.nil_invariant("0.1*exp(i*x)", 16).structure()
        rep = verify_identities(S, reeb_check=False)
        assert max(rep["commutation"]) < 1e-8
        assert rep["bianchi"] < 1e-8


class TestDeformation:
    def test_zero_beta_is_identity(self, t3_16):
        S = DeformationState(t3_16, Field.constant(t3_16.chart, 0.0)).structure()
        assert (S.A11 - t3_16.A11).max_norm() < 1e-12

    @given(st.complex_numbers(max_magnitude=0.6))
    def test_constant_beta_torsion_closed_form(self, t3_16, b):
        S = DeformationState(t3_16, Field.constant(t3_16.chart, b)).structure()
        a = np.sqrt(1 + abs(b) ** 2)
        Ab = np.conj(t3_16.A11.values)
        expected = np.conj(a * a * Ab - b * b * np.conj(Ab) - 1j * a * b)
        assert np.max(np.abs(S.A11.values - expected)) < 1e-9

    def test_constant_rescaling_scales_invariants(self, t3_16):
        c = 0.3
        S = rescale_contact_form(t3_16, Field.constant(t3_16.chart, c))
        assert np.allclose(S.W.values, t3_16.W.values * np.exp(-2 * c), atol=1e-10)
        assert np.allclose(np.abs(S.A11.values), np.abs(t3_16.A11.values) * np.exp(-2 * c), atol=1e-10)
