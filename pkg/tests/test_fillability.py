"""Certificates, the ambient structure and jet matching."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crlab import catalog, fillability as fl, flows
from crlab.fields import Field
from crlab.operators import inner_weight2, cartan_tensor
from crlab.phstructure import random_bandlimited

seeds = st.integers(0, 2**31 - 1)


@pytest.fixture(scope="module")
def nil16():
    return catalog.nil_invariant("0.1*exp(i*x)", 16).structure()


class TestCertificate:
    def test_minus_one_solves_torsion_certificate(self, t3_16):
        cert = fl.solve_certificate(t3_16, -t3_16.A11)
        assert cert.converged
        assert np.max(np.abs(cert.u.values + 1)) < 1e-9
        assert cert.margin == pytest.approx(1.0, abs=1e-9)

    @given(seeds)
    def test_adjoint_pairing(self, t3_16, seed):
        rng = np.random.default_rng(seed)
        u = random_bandlimited(t3_16.chart, rng, kmax=2)
        v = random_bandlimited(t3_16.chart, rng, kmax=2, weight=2)
        lhs = inner_weight2(t3_16, fl.certificate_operator(t3_16, u).with_weight(2), v)
        rhs = inner_weight2(t3_16, u.with_weight(2), fl.certificate_adjoint(t3_16, v).with_weight(2))
        assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))

    def test_cartan_velocity_on_torsion_free_data(self, nil16):
        # A = 0 and E = iQ: u = -W/6 solves u,11 = iE11
        E11 = cartan_tensor(nil16) * 1j
        u = nil16.W * (-1.0 / 6.0)
        l2, mx = fl.certificate_residual(nil16, u, E11)
        assert mx < 1e-9
        cert = fl.solve_certificate(nil16, E11)
        assert cert.residual_max < 1e-6

    def test_small_margin_blocks_ambient_construction(self, nil16):
        E11 = cartan_tensor(nil16) * 1j
        cert = fl.solve_certificate(nil16, E11)
        with pytest.raises(fl.CertificateError):
            fl.ab_from_certificate(cert.u, margin=0.5)

    def test_relation_on_minus_one(self, t3_16):
        u = Field.constant(t3_16.chart, -1.0)
        assert fl.relation46_residual(t3_16, u, -t3_16.A11) < 1e-10


class TestAmbient:
    def test_integrability_and_negative_control(self):
        cfg = flows.FlowConfig(enforce_cfl=False)
        st = flows.FlowState.initial(catalog.t3_roto(1, 16))
        states = [st]
        for _ in range(4):
            states.append(flows.step(states[-1], 0.01, "torsion", cfg))
        Ss = [s.structure() for s in states]
        certs = [fl.solve_certificate(S, -S.A11) for S in Ss]
        amb = fl.build_ambient(Ss, certs, 0.0, 0.04)
        r1, r2 = fl.integrability_residuals(amb)
        assert max(r1, r2) < 1e-6
        x = Ss[0].chart.nodes()[0]
        bump = Field(Ss[0].chart, 0.05 * np.sin(x))
        bad = fl.build_ambient(Ss, certs, 0.0, 0.04, u_override=[c.u + bump for c in certs])
        assert sum(fl.integrability_residuals(bad)) > 1e-3

    def test_slice_count_mismatch(self, t3_16):
        with pytest.raises(ValueError):
            fl.build_ambient([t3_16, t3_16], [], 0.0, 1.0)


class TestJets:
    @settings(max_examples=50)
    @given(seeds)
    def test_solution_residual(self, seed):
        rng = np.random.default_rng(seed)
        J = fl.random_complex_structure(rng)
        C = fl.random_anticommuting(J, rng)
        eta = fl.match_jets(J, C)
        assert np.max(np.abs(eta @ J - J @ eta - C)) < 1e-11

    @given(seeds)
    def test_rejects_commuting_part(self, seed):
        rng = np.random.default_rng(seed)
        J = fl.random_complex_structure(rng)
        with pytest.raises(fl.JetError):
            fl.match_jets(J, J + fl.random_anticommuting(J, rng))

    def test_rejects_non_complex_structure(self):
        with pytest.raises(fl.JetError):
            fl.match_jets(np.eye(4), np.zeros((4, 4)))

    def test_canonical_basis_puts_J_in_blocks(self):
        J = fl.random_complex_structure(np.random.default_rng(0))
        P = fl._canonical_basis(J)
        blocks = np.linalg.inv(P) @ J @ P
        J0 = np.kron(np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]]))
        assert np.allclose(blocks, J0, atol=1e-10)
