"""Hypersurfaces in C^2: adapted coframes, torsion, Y_f and its identities."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crlab import embedded as em
from crlab.poly import Poly
from crlab.selftest import random_degree2

z1, z2 = Poly.var(0), Poly.var(1)
zb1, zb2 = Poly.var(0, True), Poly.var(1, True)
seeds = st.integers(0, 2**31 - 1)


@pytest.fixture(scope="module")
def sphere():
    return em.hypersurface("sphere")


@pytest.fixture(scope="module")
def pts(sphere):
    return sphere.sample(64, seed=5)


class TestGeometry:
    def test_samples_lie_on_M(self):
        g = em.hypersurface("ellipsoid", {"a": 2.0})
        p = g.sample(100, seed=1)
        assert np.max(np.abs(g.gamma(p))) < 1e-12

    def test_ellipsoid_levi_form_positive(self):
        g = em.hypersurface("ellipsoid", {"a": 2.0})
        p = g.sample(100, seed=2)
        _, _, h, _ = em.adapted_coframe(g, p)
        assert np.all(h > 0)
        # independent route: Levi form on the complex tangent line from second partials
        gz = np.column_stack([q(p) for q in g.gz])
        v = np.column_stack([-np.conj(gz[:, 1]), np.conj(gz[:, 0])])
        assert np.all(np.einsum("nj,njk,nk->n", v, g.levi_hessian(p), np.conj(v)).real > 0)

    @pytest.mark.parametrize("name,params", [("sphere", {}), ("ellipsoid", {"a": 2.0}),
                                             ("sphere-perturbed", {"eps": 0.05, "mode": 2})])
    def test_adapted_coframe_normalization(self, name, params):
        g = em.hypersurface(name, params)
        assert em.coframe_residual(g, g.sample(50, seed=3)) < 1e-7

    def test_unknown_surface(self):
        with pytest.raises(em.EmbeddingError):
            em.hypersurface("torus")

    def test_closed_frame_only_for_sphere(self):
        with pytest.raises(em.EmbeddingError):
            em.hypersurface("ellipsoid").frame(closed=True)


class TestTorsion:
    def test_sphere_closed_and_difference_agree(self, sphere, pts):
        a = em.connection_torsion_at(sphere, pts, sphere.frame(True))
        b = em.connection_torsion_at(sphere, pts, sphere.frame(False))
        assert np.max(np.abs(a.A1b1b)) == 0.0
        assert np.max(np.abs(b.A1b1b)) < 1e-7
        assert np.allclose(a.omega0, b.omega0, atol=1e-7)
        assert a.re_omega0 < 1e-12

    def test_sphere_intrinsic_W(self, sphere, pts):
        S = sphere.intrinsic(pts).structure()
        assert np.allclose(S.W.values, 2.0)
        assert S.A11.max_norm() < 1e-14

    @pytest.mark.parametrize("mode,slope", [(1, 2.0), (2, 1.0)])
    def test_perturbed_torsion_slope(self, mode, slope):
        A = []
        for eps in (0.01, 0.005):
            g = em.hypersurface("sphere-perturbed", {"eps": eps, "mode": mode})
            A.append(np.max(np.abs(em.connection_torsion_at(g, g.sample(64, seed=2)).A1b1b)))
        assert np.log2(A[0] / A[1]) == pytest.approx(slope, abs=0.15)


class TestYf:
    @given(seeds)
    def test_characterization(self, sphere, pts, seed):
        f = random_degree2(np.random.default_rng(seed))
        r = em.Yf_residuals(sphere.frame(), f, pts)
        assert max(r) < 1e-12

    @given(seeds)
    def test_dbar_identity_closed_form(self, sphere, pts, seed):
        f = random_degree2(np.random.default_rng(seed))
        assert em.dbar_b_check(sphere, f, pts, closed=True)[0] < 1e-12

    @settings(max_examples=3)
    @given(seeds)
    def test_dbar_identity_on_ellipsoid(self, seed):
        g = em.hypersurface("ellipsoid", {"a": 2.0})
        f = random_degree2(np.random.default_rng(seed))
        assert em.dbar_b_check(g, f, g.sample(20, seed=1))[0] < 1e-5

    def test_dbar_identity_difference_order(self):
        g = em.hypersurface("sphere-perturbed", {"eps": 0.2, "mode": 2})
        p = g.sample(20, seed=4)
        f = z1 * zb2 + zb1 * zb1
        r = [em.dbar_b_check(g, f, p, h=h)[0] for h in (2e-2, 1e-2)]
        assert np.log2(r[0] / r[1]) >= 1.8

    def test_kernel_and_witnesses(self, sphere, pts):
        for f in (z1, z2, zb1, z1 * z2):
            assert em.frakD_norm(sphere, f, pts).max() < 1e-12
        assert em.frakD_norm(sphere, zb1 * zb1, pts).max() > 0.1

    def test_route_agreement(self, sphere, pts):
        f = random_degree2(np.random.default_rng(7))
        err, theta_part = em.route_agreement(sphere, f, pts)
        assert err < 1e-12 and theta_part < 1e-12


class TestChi:
    def test_cr_function_gives_cr_embedding(self, sphere, pts):
        _, defect = em.chi_embedding(sphere, z1 * 0.01, pts)
        assert defect.max() <= 1e-6

    def test_non_kernel_defect_scales_linearly(self, sphere, pts):
        d = [em.chi_embedding(sphere, zb1 * zb1 * eps, pts)[1].max() for eps in (0.01, 0.005)]
        assert d[1] > 0
        assert np.log2(d[0] / d[1]) == pytest.approx(1.0, abs=0.1)



class TestTangency:
    def test_lie_transport_order(self, sphere, pts):
        f = zb1 * zb1 + z1 * zb2
        e = [em.tangency_check(sphere, f, eps, pts[:20]) for eps in (0.02, 0.01)]
        assert np.log2(e[0] / e[1]) >= 1.8

    def test_kernel_function_is_exact(self, sphere, pts):
        assert em.tangency_check(sphere, z2, 0.01, pts[:20]) < 1e-8
