"""Geometry spec grammar and builtin geometries."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crlab import catalog
from crlab.catalog import CatalogError, eval_expression, geometry_catalog, parse_geometry
from crlab.embedded import HypersurfaceGeometry


class TestGrammar:
    def test_parse_name_params_dims(self):
        spec = parse_geometry("t3-roto:n=2@32")
        assert spec.name == "t3-roto" and spec.params == {"n": 2} and spec.dims == (32,)

    def test_commas_inside_parentheses_belong_to_expression(self):
        spec = parse_geometry("nil-invariant:beta=0.1*exp(i*(x+y)),foo=1@16x16")
        assert spec.params["beta"] == "0.1*exp(i*(x+y))"
        assert spec.params["foo"] == 1
        assert spec.dims == (16, 16)

    @given(st.integers(1, 5), st.sampled_from([8, 16, 32]))
    def test_roundtrip_through_str(self, n, res):
        spec = parse_geometry(f"t3-roto:n={n}@{res}")
        assert parse_geometry(str(spec)) == spec

    @pytest.mark.parametrize("bad", ["nope", "t3-roto:n", "t3-roto@abc"])
    def test_rejects_malformed(self, bad):
        with pytest.raises(CatalogError):
            parse_geometry(bad)

    def test_expression_sandbox(self):
        assert eval_expression("2*pi", {}) == pytest.approx(2 * np.pi)
        with pytest.raises(CatalogError):
            eval_expression("__import__('os')", {})
        with pytest.raises(CatalogError):
            eval_expression("x.real", {"x": 1.0})


class TestBuiltins:
    def test_t3_roto_is_normalized(self):
        S = catalog.t3_roto(2, 16).structure()
        assert max(S.residuals[k] for k in ("res21", "res22", "res24")) < 1e-10

    def test_t3_roto_requires_positive_n(self):
        with pytest.raises(CatalogError):
            catalog.t3_roto(0, 16)

    def test_heis_flat_is_torsion_free_and_flat(self):
        S = catalog.heis_flat().structure()
        assert S.A11.max_norm() < 1e-14
        assert S.W.max_norm() < 1e-14

    def test_nil_invariant_torsion_free_with_nonconstant_W(self):
        S = geometry_catalog("nil-invariant:beta=0.1*exp(i*x)@16").structure()
        assert S.A11.max_norm() < 1e-12
        assert np.ptp(S.W.values.real) > 0.1

    def test_hypersurfaces_go_to_embedded(self):
        g = geometry_catalog("sphere-perturbed:eps=0.02,mode=2")
        assert isinstance(g, HypersurfaceGeometry)
        assert g.params == {"eps": 0.02, "mode": 2}
