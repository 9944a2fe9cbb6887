"""Flow right-hand sides, the RK4 stepper and its guards."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crlab import catalog, flows
from crlab.fields import Field


@pytest.fixture(scope="module")
def nil16():
    return catalog.nil_invariant("0.1*exp(i*x)", 16)


class TestRhs:
    def test_unknown_kind(self, nil16):
        with pytest.raises(ValueError):
            flows.flow_rhs(flows.FlowState.initial(nil16), "ricci")

    def test_torsion_velocity_is_minus_A(self, t3_16):
        st = flows.FlowState.initial(catalog.t3_roto(1, 16))
        E, h = flows.flow_rhs(st, "torsion")
        S = st.structure()
        assert (E.E11 + S.A11).max_norm() < 1e-14 and h is None

    def test_gauge_fixed_vanishes_at_reference(self, nil16):
        # K = J and A = 0: F_J K = 0 and the velocity reduces to iQ
        st = flows.FlowState.initial(nil16)
        E, _ = flows.flow_rhs(st, "gauge-fixed")
        Ec, _ = flows.flow_rhs(st, "cartan")
        assert E.distance(Ec) < 1e-12


class TestStep:
    def test_zero_velocity_is_stationary(self, nil16):
        # torsion-free data: the torsion flow has E = 0
        st = flows.FlowState.initial(nil16)
        new = flows.step(st, 0.01, "torsion")
        assert np.array_equal(new.beta.values, st.beta.values)

    def test_cfl_guard(self, nil16):
        st = flows.FlowState.initial(nil16)
        with pytest.raises(ValueError):
            flows.step(st, 1e-2, "cartan", flows.FlowConfig(dt=1e-2))

    def test_abort_on_blowup(self):
        st = flows.FlowState.initial(catalog.t3_roto(1, 16))
        cfg = flows.FlowConfig(enforce_cfl=False)
        with pytest.raises(flows.FlowAborted) as err:
            flows.step(st, 5.0, "torsion", cfg)
        assert err.value.state is st

    @settings(max_examples=5)
    @given(st.floats(1e-3, 2e-2))
    def test_torsion_flow_constant_beta_stays_homogeneous(self, dt):
        st = flows.FlowState.initial(catalog.t3_roto(1, 8))
        new = flows.step(st, dt, "torsion", flows.FlowConfig(dt=dt))
        assert np.ptp(np.abs(new.beta.values)) < 1e-12
        assert abs(new.beta.values.flat[0]) > 0

    def test_gauge_fixed_preserves_zero_torsion(self, nil16):
        st = flows.FlowState.initial(nil16)
        dt = flows.cfl_limit(nil16.chart, "gauge-fixed", 0.1)
        out = flows.run(st, "gauge-fixed", 5 * dt, dt, monitors=[flows.torsion_monitor])
        assert max(h.normA for h in out.history) < 1e-10
        assert len(out.history) == 6

    def test_coupled_energy_decreases(self):
        st = flows.FlowState.initial(catalog.t3_roto(1, 8), coupled=True)
        out = flows.run(st, "coupled-torsion", 0.05, 0.01)
        E = [h.energy for h in out.history]
        assert np.all(np.diff(E) <= 10 * 0.01 ** 2)

    def test_snapshots_and_csv_rows(self, nil16, tmp_path):
        seen = []
        st = flows.FlowState.initial(nil16)
        flows.run(st, "torsion", 0.03, 0.01, snapshot=lambda s, i: seen.append(i), snapshot_every=1)
        assert seen == [1, 2, 3]
        assert len(flows.DiagnosticsRecord(0, 0, 0, 0, 0, 0).row()) == len(flows.CSV_HEADER)
