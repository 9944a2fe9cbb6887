"""Torsion, Cartan, gauge-fixed Cartan and coupled contact-form flows.

J(t) is carried by a deformation parameter beta against a fixed base coframe:
theta1(t) = alpha theta1_base + beta conj(theta1_base) with alpha real.  A
J-velocity 2E moves the coframe by theta1' = -i E[1b,1b] conj(theta1) modulo
theta1; the multiple of theta1 is fixed by keeping alpha real, which gives

    beta'  = c alpha - i Im(c conj(beta)) beta / alpha,   c = -i E[1b,1b],

with E expressed in the deformation frame.  Every stage re-solves the
structure equations from scratch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .fields import Field, integrate
from .operators import (EndomorphismField, cartan_tensor, coord_to_endo, endo_to_coord,
                        J_endomorphism, op_FJ, action_energy)
from .phstructure import (DeformationState, PseudohermitianStructure, StructureError,
                          rescale_contact_form, solve_structure)

KINDS = ("torsion", "cartan", "gauge-fixed", "coupled-torsion")
ABORT_RESIDUAL = 1e-3


class FlowAborted(RuntimeError):
    def __init__(self, reason, state):
        super().__init__(reason)
        self.reason = reason
        self.state = state


@dataclass
class DiagnosticsRecord:
    t: float
    normA: float
    normQ: float
    energy: float
    res21: float
    res24: float
    extra: float = float("nan")

    def row(self):
        return [self.t, self.normA, self.normQ, self.energy, self.res21, self.res24, self.extra]


CSV_HEADER = ["t", "normA", "normQ", "energy", "res21", "res24", "extra"]


@dataclass
class FlowConfig:
    dt: float = 1e-3
    cfl: float = 0.1
    enforce_cfl: bool = True
    solve_tol: float = 1e-6
    abort_residual: float = ABORT_RESIDUAL


@dataclass
class FlowState:
    t: float
    base: PseudohermitianStructure
    beta: Field
    lam: Optional[Field] = None
    K: Optional[list] = None
    history: list = field(default_factory=list)

    @classmethod
    def initial(cls, geom, with_K: bool = True, coupled: bool = False):
        """Start from a catalog geometry; K is frozen as the initial J."""
        if getattr(geom, "deformation", None) is not None:
            base, beta = geom.deformation.base, geom.deformation.beta
        else:
            base = solve_structure(geom.theta, geom.theta1)
            beta = Field.constant(base.chart, 0.0)
        st = cls(0.0, base, beta, Field.constant(base.chart, 0.0) if coupled else None)
        if with_K:
            S0 = st.structure()
            st.K = endo_to_coord(J_endomorphism(S0), S0)
        return st

    def deformation(self) -> DeformationState:
        return DeformationState(self.base, self.beta)

    def frame_structure(self, tol=1e-6) -> PseudohermitianStructure:
        """Structure of (theta_base, theta1(t)); its frame carries beta's dynamics."""
        return self.deformation().structure(tol)

    def structure(self, tol=1e-6) -> PseudohermitianStructure:
        S = self.frame_structure(tol)
        if self.lam is not None and self.lam.max_norm() > 0:
            S = rescale_contact_form(S, self.lam, tol)
        return S

    def replace(self, **kw):
        d = dict(t=self.t, base=self.base, beta=self.beta, lam=self.lam, K=self.K,
                 history=self.history)
        d.update(kw)
        return FlowState(**d)


def flow_rhs(state: FlowState, kind: str, S: Optional[PseudohermitianStructure] = None,
             tol: float = 1e-6):
    """Velocity endomorphism E (dJ/dt = 2E) and contact-form rate h (or None)."""
    if kind not in KINDS:
        raise ValueError(f"unknown flow kind {kind!r}; expected one of {KINDS}")
    S = state.structure(tol) if S is None else S
    if kind in ("torsion", "coupled-torsion"):
        E = EndomorphismField.anticommuting(-S.A11)
        return E, (S.W if kind == "coupled-torsion" else None)
    Q = cartan_tensor(S)
    E11 = Q * 1j
    if kind == "gauge-fixed":
        if state.K is None:
            raise ValueError("gauge-fixed flow needs the frozen reference K")
        K = coord_to_endo(state.K, S)
        F = op_FJ(S, K).real()
        E11 = E11 - (S.cov(F, "11") + S.A11 * F * 1j) * (1.0 / 12.0)
    return EndomorphismField.anticommuting(E11.with_weight(2)), None


def _velocity(state: FlowState, kind: str, tol: float):
    S = state.structure(tol)
    E, h = flow_rhs(state, kind, S, tol)
    if state.lam is not None and state.lam.max_norm() > 0:
        # move E into the deformation frame through the coordinate matrix
        Sd = state.frame_structure(tol)
        E = coord_to_endo(endo_to_coord(E, S), Sd, anti_commuting=True)
    beta = state.beta
    alpha = (beta.abs2() + 1.0).sqrt()
    c = E.E1b1b.with_weight(0) * (-1j)
    im = (c * beta.conj()).imag()
    dbeta = (c * alpha - im * beta * alpha.reciprocal() * 1j).with_weight(0)
    return dbeta, (h.real().with_weight(0) if h is not None else None), S


def _health(S: PseudohermitianStructure):
    r = S.residuals
    return max(r["res21"], r["res22"], r["res24"], r["re_omega0"])


def diagnostics(state: FlowState, S: PseudohermitianStructure, extra=float("nan")):
    Q = cartan_tensor(S)
    energy = action_energy(S) if S.chart.kind in ("periodic3", "invariant2") else float("nan")
    return DiagnosticsRecord(state.t, S.A11.max_norm(), Q.max_norm(), energy,
                             S.residuals["res21"], S.residuals["res24"], extra)


def cfl_limit(chart, kind: str, c: float) -> float:
    h = min(chart.spacing(ax) for ax in chart.spectral_array_axes())
    return c * h ** 4 if kind in ("cartan", "gauge-fixed") else c * h


def step(state: FlowState, dt: float, kind: str, cfg: Optional[FlowConfig] = None) -> FlowState:
    """One classical RK4 step on beta (and lambda for the coupled kind)."""
    cfg = cfg or FlowConfig(dt=dt)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if cfg.enforce_cfl and dt > cfl_limit(state.base.chart, kind, cfg.cfl) * (1 + 1e-12):
        raise ValueError(f"dt={dt:.3g} violates the stability guard "
                         f"{cfl_limit(state.base.chart, kind, cfg.cfl):.3g} for {kind}")

    def stage(st):
        try:
            db, dl, S = _velocity(st, kind, cfg.solve_tol)
        except StructureError as e:
            raise FlowAborted(f"structure solve failed: {e}", state) from e
        if not np.isfinite(db.values).all() or _health(S) > cfg.abort_residual:
            raise FlowAborted("residual blow-up or NaN", state)
        return db, dl

    def shifted(k, scale):
        db, dl = k
        lam = None if state.lam is None else state.lam + dl * scale
        return state.replace(beta=state.beta + db * scale, lam=lam)

    k1 = stage(state)
    k2 = stage(shifted(k1, dt / 2))
    k3 = stage(shifted(k2, dt / 2))
    k4 = stage(shifted(k3, dt))
    beta = state.beta + (k1[0] + k2[0] * 2 + k3[0] * 2 + k4[0]) * (dt / 6)
    lam = state.lam
    if lam is not None:
        lam = (lam + (k1[1] + k2[1] * 2 + k3[1] * 2 + k4[1]) * (dt / 6)).real()
    new = state.replace(t=state.t + dt, beta=beta.with_weight(0), lam=lam, history=list(state.history))
    try:
        S = new.structure(cfg.solve_tol)
    except StructureError as e:
        raise FlowAborted(f"structure solve failed: {e}", state) from e
    if not np.isfinite(beta.values).all() or _health(S) > cfg.abort_residual:
        raise FlowAborted("residual blow-up or NaN", state)
    new.history.append(diagnostics(new, S))
    return new


def run(state: FlowState, kind: str, T_end: float, dt: float, monitors=(), cfg=None,
        snapshot=None, snapshot_every: int = 0):
    """Iterate ``step`` to T_end; monitors are called as monitor(state, S) -> float."""
    cfg = cfg or FlowConfig(dt=dt)
    nsteps = int(math.ceil(T_end / dt - 1e-9))
    if not state.history:
        S0 = state.structure(cfg.solve_tol)
        state.history.append(diagnostics(state, S0))
    for i in range(nsteps):
        state = step(state, dt, kind, cfg)
        if monitors:
            S = state.structure(cfg.solve_tol)
            state.history[-1].extra = float(max(m(state, S) for m in monitors))
        if snapshot is not None and snapshot_every and (i + 1) % snapshot_every == 0:
            snapshot(state, i + 1)
    return state


def torsion_monitor(state, S):
    return S.A11.max_norm()


def energy_of(state: FlowState) -> float:
    S = state.structure()
    return action_energy(S)
