"""Fillability certificates, the ambient almost complex structure on M x [t0, t1],
its integrability residuals, and the jet-matching linear algebra.

A certificate is a complex function u with u,11 + i A11 u = i E11 and Re u
bounded away from zero.  From u = f + i g one sets a = 1/f, b = -g/f and
builds the (1,0)-forms Theta1 = theta1(t) + gamma1 dt, eta = a theta + (b - i) dt.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, lsqr

from .fields import Chart, Field, Form, exterior_d, wedge
from .operators import op_DJ_component
from .phstructure import PseudohermitianStructure


class CertificateError(RuntimeError):
    pass


class JetError(ValueError):
    pass


# -- certificate -------------------------------------------------------------

def certificate_operator(S: PseudohermitianStructure, u: Field) -> Field:
    """u -> u,11 + i A11 u."""
    u = u.with_weight(0)
    return (S.cov(u, "11") + S.A11 * u * 1j).with_weight(2)


def certificate_adjoint(S: PseudohermitianStructure, v: Field) -> Field:
    """Formal adjoint v -> v,1b1b - i A1b1b v against theta ^ dtheta."""
    v = v.with_weight(2)
    return (S.cov(v, "bb") - S.A1b1b * v * 1j).with_weight(0)


def certificate_residual(S: PseudohermitianStructure, u: Field, E11: Field):
    """(L2, max) residual of u,11 + iuA11 - iE11 via D_J on Re u and Im u."""
    r = op_DJ_component(S, u.real()) + op_DJ_component(S, u.imag()) * 1j - E11 * 1j
    w = _density(S)
    l2 = float(np.sqrt(np.sum(np.abs(r.values) ** 2 * w) / np.sum(w)))
    return l2, r.max_norm()


def _density(S):
    vol = S.volume()[(0, 1, 2)]
    return np.abs(vol.values.real)


@dataclass
class Certificate:
    u: Field
    residual_l2: float
    residual_max: float
    margin: float
    converged: bool
    iterations: int
    message: str = ""

    @property
    def f(self):
        return self.u.real()

    @property
    def g(self):
        return self.u.imag()


def solve_certificate(S: PseudohermitianStructure, E11: Field, tol: float = 1e-12,
                      maxiter: int = 2000, u0: Optional[Field] = None,
                      accept: float = 1e-6) -> Certificate:
    """Least-squares solve of u,11 + iA11 u = iE11 by Golub-Kahan bidiagonalization
    (LSQR, equivalent to conjugate gradients on the normal operator).

    Iterates live in the dealiased subspace; the measure is theta ^ dtheta.
    When the residual stalls above ``accept`` the certificate is returned with
    ``converged=False`` rather than raising: the equation may have no solution.
    """
    chart = S.chart
    if chart.kind not in ("periodic3", "invariant2"):
        raise CertificateError("certificates are solved on periodic charts")
    shape = chart.shape
    w = _density(S) * chart.cell_volume()
    sw = np.sqrt(w).ravel()
    n = sw.size

    def to_field(x, weight):
        return Field(chart, chart.filter(x.reshape(shape)), weight)

    def mv(x):
        u = to_field(x / sw, 0)
        return (certificate_operator(S, u).dealiased().values.ravel()) * sw

    def rmv(y):
        v = to_field(y / sw, 2)
        return (certificate_adjoint(S, v).dealiased().values.ravel()) * sw

    op = LinearOperator((n, n), matvec=mv, rmatvec=rmv, dtype=complex)
    rhs = (E11 * 1j).dealiased().values.ravel() * sw
    x0 = None if u0 is None else u0.values.ravel() * sw
    out = lsqr(op, rhs, atol=tol, btol=tol, iter_lim=maxiter, x0=x0)
    u = to_field(out[0] / sw, 0)
    l2, mx = certificate_residual(S, u, E11)
    margin = float(np.min(np.abs(u.values.real)))
    ok = mx <= accept
    msg = "" if ok else "no certificate found at this tolerance"
    return Certificate(u, l2, mx, margin, ok, int(out[2]), msg)


def relation46_residual(S: PseudohermitianStructure, u: Field, E11: Field) -> float:
    """Max norm of gamma1,1b + i E1b1b + a^-1 (b - i) A1b1b with gamma1 from (a, b)."""
    a, b = ab_from_certificate(u)
    gamma = gamma1(S, a, b)
    lhs = S.cov(gamma, "b")
    r = lhs + E11.conj() * 1j + a.reciprocal() * (b - 1j) * S.A1b1b
    return r.max_norm()


def ab_from_certificate(u: Field, margin: float = 0.0):
    f, g = u.real(), u.imag()
    if np.min(np.abs(f.values)) <= margin:
        raise CertificateError(f"Re u has margin below {margin:g}")
    a = f.reciprocal().real().with_weight(0)
    b = (-(g * a)).real().with_weight(0)
    return a, b


def gamma1(S: PseudohermitianStructure, a: Field, b: Field) -> Field:
    """gamma1 = i a^-1 b,1b - i a^-2 (b - i) a,1b (weight -1)."""
    ai = a.reciprocal()
    out = ai * S.cov(b, "b") * 1j - ai * ai * (b - 1j) * S.cov(a, "b") * 1j
    return out.with_weight(-1)


# -- ambient structure -------------------------------------------------------

@dataclass
class AmbientStructure:
    chart: Chart
    a: Field
    b: Field
    gamma1: Field
    Theta1: Form
    eta: Form
    margin: float
    slice_residuals: list = field(default_factory=list)


def _stack(chart, fields):
    return Field(chart, np.stack([f.values for f in fields]))


def build_ambient(structures, certificates, t0: float, t1: float, delta: float = 1e-3,
                  u_override=None) -> AmbientStructure:
    """Assemble Theta1 and eta on the spacetime chart over equally spaced slices."""
    if len(structures) != len(certificates):
        raise ValueError("one certificate per slice is required")
    space = structures[0].chart
    st = Chart.spacetime(space, len(structures), t0, t1)
    us = [c.u if u_override is None else u_override[i] for i, c in enumerate(certificates)]
    margin = min(float(np.min(np.abs(u.values.real))) for u in us)
    if margin < delta:
        raise CertificateError(f"certificate margin {margin:.3g} below delta={delta:g}")
    a_s, b_s, g_s, th, t1c = [], [], [], [], []
    for S, u in zip(structures, us):
        a, b = ab_from_certificate(u)
        a_s.append(a)
        b_s.append(b)
        g_s.append(gamma1(S, a, b))
        th.append(S.theta.components())
        t1c.append(S.theta1.components())
    a, b, gam = _stack(st, a_s), _stack(st, b_s), _stack(st, g_s)
    theta = [_stack(st, [c[k] for c in th]) for k in range(3)]
    theta1 = [_stack(st, [c[k] for c in t1c]) for k in range(3)]
    Theta1 = Form.from_components(st, [gam] + theta1)
    eta = Form.from_components(st, [b - 1j] + [a * c for c in theta])
    return AmbientStructure(st, a, b, gam, Theta1, eta, margin,
                            [c.residual_max for c in certificates])


def integrability_residuals(amb: AmbientStructure):
    """(r1, r2) = max norms of eta^Theta1^d eta and eta^Theta1^d Theta1."""
    base = wedge(amb.eta, amb.Theta1)
    r1 = wedge(base, exterior_d(amb.eta)).max_norm()
    r2 = wedge(base, exterior_d(amb.Theta1)).max_norm()
    return r1, r2


# -- jet matching ------------------------------------------------------------

def _canonical_basis(J):
    """Columns (v, -Jv, w, -Jw) in which J is blockdiag([[0,1],[-1,0]])."""
    v = np.eye(4)[:, 0]
    cols = [v, -J @ v]
    Q, _ = np.linalg.qr(np.column_stack(cols))
    proj = np.eye(4) - Q @ Q.T
    k = int(np.argmax(np.linalg.norm(proj, axis=0)))
    w = proj[:, k]
    cols += [w, -J @ w]
    return np.column_stack(cols)


def match_jets(J, C, check_blocks: bool = True):
    """Minimum-norm eta' with eta' J - J eta' = C for J^2 = -I and JC + CJ = 0."""
    J = np.asarray(J, float)
    C = np.asarray(C, float)
    if np.max(np.abs(J @ J + np.eye(4))) > 1e-12:
        raise JetError("J does not square to -I")
    if np.max(np.abs(J @ C + C @ J)) > 1e-10 * max(1.0, np.max(np.abs(C))):
        raise JetError("unsolvable jet: right-hand side does not anticommute with J")
    I = np.eye(4)
    # column-major vec: vec(X J) = (J^T kron I) vec X, vec(J X) = (I kron J) vec X
    A = np.kron(J.T, I) - np.kron(I, J)
    x = np.linalg.lstsq(A, C.flatten(order="F"), rcond=None)[0]
    eta = x.reshape((4, 4), order="F")
    if check_blocks:
        P = _canonical_basis(J)
        Pi = np.linalg.inv(P)
        Cc, Ec = Pi @ C @ P, Pi @ eta @ P
        for i in range(2):
            for j in range(2):
                blk_c = Cc[2 * i:2 * i + 2, 2 * j:2 * j + 2]
                (u, v), (w, s) = Ec[2 * i:2 * i + 2, 2 * j:2 * j + 2]
                a_ij, b_ij = blk_c[0, 0], blk_c[0, 1]
                scale = 1e-9 * max(1.0, np.max(np.abs(Cc)))
                if abs(v + w + a_ij) > scale or abs(u - s - b_ij) > scale:
                    raise JetError("block relations failed in the canonical basis")
    return eta


def random_anticommuting(J, rng):
    """Random C with JC + CJ = 0, built from (a_ij, b_ij) blocks in the canonical basis."""
    P = _canonical_basis(np.asarray(J, float))
    C = np.zeros((4, 4))
    for i in range(2):
        for j in range(2):
            a, b = rng.standard_normal(2)
            C[2 * i:2 * i + 2, 2 * j:2 * j + 2] = [[a, b], [b, -a]]
    return P @ C @ np.linalg.inv(P)


def random_complex_structure(rng):
    """J = P J0 P^-1 for a random well-conditioned P."""
    J0 = np.kron(np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    while True:
        P = rng.standard_normal((4, 4))
        if np.linalg.cond(P) < 20:
            return P @ J0 @ np.linalg.inv(P)
