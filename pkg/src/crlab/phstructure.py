"""Pseudohermitian structures: admissible coframes, structure equations,
covariant derivatives and the identity checks that go with them.

Index strings for covariant derivatives use ``'1'`` for 1, ``'b'`` for 1-bar
and ``'0'`` for the Reeb direction, applied left to right: ``cov(f, "1b")``
is f_{,1 1bar}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .fields import Chart, Field, Form, exterior_d, wedge

DEGENERATE_TOL = 1e-10


class StructureError(ValueError):
    pass


def _inverse3(m):
    """Pointwise inverse of a 3x3 matrix of Fields via cofactors."""
    cof = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(3):
            r = [k for k in range(3) if k != i]
            c = [k for k in range(3) if k != j]
            minor = m[r[0]][c[0]] * m[r[1]][c[1]] - m[r[0]][c[1]] * m[r[1]][c[0]]
            cof[i][j] = minor if (i + j) % 2 == 0 else -minor
    det = m[0][0] * cof[0][0] + m[0][1] * cof[0][1] + m[0][2] * cof[0][2]
    if np.min(np.abs(det.values)) < DEGENERATE_TOL:
        raise StructureError("coframe basis is pointwise singular")
    inv_det = det.reciprocal()
    return [[cof[j][i] * inv_det for j in range(3)] for i in range(3)]


def reeb_field(theta: Form):
    """Reeb field components from theta alone: theta(T) = 1, T ⌟ dtheta = 0."""
    dth = exterior_d(theta)
    v = [dth[(1, 2)], dth[(2, 0)], dth[(0, 1)]]
    norm = theta[(0,)] * v[0] + theta[(1,)] * v[1] + theta[(2,)] * v[2]
    if np.min(np.abs(norm.values)) < DEGENERATE_TOL:
        raise StructureError("degenerate contact form: theta ^ dtheta vanishes")
    inv = norm.reciprocal()
    return [c * inv for c in v]


def contract1(form: Form, v) -> Field:
    return form.evaluate(v)


def admissible_coframe(theta: Form, theta1: Form, tol: float = 1e-8):
    """Rescale ``theta1`` by a positive factor so dtheta = i theta1 ^ conj(theta1).

    Returns ``(theta1_normalized, scale)``; the phase is left to the caller.
    """
    T = reeb_field(theta)
    res = contract1(theta1, T).max_norm()
    if res > tol:
        raise StructureError(f"theta1(T) residual {res:.2e} above {tol:.1e}")
    dth = exterior_d(theta)
    inv = _inverse3(_coframe_matrix(theta, theta1))
    Z1 = [inv[a][1] for a in range(3)]
    Z1b = [inv[a][2] for a in range(3)]
    h = (dth.evaluate(Z1, Z1b) * (-1j)).real()
    if np.min(h.values.real) <= 0:
        raise StructureError("Levi form is not positive for this orientation")
    scale = h.sqrt()
    return theta1 * scale, scale


def _coframe_matrix(theta, theta1):
    t1b = theta1.conj()
    return [theta.components(), theta1.components(), t1b.components()]


@dataclass
class PseudohermitianStructure:
    chart: Chart
    theta: Form
    theta1: Form
    T: list
    Z1: list
    Z1b: list
    omega: Form
    omega0: Field
    omega1: Field
    omega1b: Field
    A11: Field
    W: Field
    residuals: dict = field(default_factory=dict)

    @property
    def theta1b(self) -> Form:
        return self.theta1.conj()

    @property
    def A1b1b(self) -> Field:
        return self.A11.conj()

    # -- covariant calculus ---------------------------------------------
    def directional(self, C: Field, v) -> Field:
        out = None
        for a, va in enumerate(v):
            if np.all(va.values == 0):
                continue
            term = va * C.diff(a)
            out = term if out is None else out + term
        if out is None:
            out = Field.constant(C.chart, 0.0)
        return out.with_weight(C.weight)

    def cov1(self, C: Field, d: str) -> Field:
        k = C.weight
        if d == "1":
            out = self.directional(C, self.Z1) - self.omega1 * C * k
            return out.with_weight(k + 1)
        if d == "b":
            out = self.directional(C, self.Z1b) - self.omega1b * C * k
            return out.with_weight(k - 1)
        if d == "0":
            out = self.directional(C, self.T) - self.omega0 * C * k
            return out.with_weight(k)
        raise ValueError(f"unknown direction {d!r}")

    def cov(self, C: Field, indices: str) -> Field:
        for d in indices:
            C = self.cov1(C, d)
        return C

    def volume(self) -> Form:
        """theta ^ dtheta with the orientation making its integral positive."""
        vol = wedge(self.theta, exterior_d(self.theta))
        sign = self.residuals.get("orientation", 1.0)
        return vol * sign

    def J_coord(self):
        """Coordinate (frame-basis) matrix of J = i theta1⊗Z1 - i theta1b⊗Z1b."""
        t1 = self.theta1.components()
        t1b = self.theta1b.components()
        return [[(self.Z1[a] * t1[b] - self.Z1b[a] * t1b[b]) * 1j for b in range(3)]
                for a in range(3)]


def covariant_derivative(C: Field, direction, S: PseudohermitianStructure) -> Field:
    """C_{,1}, C_{,1bar} or C_{,0}; direction in {'1', 'b', '0', 1, -1, 0}."""
    key = {1: "1", -1: "b", 0: "0", "1b": "b", "1bar": "b"}.get(direction, direction)
    if not C.chart.same_grid(S.chart):
        raise StructureError("field and structure live on different charts")
    return S.cov1(C, key)


def solve_structure(theta: Form, theta1: Form, tol: float = 1e-6) -> PseudohermitianStructure:
    """Connection form, torsion and Tanaka-Webster curvature of (theta, theta1)."""
    chart = theta.chart
    dth = exterior_d(theta)
    if np.min(np.abs(wedge(theta, dth)[(0, 1, 2)].values)) < DEGENERATE_TOL:
        raise StructureError("degenerate contact form: theta ^ dtheta vanishes")
    inv = _inverse3(_coframe_matrix(theta, theta1))
    T = [inv[a][0] for a in range(3)]
    Z1 = [inv[a][1] for a in range(3)]
    Z1b = [inv[a][2] for a in range(3)]
    theta1b = theta1.conj()

    dt1 = exterior_d(theta1)
    c01 = dt1.evaluate(T, Z1)
    c01b = dt1.evaluate(T, Z1b)
    c11b = dt1.evaluate(Z1, Z1b)

    raw0 = -c01
    re_omega0 = raw0.real().max_norm()
    if re_omega0 > tol:
        raise StructureError(f"Re(omega(T)) residual {re_omega0:.2e}: inconsistent input")
    omega0 = raw0.imag() * 1j
    omega1 = -c11b.conj()
    omega1b = c11b
    omega = theta * omega0 + theta1 * omega1 + theta1b * omega1b
    A1_1b = c01b.with_weight(-2)
    A11 = A1_1b.conj()

    S = PseudohermitianStructure(chart, theta, theta1, T, Z1, Z1b, omega, omega0,
                                 omega1, omega1b, A11, Field.constant(chart, 0.0))
    domega = exterior_d(omega)
    W_raw = domega.evaluate(Z1, Z1b)
    S.W = W_raw.real().with_weight(0)
    A11_1b = S.cov(A11, "b")

    res = {
        "re_omega0": re_omega0,
        "im_W": W_raw.imag().max_norm(),
        "res21": (dth - wedge(theta1, theta1b) * 1j).max_norm(),
        "res22": (dt1 - wedge(theta1, omega) - wedge(theta, theta1b) * A1_1b).max_norm(),
        "res24": max((domega.evaluate(Z1, T) - A11_1b).max_norm(),
                     (domega.evaluate(Z1b, T) + A11_1b.conj()).max_norm(),
                     (W_raw - S.W).max_norm()),
        "reeb": max((theta.evaluate(T) - 1.0).max_norm(), theta1.evaluate(T).max_norm(),
                    max(c.max_norm() for c in dth.interior(T).components())),
    }
    if chart.kind in ("periodic3", "invariant2"):
        vol = wedge(theta, dth)[(0, 1, 2)]
        res["orientation"] = 1.0 if np.sum(vol.values.real) >= 0 else -1.0
    S.residuals = res
    return S


@dataclass
class DeformationState:
    """theta1 = alpha theta1_base + beta conj(theta1_base), alpha = sqrt(1+|beta|^2)."""

    base: PseudohermitianStructure
    beta: Field

    @property
    def alpha(self) -> Field:
        return (self.beta.abs2() + 1.0).sqrt()

    def theta1(self) -> Form:
        return self.base.theta1 * self.alpha + self.base.theta1b * self.beta

    def structure(self, tol: float = 1e-6) -> PseudohermitianStructure:
        return solve_structure(self.base.theta, self.theta1(), tol)


def rescale_contact_form(S: PseudohermitianStructure, f: Field, tol: float = 1e-6):
    """Structure for e^{2f} theta with the same CR structure J."""
    scale = (f * 2.0).exp()
    theta_new = S.theta * scale
    T_new = reeb_field(theta_new)
    t1_T = contract1(S.theta1, T_new)
    raw = S.theta1 - theta_new * t1_T
    theta1_new, _ = admissible_coframe(theta_new, raw, tol=max(tol, 1e-8))
    return solve_structure(theta_new, theta1_new, tol)


def random_bandlimited(chart: Chart, rng, kmax: int = 3, weight: int = 0,
                       real: bool = False, amplitude: float = 1.0) -> Field:
    """Random trigonometric polynomial with modes |k_i| <= kmax on the periodic axes."""
    axes = chart.spectral_array_axes()
    spec = np.zeros(chart.shape, dtype=complex)
    idx = []
    for ax in range(len(chart.shape)):
        if ax in axes:
            n = chart.shape[ax]
            idx.append(np.r_[0:kmax + 1, n - kmax:n])
        else:
            idx.append(np.arange(chart.shape[ax]))
    sub = np.ix_(*idx)
    shape = tuple(len(i) for i in idx)
    spec[sub] = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    vals = np.fft.ifftn(spec, axes=axes) * np.prod([chart.shape[a] for a in axes])
    vals /= np.sqrt(np.prod(shape))
    if real:
        vals = vals.real
    return Field(chart, amplitude * vals, weight)


def commutation_residuals(S: PseudohermitianStructure, C: Field) -> list:
    """Max-norm residuals of the three commutation relations for a weight-k field."""
    k = C.weight
    A, Ab = S.A11, S.A1b1b
    r1 = S.cov(C, "01") - S.cov(C, "10") - (S.cov(C, "b") * A - C * S.cov(A, "b") * k)
    r2 = S.cov(C, "0b") - S.cov(C, "b0") - (S.cov(C, "1") * Ab + C * S.cov(Ab, "1") * k)
    r3 = S.cov(C, "1b") - S.cov(C, "b1") - (S.cov(C, "0") * 1j + C * S.W * k)
    return [r1.max_norm(), r2.max_norm(), r3.max_norm()]


def bianchi_residual(S: PseudohermitianStructure) -> float:
    lhs = S.cov(S.W, "0")
    rhs = S.cov(S.A11, "bb") + S.cov(S.A1b1b, "11")
    return (lhs - rhs).max_norm()


def verify_identities(S: PseudohermitianStructure, fields=None, rng=None, eps: float = 1e-3,
                      weights=(-2, -1, 0, 1, 2), reeb_check: bool = True) -> dict:
    """Residual report for the commutation relations, the Bianchi identity and L_T J = 2 J∘A."""
    if fields is None:
        if S.chart.kind == "pointset":
            raise StructureError("pointset charts need explicit test fields")
        rng = rng if rng is not None else np.random.default_rng(0)
        fields = [random_bandlimited(S.chart, rng, weight=k) for k in weights]
    comm = [commutation_residuals(S, C) for C in fields]
    report = {
        "commutation": [max(r[i] for r in comm) for i in range(3)],
        "bianchi": bianchi_residual(S),
        "structure": {k: v for k, v in S.residuals.items() if k != "orientation"},
    }
    if reeb_check and S.chart.kind == "periodic3":
        from .operators import EndomorphismField, compose, J_endomorphism, torsion_endomorphism
        from .transport import lie_derivative_endo

        LTJ = lie_derivative_endo(S, S.T, S.J_coord(), eps)
        target = compose(J_endomorphism(S), torsion_endomorphism(S)) * 2.0
        report["reeb_lie"] = LTJ.distance(target)
    return report
