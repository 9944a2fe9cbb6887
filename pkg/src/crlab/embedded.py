"""Real hypersurfaces M = {gamma = 0} in C^2 and the identities that tie
ambient vector fields to the intrinsic pseudohermitian calculus.

Vectors are stored by their four Wirtinger slots (d/dz1, d/dz2, d/dzb1, d/dzb2).
Ambient scalars are ``AFn`` objects: an exact ``Poly`` when the geometry has a
closed-form frame, otherwise a numeric callable whose Wirtinger derivatives
are central differences with step ``h``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import warnings

import numpy as np
from scipy.stats import qmc

from .poly import Poly

FD_STEP = 1e-4


class EmbeddingError(ValueError):
    pass


# -- ambient scalars -----------------------------------------------------------

class AFn:
    """Complex function on C^2 (points as (N, 2) complex arrays)."""

    def __init__(self, fn=None, poly: Optional[Poly] = None, h: float = FD_STEP):
        self.poly = poly
        self.fn = fn
        self.h = h

    @classmethod
    def const(cls, c, h=FD_STEP):
        return cls(poly=Poly.const(c), h=h)

    def __call__(self, z):
        z = np.atleast_2d(z)
        if self.poly is not None:
            return self.poly(z)
        return np.broadcast_to(np.asarray(self.fn(z), dtype=complex), (len(z),)).copy()

    def _lift(self, other):
        return other if isinstance(other, AFn) else AFn.const(other, self.h)

    def _combine(self, other, pop, fop):
        other = self._lift(other)
        if self.poly is not None and other.poly is not None:
            return AFn(poly=pop(self.poly, other.poly), h=self.h)
        return AFn(lambda z: fop(self(z), other(z)), h=min(self.h, other.h))

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b, lambda a, b: a - b)

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        return self._combine(other, lambda a, b: a * b, lambda a, b: a * b)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def conj(self):
        if self.poly is not None:
            return AFn(poly=self.poly.conj(), h=self.h)
        return AFn(lambda z: np.conj(self(z)), h=self.h)

    def wirtinger(self, slot: int) -> "AFn":
        if self.poly is not None:
            return AFn(poly=self.poly.d(slot), h=self.h)
        j, bar = slot % 2, slot >= 2
        h = self.h

        def d(z):
            e = np.zeros(2, dtype=complex)
            e[j] = h
            dx = (self(z + e) - self(z - e)) / (2 * h)
            dy = (self(z + 1j * e) - self(z - 1j * e)) / (2 * h)
            return 0.5 * (dx + 1j * dy) if bar else 0.5 * (dx - 1j * dy)

        return AFn(d, h=h)

    def along(self, V) -> "AFn":
        """Directional derivative along a slot vector V (four AFn)."""
        out = None
        for s, c in enumerate(V):
            if c is None:
                continue
            term = c * self.wirtinger(s)
            out = term if out is None else out + term
        return out if out is not None else AFn.const(0.0, self.h)


def _vec_vals(V, z):
    return [np.zeros(len(z), complex) if c is None else c(z) for c in V]


# -- geometry ------------------------------------------------------------------

@dataclass
class HypersurfaceGeometry:
    """M = {gamma = 0} with gamma a real polynomial in z, zb."""

    name: str
    gamma: Poly
    closed_form: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        g = self.gamma
        self.gz = [g.d(0), g.d(1)]
        self.H = [[self.gz[j].d(2 + k) for k in range(2)] for j in range(2)]

    # sampling
    def sample(self, n: int, seed: int = 0, tol: float = 1e-13):
        """Quasi-random points on M: scrambled Sobol on S^3 parameters, then Newton on gamma."""
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)  # non power-of-two sizes are fine here
            u = qmc.Sobol(d=3, scramble=True, seed=seed).random(n)
        u = np.clip(u, 1e-6, 1 - 1e-6)
        z = np.column_stack([np.sqrt(u[:, 0]) * np.exp(2j * np.pi * u[:, 1]),
                             np.sqrt(1 - u[:, 0]) * np.exp(2j * np.pi * u[:, 2])])
        return self.project(z, tol)

    def project(self, z, tol=1e-13, maxit=50):
        z = np.array(z, dtype=complex)
        for _ in range(maxit):
            g = self.gamma(z).real
            if np.max(np.abs(g)) <= tol:
                break
            gz = np.column_stack([p(z) for p in self.gz])
            step = -g[:, None] * np.conj(gz) / (2 * np.sum(np.abs(gz) ** 2, axis=1))[:, None]
            z = z + step
        if np.max(np.abs(self.gamma(z).real)) > 1e-10:
            raise EmbeddingError("Newton projection onto M did not converge")
        return z

    def levi_hessian(self, z):
        return np.array([[self.H[j][k](z) for k in range(2)] for j in range(2)]).transpose(2, 0, 1)

    def frame(self, closed: Optional[bool] = None, h: float = FD_STEP) -> "AdaptedFrame":
        use_closed = self.closed_form if closed is None else closed
        if use_closed:
            if not self.closed_form:
                raise EmbeddingError(f"{self.name} has no closed-form frame")
            return _sphere_frame(self, h)
        return _numeric_frame(self, h)

    def intrinsic(self, samples):
        """(theta, theta1) on a pointset chart through the round-sphere frame."""
        if self.name != "sphere":
            raise EmbeddingError("intrinsic pointset charts exist for the round sphere only")
        from .catalog import CatalogGeometry
        from .fields import Chart, Field, Form
        from .poly import sphere_structure_constants

        chart = Chart.pointset(samples, sphere_structure_constants(), names=("z1", "z2"))
        one = Field.constant(chart, 1.0)
        zero = Field.constant(chart, 0.0)
        theta = Form.from_components(chart, [one, zero, zero])
        theta1 = Form.from_components(chart, [zero, one, one * 1j])
        return CatalogGeometry("sphere", chart, theta, theta1)


def hypersurface(name: str, params=None) -> HypersurfaceGeometry:
    params = dict(params or {})
    z1, z2 = Poly.var(0), Poly.var(1)
    zb1, zb2 = Poly.var(0, True), Poly.var(1, True)
    r2 = z1 * zb1 + z2 * zb2
    if name == "sphere":
        return HypersurfaceGeometry("sphere", r2 - 1.0, closed_form=True)
    if name == "ellipsoid":
        a = float(params.get("a", 2.0))
        return HypersurfaceGeometry("ellipsoid", z1 * zb1 + z2 * zb2 * a - 1.0, params={"a": a})
    if name == "sphere-perturbed":
        eps = float(params.get("eps", 0.01))
        mode = int(params.get("mode", 1))
        pert = {1: z1 * z1 * zb2, 2: z1 * z1 * zb1 * zb1, 3: z1 * z2 * zb1}.get(mode)
        if pert is None:
            raise EmbeddingError(f"unknown perturbation mode {mode}")
        re = (pert + pert.conj()) * 0.5
        return HypersurfaceGeometry("sphere-perturbed", r2 - 1.0 + re * eps,
                                    params={"eps": eps, "mode": mode})
    raise EmbeddingError(f"unknown hypersurface {name!r}")


# -- adapted frames ------------------------------------------------------------

@dataclass
class AdaptedFrame:
    """theta = -i d gamma, adapted theta1, and dual (1,0) vectors i zeta, Z1."""

    geom: HypersurfaceGeometry
    theta: list
    theta1: list
    izeta: list
    Z1: list
    path: str
    h: float = FD_STEP

    # slot vectors
    @property
    def Z(self):
        return [self.Z1[0], self.Z1[1], None, None]

    @property
    def Zb(self):
        return [None, None, self.Z1[0].conj(), self.Z1[1].conj()]

    @property
    def T(self):
        return [self.izeta[0], self.izeta[1], self.izeta[0].conj(), self.izeta[1].conj()]

    @property
    def iz(self):
        return [self.izeta[0], self.izeta[1], None, None]

    @property
    def izb(self):
        return [None, None, self.izeta[0].conj(), self.izeta[1].conj()]

    def dtheta1(self, V, W, z):
        """d theta1 (V, W) at points z: sum_j (V c_j) W^j - (W c_j) V^j."""
        Vv, Wv = _vec_vals(V, z), _vec_vals(W, z)
        out = np.zeros(len(z), complex)
        for j, c in enumerate(self.theta1):
            out += c.along(V)(z) * Wv[j] - c.along(W)(z) * Vv[j]
        return out


def _sphere_frame(geom, h):
    z1, z2 = Poly.var(0), Poly.var(1)
    zb1, zb2 = Poly.var(0, True), Poly.var(1, True)
    A = lambda p: AFn(poly=p, h=h)
    return AdaptedFrame(geom, [A(zb1 * -1j), A(zb2 * -1j)], [A(-z2), A(z1)],
                        [A(z1 * 1j), A(z2 * 1j)], [A(-zb2), A(zb1)], "closed", h)


def adapted_data(geom: HypersurfaceGeometry, z):
    """Pointwise adapted coframe construction at arbitrary points z (off M too).

    Starting from theta1_0 = -conj(g2) dz1 + conj(g1) dz2 with g = d gamma / dz,
    read h and g1 off d theta = i H_{jk} dz_j ^ dzb_k, then set
    theta1 = sqrt(h) theta1_0 + v theta with v = -i g1 / sqrt(h).
    """
    z = np.atleast_2d(z)
    gz = np.column_stack([p(z) for p in geom.gz])
    th = -1j * gz
    t10 = np.column_stack([-np.conj(gz[:, 1]), np.conj(gz[:, 0])])
    H = geom.levi_hessian(z)
    inv0 = np.linalg.inv(np.stack([th, t10], axis=1))
    iz0, Z0 = inv0[:, :, 0], inv0[:, :, 1]
    hlevi = np.einsum("nj,njk,nk->n", Z0, H, np.conj(Z0)).real
    if np.any(hlevi <= 0):
        raise EmbeddingError("Levi form is not positive")
    g1 = 1j * np.einsum("nj,njk,nk->n", iz0, H, np.conj(Z0))
    rho = 1j * np.einsum("nj,njk,nk->n", iz0, H, np.conj(iz0))
    U = np.sqrt(hlevi)
    v = -1j * g1 / U
    t1 = U[:, None] * t10 + v[:, None] * th
    inv = np.linalg.inv(np.stack([th, t1], axis=1))
    return dict(theta=th, theta1=t1, izeta=inv[:, :, 0], Z1=inv[:, :, 1], h=hlevi, g1=g1,
                rho=rho, U=U, v=v)


def _numeric_frame(geom, h):
    def comp(key, j):
        return AFn(lambda z: adapted_data(geom, z)[key][:, j], h=h)

    return AdaptedFrame(geom, [comp("theta", 0), comp("theta", 1)],
                        [comp("theta1", 0), comp("theta1", 1)],
                        [comp("izeta", 0), comp("izeta", 1)],
                        [comp("Z1", 0), comp("Z1", 1)], "difference", h)


def adapted_coframe(geom: HypersurfaceGeometry, p):
    """(theta, theta1, h, rho) at points p of M; h is the Levi form before rescaling."""
    d = adapted_data(geom, p)
    return d["theta"], d["theta1"], d["h"], d["rho"]


def coframe_residual(geom: HypersurfaceGeometry, p) -> float:
    """max |d theta - i theta1 ^ conj(theta1) - rho theta ^ conj(theta)| on (1,0) x (0,1) pairs."""
    d = adapted_data(geom, p)
    H = geom.levi_hessian(p)
    vecs = [d["izeta"], d["Z1"]]
    coframe = [d["theta"], d["theta1"]]
    rho = 1j * np.einsum("nj,njk,nk->n", d["izeta"], H, np.conj(d["izeta"]))
    worst = 0.0
    for a, V in enumerate(vecs):
        for b, W in enumerate(vecs):
            lhs = 1j * np.einsum("nj,njk,nk->n", V, H, np.conj(W))
            model = np.zeros(len(p), complex)
            # i theta1 ^ conj(theta1) and rho theta ^ conj(theta) on (V, conj W)
            t1V = np.sum(coframe[1] * V, axis=1)
            t1W = np.sum(coframe[1] * W, axis=1)
            t0V = np.sum(coframe[0] * V, axis=1)
            t0W = np.sum(coframe[0] * W, axis=1)
            model += 1j * t1V * np.conj(t1W) + rho * t0V * np.conj(t0W)
            worst = max(worst, float(np.max(np.abs(lhs - model))))
    return worst


# -- connection and torsion at M -------------------------------------------------

@dataclass
class PointStructure:
    omega0: np.ndarray
    omega1: np.ndarray
    omega1b: np.ndarray
    A1b1b: np.ndarray
    lam: np.ndarray
    re_omega0: float
    path: str

    @property
    def A11(self):
        return np.conj(self.A1b1b)


def connection_torsion_at(geom: HypersurfaceGeometry, p, frame: Optional[AdaptedFrame] = None):
    """omega_1^1 (frame components), torsion A^1_1b and the theta^conj(theta) coefficient at p.

    The frame expansion of d theta1 on the tangent frame (T, Z1, Z1b) is the
    symmetrized connection: the omega(T) coefficient's real part, which must
    vanish at M, is returned as a residual and projected away.
    """
    F = frame or geom.frame()
    c01 = F.dtheta1(F.T, F.Z, p)
    c01b = F.dtheta1(F.T, F.Zb, p)
    c11b = F.dtheta1(F.Z, F.Zb, p)
    lam = F.dtheta1(F.iz, F.izb, p)
    w0 = -c01
    return PointStructure(1j * w0.imag, -np.conj(c11b), c11b, c01b, lam,
                          float(np.max(np.abs(w0.real))), F.path)


# -- Y_f and d-bar_b --------------------------------------------------------------

def as_afn(f, h=FD_STEP) -> AFn:
    if isinstance(f, AFn):
        return f
    if isinstance(f, Poly):
        return AFn(poly=f, h=h)
    if callable(f):
        return AFn(f, h=h)
    return AFn.const(f, h)


def vector_Yf(F: AdaptedFrame, f):
    """Ambient (1,0) components of Y_f = i(f zeta + f^{,1} Z1) = f (i zeta) + i (Z1b f) Z1."""
    f = as_afn(f, F.h)
    fb = f.along(F.Zb)
    return [f * F.izeta[l] + fb * F.Z1[l] * 1j for l in range(2)]


def Yf_residuals(F: AdaptedFrame, f, p):
    """(|theta(Y_f) - f|, |dtheta(Y_f, Z1b) + Z1b f|, |d gamma(2 Re Y_f) + 2 Im f|) maxima."""
    f = as_afn(f, F.h)
    Y = [c(p) for c in vector_Yf(F, f)]
    th = np.column_stack([c(p) for c in F.theta])
    r1 = np.abs(np.sum(th * np.column_stack(Y), axis=1) - f(p))
    H = F.geom.levi_hessian(p)
    Zb = np.column_stack([c(p) for c in F.Z1])
    dth = 1j * np.einsum("nj,njk,nk->n", np.column_stack(Y), H, np.conj(Zb))
    r2 = np.abs(dth + f.along(F.Zb)(p))
    gz = np.column_stack([q(p) for q in F.geom.gz])
    dgamma = 2 * np.real(np.sum(gz * np.column_stack(Y), axis=1))
    r3 = np.abs(dgamma + 2 * f(p).imag)
    return float(r1.max()), float(r2.max()), float(r3.max())


def dbar_b_Y(F: AdaptedFrame, f, p):
    """(d-bar_b Y_f)(Z1b): Z1b applied to each ambient component of Y_f."""
    Y = vector_Yf(F, f)
    return np.column_stack([c.along(F.Zb)(p) for c in Y])


def frakD_value(F: AdaptedFrame, f, p, S: Optional[PointStructure] = None):
    """(frakD f)_{1b1b} = f,1b1b - i A1b1b f via covariant derivatives at p."""
    f = as_afn(f, F.h)
    S = S or connection_torsion_at(F.geom, p, F)
    fb = f.along(F.Zb)
    f_bb = fb.along(F.Zb)(p) + S.omega1b * fb(p)
    return f_bb - 1j * S.A1b1b * f(p)


def dbar_b_check(geom: HypersurfaceGeometry, f, samples, closed: Optional[bool] = None,
                 h: float = FD_STEP):
    """Max componentwise |d-bar_b Y_f (Z1b) - i (frakD f) Z1| over samples."""
    F = geom.frame(closed, h)
    lhs = dbar_b_Y(F, f, samples)
    D = frakD_value(F, f, samples)
    Z = np.column_stack([c(samples) for c in F.Z1])
    rhs = 1j * D[:, None] * Z
    return float(np.max(np.abs(lhs - rhs))), F.path


def frakD_norm(geom, f, samples, closed=None, h=FD_STEP):
    F = geom.frame(closed, h)
    return np.abs(frakD_value(F, f, samples))


# -- endomorphisms of xi in the real basis (X1, X2) = (2 Re Z1, 2 Re iZ1) ---------

def re_frakD_matrix(D):
    """Real 2x2 matrices of 2 Re(D conj(theta1) ⊗ Z1), columns are images of X1, X2."""
    D = np.asarray(D)
    return np.stack([np.stack([D.real, D.imag], -1), np.stack([D.imag, -D.real], -1)], -1)


def route_agreement(geom, f, samples, closed=None, h=FD_STEP):
    """Max difference of 4 Im(d-bar_b Y_f) and 4 Re(frakD f) as endomorphisms of xi."""
    F = geom.frame(closed, h)
    V = dbar_b_Y(F, f, samples)
    th = np.column_stack([c(samples) for c in F.theta])
    t1 = np.column_stack([c(samples) for c in F.theta1])
    v1 = np.sum(t1 * V, axis=1)
    v0 = np.sum(th * V, axis=1)
    Dprime = -1j * v1  # d-bar_b Y = i D' conj(theta1) ⊗ Z1
    m1 = 2 * re_frakD_matrix(Dprime)  # 4 Im(i D' ...) = 4 Re(D' ...)
    m2 = 2 * re_frakD_matrix(frakD_value(F, f, samples))
    return float(np.max(np.abs(m1 - m2))), float(np.max(np.abs(v0)))


# -- chi_f and Lie transport of J ---------------------------------------------

def _real_tangent_basis(F, p):
    Z = np.column_stack([c(p) for c in F.Z1])
    iz = np.column_stack([c(p) for c in F.izeta])
    # as C^2 position increments: a real vector 2 Re V acts on points by V's (1,0) part
    X1, X2, T = Z, 1j * Z, iz
    return X1, X2, T


def chi_embedding(geom, f, samples, closed=None, h: float = 1e-5, angles: int = 8):
    """chi_f(p) = p + Y_f(p) and its CR defect at each sample.

    The defect is |d chi(J v) - i d chi(v)| / min |d chi(v)| over unit v in xi;
    the numerator does not depend on the direction of v.
    """
    F = geom.frame(closed)
    Y = vector_Yf(F, f)

    def chi(q):
        return q + np.column_stack([c(q) for c in Y])

    X1, X2, _ = _real_tangent_basis(F, samples)
    d1 = (chi(samples + h * X1) - chi(samples - h * X1)) / (2 * h)
    d2 = (chi(samples + h * X2) - chi(samples - h * X2)) / (2 * h)
    num = np.linalg.norm(d2 - 1j * d1, axis=1)
    phis = np.linspace(0, np.pi, angles, endpoint=False)
    den = np.min([np.linalg.norm(np.cos(a) * d1 + np.sin(a) * d2, axis=1) for a in phis], axis=0)
    image = chi(samples)
    if np.any(den < 1e-3):
        raise EmbeddingError("chi_f degenerates: f is too large for a tubular neighborhood")
    return image, num / den


def _as_real(v):
    return np.concatenate([v.real, v.imag], axis=-1)


def pulled_back_J(B):
    """J on the tangent 3-plane spanned by columns of B (N, 3 vectors in C^2),
    projected onto the first two basis vectors: least-squares coefficients of i*B."""
    out = np.empty((B.shape[0], 2, 2))
    for n in range(B.shape[0]):
        R = np.column_stack([_as_real(B[n, k]) for k in range(3)])
        rhs = np.column_stack([_as_real(1j * B[n, k]) for k in range(2)])
        c = np.linalg.lstsq(R, rhs, rcond=None)[0]
        out[n] = c[:2, :]
    return out


def tangency_check(geom, f, eps: float, samples, closed=None, h: float = 1e-5):
    """Max difference between the central-differenced pullback of J_{C^2} under
    the Euler map p -> p + eps * 2 Re Y_f(p) and -4 Re(frakD f), on xi.

    With L_X J = d/de (phi_e^* J), the sign matching L_{X_f} J = 2 D_J f
    (and 2 Re Y_f = -X_f for real f) is negative.
    """
    F = geom.frame(closed)
    Y = vector_Yf(F, f)
    X1, X2, T = _real_tangent_basis(F, samples)
    basis = [X1, X2, T]

    def Yv(q):
        return np.column_stack([c(q) for c in Y])

    # derivative of the displacement 2 Re Y along each real tangent vector
    dY = [(Yv(samples + h * v) - Yv(samples - h * v)) / (2 * h) for v in basis]

    def J_at(e):
        # a real vector with (1,0) part V moves points by V; 2 Re Y moves them by Y
        B = np.stack([basis[k] + e * dY[k] for k in range(3)], axis=1)
        return pulled_back_J(B)

    lie = (J_at(eps) - J_at(-eps)) / (2 * eps)
    target = -2 * re_frakD_matrix(frakD_value(F, f, samples))
    return float(np.max(np.abs(lie - target)))
