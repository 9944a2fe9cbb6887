"""Exact polynomial expressions for the analytic models.

``Poly`` is a polynomial in z1, z2, conj(z1), conj(z2) with Wirtinger
derivatives.  ``HeisPoly`` is a sum of x^p y^q t^r exp(i k.(x,y,t)) terms,
closed under the left-invariant Heisenberg frame.  Both feed pointset fields
through ``analytic_field``.
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from .fields import Chart, Field


class Poly:
    """Sum of c * z1^a z2^b zb1^c zb2^d, keyed by exponent 4-tuples."""

    def __init__(self, terms=None):
        self.terms = {k: complex(v) for k, v in (terms or {}).items() if v != 0}

    @classmethod
    def const(cls, c):
        return cls({(0, 0, 0, 0): c})

    @classmethod
    def var(cls, j, bar=False):
        e = [0, 0, 0, 0]
        e[j + (2 if bar else 0)] = 1
        return cls({tuple(e): 1.0})

    def __add__(self, other):
        other = other if isinstance(other, Poly) else Poly.const(other)
        out = defaultdict(complex, self.terms)
        for k, v in other.terms.items():
            out[k] += v
        return Poly(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly({k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return Poly({k: v * other for k, v in self.terms.items()})
        out = defaultdict(complex)
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                out[tuple(a + b for a, b in zip(k1, k2))] += v1 * v2
        return Poly(out)

    __rmul__ = __mul__

    def __pow__(self, n):
        out = Poly.const(1.0)
        for _ in range(n):
            out = out * self
        return out

    def conj(self):
        return Poly({(k[2], k[3], k[0], k[1]): np.conj(v) for k, v in self.terms.items()})

    def d(self, slot):
        """Partial in slot 0..3 = (d/dz1, d/dz2, d/dzb1, d/dzb2)."""
        out = {}
        for k, v in self.terms.items():
            if k[slot]:
                e = list(k)
                e[slot] -= 1
                out[tuple(e)] = out.get(tuple(e), 0) + v * k[slot]
        return Poly(out)

    def degree(self):
        return max((sum(k) for k in self.terms), default=0)

    def __call__(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        vars_ = [z[:, 0], z[:, 1], np.conj(z[:, 0]), np.conj(z[:, 1])]
        out = np.zeros(len(z), dtype=complex)
        for k, v in self.terms.items():
            term = np.full(len(z), v, dtype=complex)
            for x, e in zip(vars_, k):
                if e:
                    term = term * x ** e
            out += term
        return out

    def __repr__(self):
        return f"Poly({len(self.terms)} terms, degree {self.degree()})"


class VectorPoly:
    """Derivation sum_s coeff[s] * d/d(slot s) with polynomial coefficients."""

    def __init__(self, coeffs):
        self.coeffs = list(coeffs)

    def __call__(self, p: Poly) -> Poly:
        out = Poly()
        for s, c in enumerate(self.coeffs):
            if c.terms:
                out = out + c * p.d(s)
        return out


class FrameExpr:
    """A Poly differentiated along a fixed list of derivations."""

    def __init__(self, poly: Poly, frame):
        self.poly, self.frame = poly, frame

    def __call__(self, points):
        return self.poly(points)

    def derivative(self, axis):
        return FrameExpr(self.frame[axis](self.poly), self.frame)


class HeisPoly:
    """Sum of c x^p y^q t^r exp(i(kx x + ky y + kt t)) with the frame
    (d/dx, d/dy - x d/dt, d/dt)."""

    def __init__(self, terms=None):
        self.terms = {k: complex(v) for k, v in (terms or {}).items() if v != 0}

    @classmethod
    def wave(cls, kx=0.0, ky=0.0, kt=0.0, c=1.0, powers=(0, 0, 0)):
        return cls({tuple(powers) + (float(kx), float(ky), float(kt)): c})

    def __add__(self, other):
        out = defaultdict(complex, self.terms)
        for k, v in other.terms.items():
            out[k] += v
        return HeisPoly(out)

    def _partial(self, ax):
        out = defaultdict(complex)
        for k, v in self.terms.items():
            if k[ax]:
                e = list(k)
                e[ax] -= 1
                out[tuple(e)] += v * k[ax]
            if k[3 + ax]:
                out[k] += 1j * k[3 + ax] * v
        return HeisPoly(out)

    def _times_x(self):
        return HeisPoly({(k[0] + 1,) + k[1:]: v for k, v in self.terms.items()})

    def derivative(self, axis):
        if axis == 0:
            return self._partial(0)
        if axis == 1:
            dt = self._partial(2)._times_x()
            return self._partial(1) + HeisPoly({k: -v for k, v in dt.terms.items()})
        return self._partial(2)

    def __call__(self, points):
        x, y, t = (points[:, a].real for a in range(3))
        out = np.zeros(len(points), dtype=complex)
        for k, v in self.terms.items():
            out += v * x ** k[0] * y ** k[1] * t ** k[2] * np.exp(1j * (k[3] * x + k[4] * y + k[5] * t))
        return out


def analytic_field(chart: Chart, expr, weight: int = 0) -> Field:
    """Pointset field backed by an expression with ``derivative(axis)``."""
    return Field(chart, expr(chart.points), weight,
                 deriv=lambda a: analytic_field(chart, expr.derivative(a), weight))


# -- round sphere frame ---------------------------------------------------

def sphere_frame():
    """Real frame (V0, V1, V2) on S^3: the Hopf field i(z d - zb db),
    V1 = 2Re Z, V2 = 2Re(iZ), Z = zb2 d1 - zb1 d2."""
    z1, z2 = Poly.var(0), Poly.var(1)
    zb1, zb2 = Poly.var(0, True), Poly.var(1, True)
    V0 = VectorPoly([z1 * 1j, z2 * 1j, zb1 * -1j, zb2 * -1j])
    V1 = VectorPoly([zb2, -zb1, z2, -z1])
    V2 = VectorPoly([zb2 * 1j, zb1 * -1j, z2 * -1j, z1 * 1j])
    return [V0, V1, V2]


def sphere_structure_constants():
    """[V_b, V_c] = c[a, b, c] V_a for ``sphere_frame``."""
    c = np.zeros((3, 3, 3))
    c[0, 1, 2], c[0, 2, 1] = -2.0, 2.0
    c[2, 0, 1], c[2, 1, 0] = -2.0, 2.0
    c[1, 0, 2], c[1, 2, 0] = 2.0, -2.0
    return c
