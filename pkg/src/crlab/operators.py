"""Differential operators on a solved pseudohermitian structure.

Endomorphisms of the contact plane are stored by frame components with the
convention E(Z1) = E[1,1b] Z1 + E[1,1] Z1b and E(Z1b) = E[1b,1b] Z1 + E[1b,1] Z1b,
so J has J[1,1b] = i, J[1b,1] = -i and the torsion A_J has E[1,1] = A11.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import Field, integrate
from .phstructure import PseudohermitianStructure


@dataclass
class EndomorphismField:
    E11: Field
    E11b: Field
    E1b1: Field
    E1b1b: Field
    anti_commuting: bool = False
    cr_structure: bool = False

    @classmethod
    def anticommuting(cls, E11: Field) -> "EndomorphismField":
        chart = E11.chart
        zero = Field.constant(chart, 0.0)
        return cls(E11.with_weight(2), zero, zero, E11.conj(), anti_commuting=True)

    @classmethod
    def cr(cls, K11: Field, branch: int = 1) -> "EndomorphismField":
        """Almost complex structure with K^2 = -I: K[1,1b] = +-i sqrt(1+|K11|^2)."""
        k = (K11.abs2() + 1.0).sqrt() * (1j * branch)
        return cls(K11.with_weight(2), k.with_weight(0), -k.with_weight(0), K11.conj(),
                   cr_structure=True)

    def components(self):
        return (self.E11, self.E11b, self.E1b1, self.E1b1b)

    def _map(self, fn, other=None):
        if other is None:
            parts = [fn(a) for a in self.components()]
        else:
            parts = [fn(a, b) for a, b in zip(self.components(), other.components())]
        return EndomorphismField(*parts)

    def __add__(self, other):
        out = self._map(lambda a, b: a + b, other)
        out.anti_commuting = self.anti_commuting and other.anti_commuting
        return out

    def __sub__(self, other):
        out = self._map(lambda a, b: a - b, other)
        out.anti_commuting = self.anti_commuting and other.anti_commuting
        return out

    def __mul__(self, s):
        out = self._map(lambda a: a * s)
        out.anti_commuting = self.anti_commuting
        return out

    __rmul__ = __mul__

    def max_norm(self):
        return max(c.max_norm() for c in self.components())

    def distance(self, other):
        return (self - other).max_norm()

    def matrix(self):
        """Pointwise 2x2 matrix in the basis (Z1, Z1b); columns are images."""
        e = [c.values for c in self.components()]
        return np.stack([np.stack([e[1], e[3]], -1), np.stack([e[0], e[2]], -1)], -2)

    def anticommutator_with_J(self, S):
        J = J_endomorphism(S)
        return compose(J, self) + compose(self, J)


def compose(E: EndomorphismField, F: EndomorphismField) -> EndomorphismField:
    """E∘F componentwise (matrix product in the (Z1, Z1b) basis)."""
    return EndomorphismField(
        E11=F.E11b * E.E11 + F.E11 * E.E1b1,
        E11b=F.E11b * E.E11b + F.E11 * E.E1b1b,
        E1b1=F.E1b1b * E.E11 + F.E1b1 * E.E1b1,
        E1b1b=F.E1b1b * E.E11b + F.E1b1 * E.E1b1b,
    )


def J_endomorphism(S: PseudohermitianStructure) -> EndomorphismField:
    c = S.chart
    zero = Field.constant(c, 0.0)
    return EndomorphismField(zero.with_weight(2), Field.constant(c, 1j), Field.constant(c, -1j),
                             zero.with_weight(-2), cr_structure=True)


def torsion_endomorphism(S: PseudohermitianStructure) -> EndomorphismField:
    return EndomorphismField.anticommuting(S.A11)


# -- frame <-> coordinate conversion ---------------------------------------

def endo_to_coord(E: EndomorphismField, S: PseudohermitianStructure):
    """Coordinate matrix M[a][b] with M(v)^a = M[a][b] v^b, annihilating T."""
    t1 = S.theta1.components()
    t1b = S.theta1b.components()
    Z1, Z1b = S.Z1, S.Z1b
    M = [[None] * 3 for _ in range(3)]
    for a in range(3):
        col1 = Z1[a] * E.E11b + Z1b[a] * E.E11
        col2 = Z1[a] * E.E1b1b + Z1b[a] * E.E1b1
        for b in range(3):
            M[a][b] = (col1 * t1[b] + col2 * t1b[b]).with_weight(0)
    return M


def apply_coord(M, v):
    out = []
    for a in range(3):
        acc = None
        for b in range(3):
            term = M[a][b] * v[b]
            acc = term if acc is None else acc + term
        out.append(acc)
    return out


def coord_to_endo(M, S: PseudohermitianStructure, anti_commuting=False) -> EndomorphismField:
    """Frame components of a coordinate endomorphism, restricted to the contact plane."""
    MZ1 = apply_coord(M, S.Z1)
    MZ1b = apply_coord(M, S.Z1b)
    t1, t1b = S.theta1, S.theta1b
    return EndomorphismField(
        E11=t1b.evaluate(MZ1).with_weight(2),
        E11b=t1.evaluate(MZ1).with_weight(0),
        E1b1=t1b.evaluate(MZ1b).with_weight(0),
        E1b1b=t1.evaluate(MZ1b).with_weight(-2),
        anti_commuting=anti_commuting,
    )


# -- operators -------------------------------------------------------------

def cartan_tensor(S: PseudohermitianStructure) -> Field:
    """Q11 = W,11/6 + (i/2) W A11 - A11,0 - (2i/3) A11,1b1."""
    W, A = S.W, S.A11
    Q = S.cov(W, "11") * (1.0 / 6.0) + W * A * 0.5j - S.cov(A, "0") - S.cov(A, "b1") * (2j / 3.0)
    return Q.with_weight(2)


def cartan_endomorphism(S: PseudohermitianStructure, Q11=None) -> EndomorphismField:
    Q11 = cartan_tensor(S) if Q11 is None else Q11
    return EndomorphismField.anticommuting(Q11 * 1j)


def op_DJ_component(S, f: Field) -> Field:
    f = f.with_weight(0)
    return (S.cov(f, "11") + S.A11 * f * 1j).with_weight(2)


def op_DJ(S: PseudohermitianStructure, f: Field) -> EndomorphismField:
    return EndomorphismField.anticommuting(op_DJ_component(S, f))


def op_DJ_star(S: PseudohermitianStructure, E: EndomorphismField) -> Field:
    E11 = E.E11.with_weight(2)
    E1b1b = E.E1b1b.with_weight(-2)
    out = (S.cov(E11, "bb") + S.cov(E1b1b, "11")
           - S.A1b1b * E11 * 1j + S.A11 * E1b1b * 1j)
    return out.with_weight(0)


def op_FJ(S: PseudohermitianStructure, K: EndomorphismField) -> Field:
    K11 = K.E11.with_weight(2)
    half = (K.E11b.with_weight(0) * S.cov(K11, "bb") + K.E1b1b.with_weight(-2) * S.cov(K11, "b1")) * 1j
    return (half + half.conj()).with_weight(0)


def op_frakD(S: PseudohermitianStructure, h: Field) -> Field:
    """(frakD h)_{1b1b} = h,1b1b - i A1b1b h."""
    h = h.with_weight(0)
    return (S.cov(h, "bb") - S.A1b1b * h * 1j).with_weight(-2)


def frakD_endomorphism(S, h: Field) -> EndomorphismField:
    comp = op_frakD(S, h)
    zero = Field.constant(S.chart, 0.0)
    return EndomorphismField(zero.with_weight(2), zero, zero, comp)


def two_re(E: EndomorphismField) -> EndomorphismField:
    """E + conj(E) for an endomorphism given by frame components."""
    return EndomorphismField(E.E11 + E.E1b1b.conj(), E.E11b + E.E1b1.conj(),
                             E.E1b1 + E.E11b.conj(), E.E1b1b + E.E11.conj())


def op_Lalpha(S: PseudohermitianStructure, C: Field, alpha: complex) -> Field:
    C = C.with_weight(2)
    out = -S.cov(C, "1b") - S.cov(C, "b1") + S.cov(C, "0") * (1j * alpha)
    return out.with_weight(2)


def contact_field(S: PseudohermitianStructure, f: Field):
    """X_f = -f T + i (Z1 f) Z1b - i (Z1b f) Z1 in frame components."""
    Z1f = S.directional(f, S.Z1)
    Z1bf = S.directional(f, S.Z1b)
    return [-(f * S.T[a]) + Z1f * S.Z1b[a] * 1j - Z1bf * S.Z1[a] * 1j for a in range(3)]


def action_energy(S: PseudohermitianStructure) -> float:
    return -integrate(S.W, S.volume())


# -- pairings --------------------------------------------------------------

def inner_endo(S, E: EndomorphismField, F: EndomorphismField) -> float:
    """2 Re ∫ E11 conj(F11) dvol."""
    return 2.0 * integrate((E.E11 * F.E11.conj()).real(), S.volume())


def inner_fn(S, f: Field, g: Field) -> float:
    return integrate((f * g.conj()).real(), S.volume())


def inner_weight2(S, C: Field, D: Field) -> complex:
    """∫ C conj(D) dvol for weight-2 fields (complex)."""
    p = C * D.conj()
    vol = S.volume()
    return integrate(p.real(), vol) + 1j * integrate(p.imag(), vol)
