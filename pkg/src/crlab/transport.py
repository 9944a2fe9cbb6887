"""Lie derivatives of endomorphism fields by transport along a flow.

The flow map of a vector field X on a periodic3 chart is integrated with RK4,
evaluating X off-grid through a Taylor expansion whose derivatives are exact
spectral derivatives.  The pulled-back endomorphism dphi^-1 M(phi) dphi is
central-differenced in the flow time.  This is an independent oracle: it
never touches covariant derivatives or the structure equations.
"""

from __future__ import annotations

import itertools
from math import factorial

import numpy as np
from scipy import fft as sfft

from .fields import Chart, ChartError


def _multi_indices(order):
    return [a for a in itertools.product(range(order + 1), repeat=3) if sum(a) <= order]


class TaylorEvaluator:
    """Off-grid evaluation of band-limited periodic arrays by Taylor expansion."""

    def __init__(self, chart: Chart, arrays, order: int = 6):
        if chart.kind != "periodic3":
            raise ChartError("transport needs a periodic3 chart")
        self.chart = chart
        self.order = order
        self.alphas = _multi_indices(order)
        ks = [1j * chart.wavenumbers(ax)[0] * (chart.wavenumbers(ax)[1] < chart.shape[ax] / 2)
              for ax in range(3)]
        self.derivs = []
        for arr in arrays:
            spec = sfft.fftn(arr)
            d = {}
            for a in self.alphas:
                mult = ks[0] ** a[0] * ks[1] ** a[1] * ks[2] ** a[2]
                d[a] = sfft.ifftn(spec * mult) / (factorial(a[0]) * factorial(a[1]) * factorial(a[2]))
            self.derivs.append(d)

    def __call__(self, delta):
        powers = [[np.ones_like(delta[i])] for i in range(3)]
        for i in range(3):
            for _ in range(self.order):
                powers[i].append(powers[i][-1] * delta[i])
        out = []
        for d in self.derivs:
            acc = np.zeros(self.chart.shape, dtype=complex)
            for a in self.alphas:
                acc += d[a] * powers[0][a[0]] * powers[1][a[1]] * powers[2][a[2]]
            out.append(acc)
        return out


def flow_displacement(chart: Chart, X, t: float, order: int = 6, substeps: int = None):
    """Displacement delta(p) = phi_t(p) - p of the flow of X (real arrays)."""
    ev = TaylorEvaluator(chart, [np.real(x) for x in X], order)
    h_max = np.max([np.max(np.abs(x)) for x in X]) + 1e-30
    if substeps is None:
        substeps = max(1, int(np.ceil(abs(t) * h_max / 0.02)))
    h = t / substeps
    delta = [np.zeros(chart.shape) for _ in range(3)]

    def rhs(d):
        return [v.real for v in ev(d)]

    for _ in range(substeps):
        k1 = rhs(delta)
        k2 = rhs([d + 0.5 * h * k for d, k in zip(delta, k1)])
        k3 = rhs([d + 0.5 * h * k for d, k in zip(delta, k2)])
        k4 = rhs([d + h * k for d, k in zip(delta, k3)])
        delta = [d + h / 6 * (a + 2 * b + 2 * c + e) for d, a, b, c, e in zip(delta, k1, k2, k3, k4)]
    return delta


def pullback(chart: Chart, M, X, t: float, order: int = 6):
    """Pointwise 3x3 array of dphi_t^-1 M(phi_t) dphi_t for M a 3x3 list of arrays."""
    delta = flow_displacement(chart, X, t, order)
    flat = [M[a][b] for a in range(3) for b in range(3)]
    moved = TaylorEvaluator(chart, flat, order)(delta)
    Mphi = np.stack([np.stack(moved[3 * a:3 * a + 3], -1) for a in range(3)], -2)
    jac = np.empty(chart.shape + (3, 3))
    for a in range(3):
        for b in range(3):
            jac[..., a, b] = (a == b) + chart._spectral_diff(delta[a], b).real
    return np.linalg.solve(jac, Mphi @ jac)


def lie_derivative_matrix(chart: Chart, M, X, eps: float = 1e-3, order: int = 6):
    """Central difference (phi_eps^* M - phi_-eps^* M) / (2 eps)."""
    plus = pullback(chart, M, X, eps, order)
    minus = pullback(chart, M, X, -eps, order)
    return (plus - minus) / (2 * eps)


def lie_derivative_endo(S, X, M, eps: float = 1e-3, order: int = 6):
    """L_X M for coordinate matrices of Fields, returned in S's frame components."""
    from .fields import Field
    from .operators import coord_to_endo

    chart = S.chart
    arrM = [[M[a][b].values for b in range(3)] for a in range(3)]
    arrX = [x.values.real for x in X]
    L = lie_derivative_matrix(chart, arrM, arrX, eps, order)
    LM = [[Field(chart, L[..., a, b]) for b in range(3)] for a in range(3)]
    return coord_to_endo(LM, S)
