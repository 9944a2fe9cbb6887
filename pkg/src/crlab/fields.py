"""Charts, component fields and differential forms on them.

Every chart carries a global frame ``E_a`` with dual coframe ``e^a``.  On
``periodic3`` and ``spacetime`` charts the frame is the coordinate frame.  On
``invariant2`` charts it is the left-invariant Heisenberg frame
``(d/dx, d/dy - x d/dt, d/dt)`` acting on t-independent data, and on
``pointset`` charts it is whatever frame the caller supplies together with
analytic derivative callbacks.  Forms are stored as components on wedge
products of the ``e^a``; non-coordinate frames enter ``exterior_d`` through
constant structure constants ``[E_b, E_c] = c[a, b, c] E_a``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy import fft as sfft

KINDS = ("periodic3", "invariant2", "spacetime", "pointset")


class ChartError(ValueError):
    pass


@dataclass(eq=False)
class Chart:
    kind: str
    shape: tuple
    lengths: tuple = ()
    names: tuple = ("x", "y", "z")
    structure_constants: Optional[np.ndarray] = None
    time: Optional[tuple] = None
    fiber_length: float = 1.0
    points: Optional[np.ndarray] = None
    dealias: bool = True
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ChartError(f"unknown chart kind {self.kind!r}")
        self.shape = tuple(int(n) for n in self.shape)
        self.lengths = tuple(float(L) for L in self.lengths)
        spatial = self.spectral_array_axes()
        if len(self.lengths) != len(spatial):
            raise ChartError("one period length per periodic axis is required")
        for ax in spatial:
            n = self.shape[ax]
            if n < 8 or n % 2:
                raise ChartError(f"periodic axes need an even node count >= 8, got {n}")
        if self.kind == "spacetime":
            if self.shape[0] < 5:
                raise ChartError("spacetime time axis needs at least 5 nodes")
            if self.time is None:
                raise ChartError("spacetime chart needs a time interval")
        if self.structure_constants is None:
            self.structure_constants = np.zeros((self.dim,) * 3)

    # -- constructors -----------------------------------------------------
    @classmethod
    def periodic3(cls, n, lengths=(2 * np.pi,) * 3, dealias=True):
        shape = (n,) * 3 if np.isscalar(n) else tuple(n)
        return cls("periodic3", shape, tuple(lengths), ("x", "y", "z"), dealias=dealias)

    @classmethod
    def invariant2(cls, n, lengths=(2 * np.pi,) * 2, fiber_length=2 * np.pi, dealias=True):
        shape = (n,) * 2 if np.isscalar(n) else tuple(n)
        c = np.zeros((3, 3, 3))
        # [d/dx, d/dy - x d/dt] = -d/dt
        c[2, 0, 1], c[2, 1, 0] = -1.0, 1.0
        return cls("invariant2", shape, tuple(lengths), ("x", "y", "t"), c,
                   fiber_length=fiber_length, dealias=dealias)

    @classmethod
    def spacetime(cls, space: "Chart", nt: int, t0: float, t1: float):
        if space.kind != "periodic3":
            raise ChartError("spacetime charts extend periodic3 charts")
        return cls("spacetime", (nt,) + space.shape, space.lengths, ("t",) + space.names,
                   time=(float(t0), float(t1)), dealias=space.dealias)

    @classmethod
    def pointset(cls, points, structure_constants=None, names=("x", "y", "z")):
        pts = np.asarray(points)
        return cls("pointset", (len(pts),), (), tuple(names),
                   None if structure_constants is None else np.asarray(structure_constants, float),
                   points=pts)

    # -- geometry of the chart --------------------------------------------
    @property
    def dim(self) -> int:
        return 4 if self.kind == "spacetime" else 3

    def spectral_array_axes(self):
        return {"periodic3": (0, 1, 2), "invariant2": (0, 1),
                "spacetime": (1, 2, 3), "pointset": ()}[self.kind]

    def axis_role(self, axis: int):
        """Return (role, array_axis) for a logical axis."""
        if not 0 <= axis < self.dim:
            raise ChartError(f"axis {axis} not on a {self.kind} chart")
        if self.kind == "periodic3":
            return "spectral", axis
        if self.kind == "invariant2":
            return ("zero", None) if axis == 2 else ("spectral", axis)
        if self.kind == "spacetime":
            return ("time", 0) if axis == 0 else ("spectral", axis)
        return "analytic", None

    def spacing(self, array_axis):
        if self.kind == "spacetime" and array_axis == 0:
            t0, t1 = self.time
            return (t1 - t0) / (self.shape[0] - 1)
        k = self.spectral_array_axes().index(array_axis)
        return self.lengths[k] / self.shape[array_axis]

    def nodes(self):
        """Coordinate arrays broadcast to the chart shape."""
        if self.kind == "pointset":
            return tuple(self.points[:, a] for a in range(self.points.shape[1]))
        axes = []
        for ax, n in enumerate(self.shape):
            if self.kind == "spacetime" and ax == 0:
                axes.append(np.linspace(self.time[0], self.time[1], n))
            else:
                axes.append(np.arange(n) * self.spacing(ax))
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def cell_volume(self):
        return float(np.prod([self.spacing(ax) for ax in self.spectral_array_axes()]))

    def same_grid(self, other: "Chart") -> bool:
        return self is other or (self.kind == other.kind and self.shape == other.shape
                                 and self.lengths == other.lengths and self.time == other.time
                                 and self.points is other.points)

    def wavenumbers(self, array_axis):
        key = ("k", array_axis)
        if key not in self._cache:
            n = self.shape[array_axis]
            L = self.lengths[self.spectral_array_axes().index(array_axis)]
            m = np.fft.fftfreq(n, 1.0 / n)
            shape = [1] * len(self.shape)
            shape[array_axis] = n
            self._cache[key] = (2 * np.pi / L * m).reshape(shape), np.abs(m).reshape(shape)
        return self._cache[key]

    def _spectral_diff(self, values, array_axis):
        k, m = self.wavenumbers(array_axis)
        n = self.shape[array_axis]
        ik = 1j * k * (m < n / 2)
        return sfft.ifft(ik * sfft.fft(values, axis=array_axis), axis=array_axis)

    def _time_diff(self, v):
        h = self.spacing(0)
        d = np.empty_like(v)
        d[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
        d[0] = (-25 * v[0] + 48 * v[1] - 36 * v[2] + 16 * v[3] - 3 * v[4]) / (12 * h)
        d[1] = (-3 * v[0] - 10 * v[1] + 18 * v[2] - 6 * v[3] + v[4]) / (12 * h)
        d[-1] = (25 * v[-1] - 48 * v[-2] + 36 * v[-3] - 16 * v[-4] + 3 * v[-5]) / (12 * h)
        d[-2] = (3 * v[-1] + 10 * v[-2] - 18 * v[-3] + 6 * v[-4] - v[-5]) / (12 * h)
        return d

    def filter(self, values):
        """2/3-rule truncation on the periodic axes."""
        axes = self.spectral_array_axes()
        if not (self.dealias and axes):
            return values
        if "mask" not in self._cache:
            mask = np.ones(self.shape, dtype=bool)
            for ax in axes:
                _, m = self.wavenumbers(ax)
                mask = mask & (m <= self.shape[ax] // 3)
            self._cache["mask"] = mask
        spec = sfft.fftn(values, axes=axes)
        spec *= self._cache["mask"]
        return sfft.ifftn(spec, axes=axes)

    def describe(self) -> dict:
        return {"kind": self.kind, "shape": list(self.shape), "lengths": list(self.lengths),
                "names": list(self.names), "time": list(self.time) if self.time else None,
                "fiber_length": self.fiber_length}


def _as_field_values(chart, v):
    arr = np.asarray(v, dtype=complex)
    if arr.shape != chart.shape:
        arr = np.broadcast_to(arr, chart.shape).copy()
    return arr


class Field:
    """Complex values on a chart together with a weight.

    Pointset fields carry ``deriv(axis) -> Field``; arithmetic propagates it
    lazily through the Leibniz rule, so derived quantities stay
    differentiable to any order.
    """

    __array_priority__ = 100

    def __init__(self, chart: Chart, values, weight: int = 0,
                 deriv: Optional[Callable[[int], "Field"]] = None):
        self.chart = chart
        self.values = _as_field_values(chart, values)
        self.weight = int(weight)
        self._deriv = deriv
        self._dcache = {}

    # -- construction -----------------------------------------------------
    @classmethod
    def constant(cls, chart, c, weight=0):
        if chart.kind == "pointset":
            return cls(chart, c, weight, deriv=lambda a: cls.constant(chart, 0.0, weight))
        return cls(chart, c, weight)

    def with_weight(self, k):
        return Field(self.chart, self.values, k, self._deriv_of_with_weight(k))

    def _deriv_of_with_weight(self, k):
        if self._deriv is None:
            return None
        return lambda a: self.diff(a).with_weight(k)

    @property
    def is_pointset(self):
        return self.chart.kind == "pointset"

    def _check(self, other):
        if not self.chart.same_grid(other.chart):
            raise ChartError("fields live on different charts")

    def _lazy(self, values, weight, rule):
        if self.is_pointset:
            return Field(self.chart, values, weight, rule)
        return Field(self.chart, values, weight)

    # -- calculus ---------------------------------------------------------
    def diff(self, axis: int) -> "Field":
        if axis in self._dcache:
            return self._dcache[axis]
        role, ax = self.chart.axis_role(axis)
        if role == "spectral":
            out = Field(self.chart, self.chart._spectral_diff(self.values, ax), self.weight)
        elif role == "time":
            out = Field(self.chart, self.chart._time_diff(self.values), self.weight)
        elif role == "zero":
            out = Field(self.chart, 0.0, self.weight)
        else:
            if self._deriv is None:
                raise ChartError("pointset field has no derivative callback")
            out = self._deriv(axis)
        self._dcache[axis] = out
        return out

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Field):
            self._check(other)
            return self._lazy(self.values + other.values, self.weight,
                              lambda a: self.diff(a) + other.diff(a))
        return self._lazy(self.values + other, self.weight, lambda a: self.diff(a))

    __radd__ = __add__

    def __neg__(self):
        return self._lazy(-self.values, self.weight, lambda a: -self.diff(a))

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Field):
            self._check(other)
            vals = self.chart.filter(self.values * other.values)
            return self._lazy(vals, self.weight + other.weight,
                              lambda a: self.diff(a) * other + self * other.diff(a))
        if isinstance(other, Form):
            return other * self
        return self._lazy(self.values * other, self.weight, lambda a: self.diff(a) * other)

    __rmul__ = __mul__

    def reciprocal(self):
        vals = self.chart.filter(1.0 / self.values)
        holder = {}

        def rule(a):
            r = holder["r"]
            return -(self.diff(a) * r * r)

        out = self._lazy(vals, -self.weight, rule)
        holder["r"] = out
        return out

    def __truediv__(self, other):
        if isinstance(other, Field):
            return self * other.reciprocal()
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def sqrt(self):
        vals = self.chart.filter(np.sqrt(self.values))
        holder = {}
        out = self._lazy(vals, 0, lambda a: self.diff(a) / (2 * holder["s"]))
        holder["s"] = out
        return out

    def exp(self):
        vals = self.chart.filter(np.exp(self.values))
        holder = {}
        out = self._lazy(vals, 0, lambda a: self.diff(a) * holder["e"])
        holder["e"] = out
        return out

    def conj(self):
        return self._lazy(np.conj(self.values), -self.weight, lambda a: self.diff(a).conj())

    def real(self):
        return self._lazy(self.values.real, self.weight, lambda a: self.diff(a).real())

    def imag(self):
        return self._lazy(self.values.imag, self.weight, lambda a: self.diff(a).imag())

    def abs2(self):
        return (self * self.conj()).real()

    def dealiased(self):
        return Field(self.chart, self.chart.filter(self.values), self.weight, self._deriv)

    # -- norms ------------------------------------------------------------
    def max_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def __repr__(self):
        return f"Field({self.chart.kind}{self.chart.shape}, weight={self.weight}, |.|max={self.max_norm():.3g})"


def partial_derivative(f: Field, axis: int) -> Field:
    """Derivative of ``f`` along the chart's frame vector ``E_axis``.

    Exact Fourier differentiation on periodic axes, fourth-order differences
    on the spacetime time axis, callbacks on pointsets.  The weight is kept;
    covariant weight bookkeeping lives in ``covariant_derivative``.
    """
    return f.diff(axis)


def _sort_index(idx):
    """Sort a multi-index, returning (sign, sorted tuple) or (0, None) on repeats."""
    idx = list(idx)
    if len(set(idx)) < len(idx):
        return 0, None
    sign = 1
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    return sign, tuple(idx)


class Form:
    """A degree-p form: components on sorted multi-indices of the chart coframe."""

    def __init__(self, chart: Chart, degree: int, comps=None):
        if not 0 <= degree <= chart.dim:
            raise ChartError(f"degree {degree} out of range on a {chart.dim}-chart")
        self.chart = chart
        self.degree = degree
        self.comps: dict = {}
        for idx, f in (comps or {}).items():
            sign, key = _sort_index(idx)
            if sign == 0:
                continue
            if not isinstance(f, Field):
                f = Field.constant(chart, f)
            self._accum(key, f if sign > 0 else -f)

    def _accum(self, key, f):
        self.comps[key] = self.comps[key] + f if key in self.comps else f

    @classmethod
    def basis(cls, chart, a):
        return cls(chart, 1, {(a,): Field.constant(chart, 1.0)})

    @classmethod
    def from_components(cls, chart, comps):
        """1-form sum_a comps[a] e^a."""
        return cls(chart, 1, {(a,): c for a, c in enumerate(comps) if c is not None})

    def __getitem__(self, idx):
        sign, key = _sort_index(idx)
        if sign == 0 or key not in self.comps:
            return Field.constant(self.chart, 0.0)
        return self.comps[key] if sign > 0 else -self.comps[key]

    def components(self):
        """Dense list of 1-form components (degree 1 only)."""
        return [self[(a,)] for a in range(self.chart.dim)]

    def _check(self, other):
        if not self.chart.same_grid(other.chart):
            raise ChartError("forms live on different charts")

    def __add__(self, other):
        self._check(other)
        if other.degree != self.degree:
            raise ChartError("cannot add forms of different degree")
        out = Form(self.chart, self.degree, dict(self.comps))
        for k, f in other.comps.items():
            out._accum(k, f)
        return out

    def __neg__(self):
        return Form(self.chart, self.degree, {k: -f for k, f in self.comps.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, s):
        return Form(self.chart, self.degree, {k: f * s for k, f in self.comps.items()})

    __rmul__ = __mul__

    def conj(self):
        return Form(self.chart, self.degree, {k: f.conj() for k, f in self.comps.items()})

    def max_norm(self) -> float:
        return max((f.max_norm() for f in self.comps.values()), default=0.0)

    def evaluate(self, *vectors) -> Field:
        """Evaluate on ``degree`` vector fields given as lists of frame components."""
        if len(vectors) != self.degree:
            raise ChartError("wrong number of vectors")
        total = Field.constant(self.chart, 0.0)
        for key, c in self.comps.items():
            det = None
            for perm in itertools.permutations(range(self.degree)):
                sign, _ = _sort_index(perm)
                term = None
                for j, slot in enumerate(perm):
                    v = vectors[j][key[slot]]
                    term = v if term is None else term * v
                term = term if sign > 0 else -term
                det = term if det is None else det + term
            total = total + c * det
        return total

    def interior(self, v) -> "Form":
        """Contraction v ⌟ form (first slot)."""
        if self.degree == 0:
            raise ChartError("cannot contract a 0-form")
        comps = {}
        for key, c in self.comps.items():
            for j, a in enumerate(key):
                rest = key[:j] + key[j + 1:]
                term = c * v[a] * (1 if j % 2 == 0 else -1)
                comps[rest] = comps[rest] + term if rest in comps else term
        return Form(self.chart, self.degree - 1, comps)


def wedge(a: Form, b: Form) -> Form:
    a._check(b)
    if a.degree + b.degree > a.chart.dim:
        raise ChartError("wedge degree exceeds chart dimension")
    out = Form(a.chart, a.degree + b.degree)
    for ka, fa in a.comps.items():
        for kb, fb in b.comps.items():
            sign, key = _sort_index(ka + kb)
            if sign == 0:
                continue
            prod = fa * fb
            out._accum(key, prod if sign > 0 else -prod)
    return out


def _basis_d(chart, a) -> Optional[Form]:
    """d e^a = -sum_{b<c} c[a,b,c] e^b ^ e^c, or None when zero."""
    c = chart.structure_constants
    comps = {}
    for b in range(chart.dim):
        for cc in range(b + 1, chart.dim):
            if c[a, b, cc] != 0.0:
                comps[(b, cc)] = -float(c[a, b, cc])
    return Form(chart, 2, comps) if comps else None


def exterior_d(a: Form) -> Form:
    chart = a.chart
    out = Form(chart, a.degree + 1) if a.degree < chart.dim else None
    if out is None:
        raise ChartError("exterior derivative of a top form")
    for key, f in a.comps.items():
        for ax in range(chart.dim):
            if ax in key:
                continue
            sign, skey = _sort_index((ax,) + key)
            df = f.diff(ax)
            out._accum(skey, df if sign > 0 else -df)
        for j, idx in enumerate(key):
            dbase = _basis_d(chart, idx)
            if dbase is None:
                continue
            left = Form(chart, j, {key[:j]: 1.0}) if j else None
            right = Form(chart, len(key) - j - 1, {key[j + 1:]: 1.0}) if j < len(key) - 1 else None
            piece = dbase
            if left is not None:
                piece = wedge(left, piece)
            if right is not None:
                piece = wedge(piece, right)
            piece = piece * (f * (-1) ** j)
            for k2, g in piece.comps.items():
                out._accum(k2, g)
    return out


def integrate(f: Field, vol: Form) -> float:
    """Trapezoidal quadrature of ``f`` against a top form, coordinate orientation."""
    chart = vol.chart
    if vol.degree != chart.dim or chart.kind not in ("periodic3", "invariant2"):
        raise ChartError("integrate needs a top form on a periodic3 or invariant2 chart")
    c = vol[tuple(range(chart.dim))]
    total = np.sum((f.values * c.values).real) * chart.cell_volume()
    if chart.kind == "invariant2":
        total *= chart.fiber_length
    return float(total)


def volume_form(chart) -> Form:
    return Form(chart, chart.dim, {tuple(range(chart.dim)): 1.0})


# -- serialization ----------------------------------------------------------

def save_field(prefix, f: Field) -> None:
    """Write ``prefix.bin`` (little-endian float64 re/im pairs, row-major) and ``prefix.json``."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(f.values, dtype="<c16")
    prefix.with_suffix(".bin").write_bytes(data.tobytes(order="C"))
    meta = f.chart.describe()
    meta.update(weight=f.weight, dtype="complex128-le")
    prefix.with_suffix(".json").write_text(json.dumps(meta, indent=1))


def load_field(prefix, chart: Optional[Chart] = None) -> Field:
    prefix = Path(prefix)
    meta = json.loads(prefix.with_suffix(".json").read_text())
    if chart is None:
        kind = meta["kind"]
        if kind == "periodic3":
            chart = Chart.periodic3(tuple(meta["shape"]), tuple(meta["lengths"]))
        elif kind == "invariant2":
            chart = Chart.invariant2(tuple(meta["shape"]), tuple(meta["lengths"]), meta["fiber_length"])
        elif kind == "spacetime":
            space = Chart.periodic3(tuple(meta["shape"][1:]), tuple(meta["lengths"]))
            chart = Chart.spacetime(space, meta["shape"][0], *meta["time"])
        else:
            raise ChartError("pointset fields need their chart supplied")
    raw = np.frombuffer(prefix.with_suffix(".bin").read_bytes(), dtype="<c16")
    return Field(chart, raw.reshape(chart.shape), meta["weight"])
