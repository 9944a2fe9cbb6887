"""Builtin model geometries and the ``name:key=value,...@dims`` spec grammar."""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .fields import Chart, Field, Form
from .phstructure import DeformationState, admissible_coframe, solve_structure
from .poly import HeisPoly, analytic_field

NAMES = ("heis-flat", "t3-roto", "nil-invariant", "sphere", "sphere-perturbed", "ellipsoid")


class CatalogError(ValueError):
    pass


@dataclass
class GeometrySpec:
    name: str
    params: dict = field(default_factory=dict)
    dims: Optional[tuple] = None

    def __str__(self):
        s = self.name
        if self.params:
            s += ":" + ",".join(f"{k}={v}" for k, v in self.params.items())
        if self.dims:
            s += "@" + "x".join(str(d) for d in self.dims)
        return s


def parse_geometry(spec: str) -> GeometrySpec:
    """Parse ``t3-roto:n=2@32`` or ``nil-invariant:beta=0.1*exp(i*x)@32x32``."""
    spec = spec.strip()
    dims = None
    if "@" in spec:
        spec, d = spec.rsplit("@", 1)
        try:
            dims = tuple(int(v) for v in d.lower().split("x"))
        except ValueError as e:
            raise CatalogError(f"bad dims {d!r}") from e
    name, _, rest = spec.partition(":")
    params = {}
    if rest:
        for item in _split_params(rest):
            k, eq, v = item.partition("=")
            if not eq:
                raise CatalogError(f"parameter {item!r} is not key=value")
            params[k.strip()] = _coerce(v.strip())
    if name not in NAMES:
        raise CatalogError(f"unknown geometry {name!r}; known: {', '.join(NAMES)}")
    return GeometrySpec(name, params, dims)


def _split_params(s):
    # commas inside parentheses belong to expressions
    out, depth, cur = [], 0, ""
    for ch in s:
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    if cur:
        out.append(cur)
    return out


def _coerce(v):
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


_ALLOWED = {"exp": np.exp, "sin": np.sin, "cos": np.cos, "sqrt": np.sqrt, "pi": np.pi, "i": 1j}


def eval_expression(expr: str, env: dict):
    """Evaluate an arithmetic expression in x, y, ... with exp/sin/cos/sqrt/pi/i."""
    tree = ast.parse(str(expr), mode="eval")
    for node in ast.walk(tree):
        if isinstance(node, ast.Name) and node.id not in _ALLOWED and node.id not in env:
            raise CatalogError(f"unknown name {node.id!r} in {expr!r}")
        if isinstance(node, (ast.Attribute, ast.Subscript, ast.Lambda)):
            raise CatalogError(f"unsupported syntax in {expr!r}")
    return eval(compile(tree, "<geometry>", "eval"), {"__builtins__": {}}, {**_ALLOWED, **env})


@dataclass
class CatalogGeometry:
    """A normalized (theta, theta1) pair plus, when it exists, the deformation it came from."""

    name: str
    chart: Chart
    theta: Form
    theta1: Form
    deformation: Optional[DeformationState] = None
    params: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.theta, self.theta1))

    def structure(self, tol=1e-6):
        return solve_structure(self.theta, self.theta1, tol)


def _const(chart, c):
    return Field.constant(chart, c)


def t3_roto(n: int = 1, res: int = 32) -> CatalogGeometry:
    if n <= 0:
        raise CatalogError("t3-roto needs n > 0")
    chart = Chart.periodic3(res)
    _, _, z = chart.nodes()
    c, s = Field(chart, np.cos(n * z)), Field(chart, np.sin(n * z))
    theta = Form.from_components(chart, [c, s, _const(chart, 0.0)])
    raw = Form.from_components(chart, [-s * 1j, c * 1j, _const(chart, 1.0)])
    theta1, _ = admissible_coframe(theta, raw)
    return CatalogGeometry("t3-roto", chart, theta, theta1, params={"n": n})


def heis_base(chart: Chart):
    """theta = dt + x dy and theta1 = (dx + i dy)/sqrt 2 in the left-invariant coframe."""
    theta = Form.basis(chart, 2)
    raw = Form.from_components(chart, [_const(chart, 1.0), _const(chart, 1j), None])
    theta1, _ = admissible_coframe(theta, raw)
    return theta, theta1


def heis_chart(points=None, rng=None) -> Chart:
    if points is None:
        rng = rng if rng is not None else np.random.default_rng(0)
        points = rng.uniform(-1.0, 1.0, size=(64, 3))
    c = np.zeros((3, 3, 3))
    c[2, 0, 1], c[2, 1, 0] = -1.0, 1.0
    return Chart.pointset(points, c, names=("x", "y", "t"))


def heis_field(chart: Chart, expr: HeisPoly, weight: int = 0) -> Field:
    return analytic_field(chart, expr, weight)


def heis_flat(points=None) -> CatalogGeometry:
    chart = heis_chart(points)
    theta, theta1 = heis_base(chart)
    return CatalogGeometry("heis-flat", chart, theta, theta1)


def nil_invariant(beta="0", res: int = 32) -> CatalogGeometry:
    chart = Chart.invariant2(res)
    theta, theta1 = heis_base(chart)
    base = solve_structure(theta, theta1)
    x, y = chart.nodes()
    if isinstance(beta, Field):
        b = beta
    else:
        vals = eval_expression(beta, {"x": x, "y": y})
        b = Field(chart, np.broadcast_to(np.asarray(vals, dtype=complex), chart.shape))
    state = DeformationState(base, b.dealiased())
    return CatalogGeometry("nil-invariant", chart, theta, state.theta1(), state,
                           params={"beta": str(beta)})


def geometry_catalog(name, params=None, dims=None):
    """Build a catalog geometry by name, or from a full spec string."""
    if ":" in name or "@" in name:
        spec = parse_geometry(name)
        name, params, dims = spec.name, {**spec.params, **(params or {})}, dims or spec.dims
    params = dict(params or {})
    if name not in NAMES:
        raise CatalogError(f"unknown geometry {name!r}")
    res = dims[0] if dims else None
    if name == "t3-roto":
        return t3_roto(int(params.get("n", 1)), res or 32)
    if name == "heis-flat":
        return heis_flat()
    if name == "nil-invariant":
        return nil_invariant(params.get("beta", "0"), res or 32)
    from .embedded import hypersurface
    return hypersurface(name, params)
