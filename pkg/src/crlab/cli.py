"""Command-line scenario runner.

Subcommands: invariants, flow, fill, embed, selftest.  Every run writes a
JSON summary (``schema: 1``) carrying the config hash and tolerance set, plus
CSV series where a subcommand produces them.  Exit codes: 0 success, 1 usage
error, 2 tolerance failure, 3 aborted flow.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

SCHEMA = 1
EXIT_OK, EXIT_USAGE, EXIT_TOLERANCE, EXIT_ABORTED = 0, 1, 2, 3
SUBCOMMANDS = ("invariants", "flow", "fill", "embed", "selftest")

GEOMETRY_HELP = """geometry spec grammar: name[:key=value,...][@dims]
  heis-flat                       flat Heisenberg on a pointset chart
  t3-roto:n=1@32                  cos(nz)dx + sin(nz)dy on the 3-torus
  nil-invariant:beta=0.1*exp(i*x)@64   Reeb-invariant deformation, 2D chart
  sphere | ellipsoid:a=2 | sphere-perturbed:eps=0.01,mode=1   hypersurfaces
Expressions may use x, y, exp, sin, cos, sqrt, pi and i; commas inside
parentheses belong to the expression."""


@dataclass
class RunConfig:
    subcommand: str = "invariants"
    geometry: str = "t3-roto:n=1"
    res: int = 32
    dt: Optional[float] = None
    T_end: float = 0.1
    kind: str = "torsion"
    slices: int = 9
    samples: int = 200
    check: str = "lemma62"
    f: str = "z1*zb2"
    eps: float = 0.01
    snapshot_every: int = 0
    only: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    out: str = "crlab-out"
    seed: int = 0

    def validate(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ValueError(f"unknown subcommand {self.subcommand!r}")
        if self.res < 8 or self.res > 128 or self.res & (self.res - 1):
            raise ValueError("--res must be a power of two between 8 and 128")
        if any(v <= 0 for v in self.tolerances.values()):
            raise ValueError("tolerances must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("--dt must be positive")

    def digest(self) -> str:
        d = asdict(self)
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


DEFAULT_TOLERANCES = {
    "invariants": {"structure_residual": 1e-6},
    "flow": {"abort_residual": 1e-3, "cfl": 0.1},
    "fill": {"certificate": 1e-6, "integrability": 1e-6, "margin": 1e-3},
    "embed": {"closed": 1e-5, "difference": 1e-3, "chi": 1e-6},
    "selftest": {},
}


# -- parsing ---------------------------------------------------------------------

def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    common.add_argument("--geometry", help="geometry spec, see below")
    common.add_argument("--res", type=int, help="grid resolution (power of two, 8..128)")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory (env CRLAB_OUT)")
    common.add_argument("--tol", action="append", default=[], metavar="KEY=VALUE",
                        help="override a tolerance")

    p = argparse.ArgumentParser(prog="crlab", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter,
                                epilog=GEOMETRY_HELP)
    sub = p.add_subparsers(dest="subcommand", required=True)
    fmt = argparse.RawDescriptionHelpFormatter
    sub.add_parser("invariants", parents=[common], help="torsion, curvature, Cartan tensor",
                   epilog=GEOMETRY_HELP, formatter_class=fmt)
    fl = sub.add_parser("flow", parents=[common], help="run a geometric flow",
                        epilog=GEOMETRY_HELP, formatter_class=fmt)
    fl.add_argument("--kind", choices=("torsion", "cartan", "gauge-fixed", "coupled-torsion"))
    fl.add_argument("--dt", type=float)
    fl.add_argument("--T", dest="T_end", type=float)
    fl.add_argument("--snapshot-every", dest="snapshot_every", type=int)
    fi = sub.add_parser("fill", parents=[common], help="certificate and ambient structure",
                        epilog=GEOMETRY_HELP, formatter_class=fmt)
    fi.add_argument("--flow", dest="kind", choices=("torsion", "cartan", "gauge-fixed", "coupled-torsion"))
    fi.add_argument("--slices", type=int)
    fi.add_argument("--dt", type=float)
    em = sub.add_parser("embed", parents=[common], help="hypersurface identities",
                        epilog=GEOMETRY_HELP, formatter_class=fmt)
    em.add_argument("--gamma", dest="geometry", help="sphere | ellipsoid:a=.. | perturbed:eps=..,mode=..")
    em.add_argument("--check", choices=("lemma62", "chi", "tangency"))
    em.add_argument("--samples", type=int)
    em.add_argument("--f", help="polynomial in z1, z2, zb1, zb2 (default z1*zb2)")
    em.add_argument("--eps", type=float, help="scale of f for chi, Euler step for tangency")
    st = sub.add_parser("selftest", parents=[common], help="run the acceptance checks")
    st.add_argument("--only", type=int, nargs="*", help="criterion numbers to run")
    return p


def build_config(argv) -> RunConfig:
    ns = _parser().parse_args(argv)
    cfg = RunConfig(subcommand=ns.subcommand)
    if ns.subcommand == "embed":
        cfg.geometry = "sphere"
    if ns.config:
        data = json.loads(Path(ns.config).read_text())
        names = {f.name for f in fields(RunConfig)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for k, v in data.items():
            setattr(cfg, k, v)
    if os.environ.get("CRLAB_OUT") and ns.out is None:
        cfg.out = os.environ["CRLAB_OUT"]
    for k, v in vars(ns).items():
        if k in ("config", "tol", "subcommand") or v is None:
            continue
        setattr(cfg, k, v)
    tol = dict(DEFAULT_TOLERANCES[cfg.subcommand])
    tol.update(cfg.tolerances)
    for item in ns.tol:
        k, eq, v = item.partition("=")
        if not eq:
            raise ValueError(f"--tol expects KEY=VALUE, got {item!r}")
        tol[k] = float(v)
    cfg.tolerances = tol
    if cfg.geometry.startswith("perturbed"):
        cfg.geometry = "sphere-" + cfg.geometry
    cfg.validate()
    return cfg


# -- output ----------------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v) if np.isfinite(v) else None
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": float(v.real), "im": float(v.imag)}
    return v


def write_outputs(cfg: RunConfig, summary: dict, series=None, header=None) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    digest = cfg.digest()
    stem = f"{cfg.subcommand}-{digest}"
    doc = {"schema": SCHEMA, "config_hash": digest, "config": asdict(cfg),
           "tolerances": cfg.tolerances, **summary}
    path = out / f"{stem}.json"
    path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    if series is not None:
        with open(out / f"{stem}.csv", "w", newline="") as fh:
            fh.write(f"# schema={SCHEMA} config_hash={digest} "
                     f"tolerances={json.dumps(cfg.tolerances, sort_keys=True)}\n")
            w = csv.writer(fh)
            w.writerow(header)
            for row in series:
                w.writerow([repr(float(x)) for x in row])
    return path


def _stats(x):
    x = np.asarray(x, float)
    q = np.quantile(x, [0.5, 0.9, 0.99])
    return {"max": float(x.max()), "mean": float(x.mean()), "q50": float(q[0]),
            "q90": float(q[1]), "q99": float(q[2])}


def _field_stats(f):
    v = np.asarray(f.values)
    return {"min": float(v.real.min()), "max": float(v.real.max()), "mean": float(v.real.mean())}


# -- subcommands -----------------------------------------------------------------

def _geometry(cfg):
    from .catalog import geometry_catalog, parse_geometry

    spec = parse_geometry(cfg.geometry)
    dims = spec.dims or ((cfg.res,) if spec.name in ("t3-roto", "nil-invariant") else None)
    return geometry_catalog(spec.name, spec.params, dims)


def cmd_invariants(cfg):
    from .embedded import HypersurfaceGeometry, connection_torsion_at
    from .operators import action_energy, cartan_tensor

    geom = _geometry(cfg)
    if isinstance(geom, HypersurfaceGeometry):
        pts = geom.sample(cfg.samples, cfg.seed)
        P = connection_torsion_at(geom, pts)
        summary = {"geometry": cfg.geometry, "samples": cfg.samples,
                   "A": _stats(np.abs(P.A1b1b)), "re_omega0": P.re_omega0, "path": P.path}
        if geom.name == "sphere":
            S = geom.intrinsic(pts).structure()
            summary.update(W=_field_stats(S.W), Q=_stats(np.abs(cartan_tensor(S).values)))
        return summary, None, None, EXIT_OK
    S = geom.structure(cfg.tolerances["structure_residual"])
    Q = cartan_tensor(S)
    summary = {"geometry": cfg.geometry, "chart": S.chart.describe(),
               "W": _field_stats(S.W),
               "A": {"max": S.A11.max_norm(), "min": float(np.min(np.abs(S.A11.values)))},
               "Q": {"max": Q.max_norm(), "min": float(np.min(np.abs(Q.values)))},
               "residuals": {k: v for k, v in S.residuals.items()}}
    if S.chart.kind in ("periodic3", "invariant2"):
        summary["energy"] = action_energy(S)
    return summary, None, None, EXIT_OK


def cmd_flow(cfg):
    from .fields import save_field
    from .flows import CSV_HEADER, FlowAborted, FlowConfig, FlowState, cfl_limit, run, torsion_monitor

    geom = _geometry(cfg)
    chart = geom.chart
    dt = cfg.dt or cfl_limit(chart, cfg.kind, cfg.tolerances["cfl"])
    fc = FlowConfig(dt=dt, cfl=cfg.tolerances["cfl"], abort_residual=cfg.tolerances["abort_residual"])
    st = FlowState.initial(geom, coupled=cfg.kind == "coupled-torsion")
    snapdir = Path(cfg.out) / f"flow-{cfg.digest()}-snapshots"

    def snapshot(state, i):
        snapdir.mkdir(parents=True, exist_ok=True)
        save_field(str(snapdir / f"beta-{i:05d}"), state.beta)

    code, reason = EXIT_OK, None
    try:
        st = run(st, cfg.kind, cfg.T_end, dt, monitors=[torsion_monitor], cfg=fc,
                 snapshot=snapshot, snapshot_every=cfg.snapshot_every)
    except FlowAborted as e:
        st, code, reason = e.state, EXIT_ABORTED, e.reason
    rows = [h.row() for h in st.history]
    summary = {"geometry": cfg.geometry, "kind": cfg.kind, "dt": dt, "steps": len(rows) - 1,
               "t_final": st.t, "aborted": reason, "final": dict(zip(CSV_HEADER, rows[-1]))}
    return summary, rows, CSV_HEADER, code


def cmd_fill(cfg):
    from .fillability import build_ambient, integrability_residuals, solve_certificate
    from .flows import FlowAborted, FlowConfig, FlowState, flow_rhs, step

    geom = _geometry(cfg)
    dt = cfg.dt or 0.01
    fc = FlowConfig(dt=dt, enforce_cfl=False)
    st = FlowState.initial(geom, coupled=cfg.kind == "coupled-torsion")
    states = [st]
    try:
        for _ in range(cfg.slices - 1):
            states.append(step(states[-1], dt, cfg.kind, fc))
    except FlowAborted as e:
        return {"aborted": e.reason}, None, None, EXIT_ABORTED
    structures = [s.structure() for s in states]
    certs = [solve_certificate(S, flow_rhs(s, cfg.kind, S)[0].E11, accept=cfg.tolerances["certificate"])
             for s, S in zip(states, structures)]
    rows = [[k * dt, c.residual_max, c.margin, c.iterations] for k, c in enumerate(certs)]
    summary = {"geometry": cfg.geometry, "flow": cfg.kind, "slices": cfg.slices, "dt": dt,
               "certificates_converged": all(c.converged for c in certs),
               "margin": min(c.margin for c in certs)}
    code = EXIT_OK
    if summary["certificates_converged"] and summary["margin"] > cfg.tolerances["margin"]:
        amb = build_ambient(structures, certs, 0.0, dt * (cfg.slices - 1), cfg.tolerances["margin"])
        r1, r2 = integrability_residuals(amb)
        summary.update(r1=r1, r2=r2)
        if max(r1, r2) > cfg.tolerances["integrability"]:
            code = EXIT_TOLERANCE
    else:
        summary["message"] = "no certificate with a positive margin; ambient structure not built"
        code = EXIT_TOLERANCE
    return summary, rows, ["t", "residual_max", "margin", "iterations"], code


def _poly_expr(expr):
    from .catalog import eval_expression
    from .poly import Poly

    env = {"z1": Poly.var(0), "z2": Poly.var(1), "zb1": Poly.var(0, True), "zb2": Poly.var(1, True)}
    out = eval_expression(expr, env)
    return out if isinstance(out, Poly) else Poly.const(out)


def cmd_embed(cfg):
    from . import embedded

    geom = _geometry(cfg)
    if not isinstance(geom, embedded.HypersurfaceGeometry):
        raise ValueError("embed needs a hypersurface geometry")
    f = _poly_expr(cfg.f)
    pts = geom.sample(cfg.samples, cfg.seed)
    summary = {"geometry": cfg.geometry, "check": cfg.check, "f": cfg.f, "samples": cfg.samples}
    code = EXIT_OK
    if cfg.check == "lemma62":
        F = geom.frame()
        lhs = embedded.dbar_b_Y(F, f, pts)
        Z = np.column_stack([c(pts) for c in F.Z1])
        res = np.max(np.abs(lhs - 1j * embedded.frakD_value(F, f, pts)[:, None] * Z), axis=1)
        tol = cfg.tolerances["closed" if F.path == "closed" else "difference"]
        summary.update(residual=_stats(res), path=F.path)
    elif cfg.check == "chi":
        _, defect = embedded.chi_embedding(geom, f * cfg.eps, pts)
        summary.update(defect=_stats(defect), path=geom.frame().path, scale=cfg.eps)
        tol = None
    else:
        errs = [embedded.tangency_check(geom, f, e, pts) for e in (cfg.eps, cfg.eps / 2)]
        order = float(np.log2(errs[0] / errs[1])) if errs[1] > 0 else float("inf")
        summary.update(errors=errs, order=order, path=geom.frame().path)
        tol = None
    if tol is not None and summary["residual"]["max"] > tol:
        code = EXIT_TOLERANCE
    return summary, None, None, code


def cmd_selftest(cfg):
    from .selftest import run_all

    # the kernel-complement witness on S^3 is zb1^2 (zb1 itself lies in the kernel)
    results = run_all(only=cfg.only or None, overrides={9: {"antiwitness": "zb1^2"}})
    summary = {"results": [{"criterion": r.number, "name": r.name, "passed": r.passed,
                            "measured": r.measured, "tolerance": r.tolerance} for r in results]}
    code = EXIT_OK if all(r.passed for r in results) else EXIT_TOLERANCE
    return summary, None, None, code


COMMANDS = {"invariants": cmd_invariants, "flow": cmd_flow, "fill": cmd_fill,
            "embed": cmd_embed, "selftest": cmd_selftest}


def run_cli(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = build_config(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    except (ValueError, OSError) as e:
        print(f"crlab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    threads = os.environ.get("CRLAB_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)
    from .catalog import CatalogError

    try:
        summary, series, header, code = COMMANDS[cfg.subcommand](cfg)
    except (CatalogError, ValueError) as e:
        print(f"crlab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    path = write_outputs(cfg, summary, series, header)
    print(json.dumps(_jsonable({"exit": code, "summary": str(path)})))
    return code


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
