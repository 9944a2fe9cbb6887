"""Acceptance checks shared by the ``selftest`` subcommand and the test suite.

Each check returns a ``CheckResult`` with the measured quantities, the
tolerance it was held to and its wall time.  Oracles are closed-form values
worked out by hand for the model geometries.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import catalog, embedded, fillability, flows, operators, phstructure
from .fields import Field, Form, exterior_d, wedge
from .poly import Poly


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    tolerance: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        vals = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"[{status}] criterion {self.number:2d} {self.name}: {vals} ({self.tolerance}; {self.seconds:.1f}s)"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.3g}"
    return str(v)


def _timed(fn):
    def wrapper(*a, **kw):
        t0 = time.perf_counter()
        res = fn(*a, **kw)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _rel(x, ref):
    return float(np.max(np.abs(np.asarray(x) - ref)) / abs(ref))


# -- 1: catalog invariants ------------------------------------------------------

@_timed
def check_catalog_invariants(res: int = 32, ns=(1, 2), sphere_samples: int = 64) -> CheckResult:
    m = {}
    worst = 0.0
    for n in ns:
        S = catalog.t3_roto(n, res).structure()
        Q = operators.cartan_tensor(S)
        errs = (_rel(S.W.values.real, n / 2), _rel(np.abs(S.A11.values), n / 2),
                _rel(np.abs(Q.values), 3 * n * n / 8))
        m[f"t3({n})_rel"] = max(errs)
        worst = max(worst, *errs)
    Sh = catalog.heis_flat().structure()
    m["heis_A"] = Sh.A11.max_norm()
    sph = embedded.hypersurface("sphere")
    pts = sph.sample(sphere_samples, seed=0)
    Ss = sph.intrinsic(pts).structure()
    m["sphere_A"] = Ss.A11.max_norm()
    m["sphere_Q"] = operators.cartan_tensor(Ss).max_norm()
    m["sphere_A_embedded"] = float(np.max(np.abs(embedded.connection_torsion_at(sph, pts).A1b1b)))
    ok = worst <= 1e-6 and max(m["heis_A"], m["sphere_A"], m["sphere_Q"], m["sphere_A_embedded"]) <= 1e-8
    return CheckResult(1, "catalog invariants", ok, m, "rel<=1e-6, A,Q<=1e-8")


# -- 2: identity suite ----------------------------------------------------------

def identity_trial(seed: int, res: int = 32, base=None) -> dict:
    """One seeded trial: a random mild deformation of T^3(1) and random test fields."""
    rng = np.random.default_rng(seed)
    base = base or catalog.t3_roto(1, res).structure()
    chart = base.chart
    beta = phstructure.random_bandlimited(chart, rng, kmax=1, amplitude=0.05)
    S = phstructure.DeformationState(base, beta).structure()
    k = int(rng.integers(-2, 3))
    C = phstructure.random_bandlimited(chart, rng, weight=k)
    comm = phstructure.commutation_residuals(S, C)
    out = {f"comm{i + 1}": float(v) for i, v in enumerate(comm)}
    out["bianchi"] = phstructure.bianchi_residual(S)
    out["res22"] = S.residuals["res22"]
    out["res24"] = S.residuals["res24"]
    comps = [phstructure.random_bandlimited(chart, rng) for _ in range(3)]
    a = Form.from_components(chart, comps)
    out["dd"] = exterior_d(exterior_d(a)).max_norm()
    f = phstructure.random_bandlimited(chart, rng)
    lhs = exterior_d(a * f)
    df = Form.from_components(chart, [f.diff(ax) for ax in range(3)])
    rhs = wedge(df, a) + exterior_d(a) * f
    out["leibniz"] = (lhs - rhs).max_norm()
    return out


@_timed
def check_identity_suite(trials: int = 100, res: int = 32, tol: float = 1e-6) -> CheckResult:
    base = catalog.t3_roto(1, res).structure()
    worst: dict = {}
    for s in range(trials):
        for k, v in identity_trial(s, res, base).items():
            worst[k] = max(worst.get(k, 0.0), v)
    ok = max(worst.values()) <= tol
    worst["trials"] = trials
    return CheckResult(2, "identity suite", ok, worst, f"all<={tol:g}")


# -- 3: duality and transport ---------------------------------------------------

@_timed
def check_duality(res: int = 32, seed: int = 3, eps=(0.1, 0.05)) -> CheckResult:
    from .transport import lie_derivative_endo

    rng = np.random.default_rng(seed)
    S = catalog.t3_roto(1, res).structure()
    chart = S.chart
    f = phstructure.random_bandlimited(chart, rng, kmax=2, real=True)
    E = operators.EndomorphismField.anticommuting(phstructure.random_bandlimited(chart, rng, kmax=2, weight=2))
    l = operators.inner_endo(S, operators.op_DJ(S, f), E)
    r = operators.inner_fn(S, f, operators.op_DJ_star(S, E))
    d1 = abs(l - r) / max(abs(l), abs(r))
    C = phstructure.random_bandlimited(chart, rng, kmax=2, weight=2)
    D = phstructure.random_bandlimited(chart, rng, kmax=2, weight=2)
    alpha = complex(rng.standard_normal(), rng.standard_normal())
    l2 = operators.inner_weight2(S, operators.op_Lalpha(S, C, alpha), D)
    r2 = operators.inner_weight2(S, C, operators.op_Lalpha(S, D, np.conj(alpha)))
    d2 = abs(l2 - r2) / max(abs(l2), abs(r2))
    g = phstructure.random_bandlimited(chart, rng, kmax=2, real=True, amplitude=0.3)
    X = operators.contact_field(S, g)
    DJ = operators.op_DJ(S, g)
    errs = [(lie_derivative_endo(S, X, S.J_coord(), e) * 0.5).distance(DJ) for e in eps]
    order = math.log(errs[0] / errs[1]) / math.log(eps[0] / eps[1])
    m = {"DJ_rel": d1, "Lalpha_rel": d2, "transport_err": errs[-1], "order": order}
    ok = d1 <= 1e-6 and d2 <= 1e-6 and order >= 1.8
    return CheckResult(3, "operator duality", ok, m, "rel<=1e-6, order>=1.8")


# -- 4: real part of frakD --------------------------------------------------------

@_timed
def check_two_re_frakD(res: int = 32, seed: int = 4, trials: int = 5) -> CheckResult:
    S = catalog.t3_roto(1, res).structure()
    rng = np.random.default_rng(seed)
    J = operators.J_endomorphism(S)
    worst = 0.0
    for _ in range(trials):
        h = phstructure.random_bandlimited(S.chart, rng, kmax=3)
        lhs = operators.two_re(operators.frakD_endomorphism(S, h))
        rhs = operators.compose(J, operators.op_DJ(S, h.imag())) + operators.op_DJ(S, h.real())
        worst = max(worst, lhs.distance(rhs))
    return CheckResult(4, "2Re frakD decomposition", worst <= 1e-7, {"max": worst}, "<=1e-7")


# -- 5: Cartan-flow consistency ---------------------------------------------------

@_timed
def check_cartan_consistency(res: int = 16, dts=(1e-2, 5e-3, 2.5e-3)) -> CheckResult:
    """d|A|^2/dt from one step against 2 Re(conj(A) * (-Q,0)); the modulus
    removes the frame rotation carried by beta."""
    cfg = flows.FlowConfig(enforce_cfl=False)
    st = flows.FlowState.initial(catalog.t3_roto(1, res))
    S = st.structure()
    A = S.A11.values
    pred = 2 * np.real(np.conj(A) * -S.cov(operators.cartan_tensor(S), "0").values)
    errs = []
    for dt in dts:
        A1 = flows.step(st, dt, "cartan", cfg).structure().A11.values
        fd = (np.abs(A1) ** 2 - np.abs(A) ** 2) / dt
        errs.append(float(np.max(np.abs(fd - pred))))
    ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
    ok = all(1.6 <= r <= 2.4 for r in ratios)
    m = {f"err{i}": e for i, e in enumerate(errs)}
    m.update({f"ratio{i}": r for i, r in enumerate(ratios)})
    return CheckResult(5, "Cartan-flow consistency", ok, m, "ratio in [1.6, 2.4]")


# -- 6: gauge-fixed flow from a torsion-free state -----------------------------------

@_timed
def check_gauge_fixed(res: int = 64, steps: int = 100, cfl: float = 0.1) -> CheckResult:
    geom = catalog.nil_invariant("0.1*exp(i*x)", res)
    st = flows.FlowState.initial(geom)
    dt = flows.cfl_limit(geom.chart, "gauge-fixed", cfl)
    cfg = flows.FlowConfig(dt=dt, cfl=cfl)
    st = flows.run(st, "gauge-fixed", steps * dt, dt, monitors=[flows.torsion_monitor], cfg=cfg)
    normA = max(h.normA for h in st.history)
    m = {"steps": len(st.history) - 1, "dt": dt, "max_A": normA}
    return CheckResult(6, "gauge-fixed Cartan flow", normA <= 1e-6 and len(st.history) - 1 == steps,
                       m, "max|A|<=1e-6")


# -- 7: certificate and ambient structure --------------------------------------------

@_timed
def check_certificate(res: int = 32, slices: int = 9, dt: float = 0.01) -> CheckResult:
    cfg = flows.FlowConfig(enforce_cfl=False)
    st = flows.FlowState.initial(catalog.t3_roto(1, res))
    structures = [st.structure()]
    s = st
    for _ in range(slices - 1):
        s = flows.step(s, dt, "torsion", cfg)
        structures.append(s.structure())
    certs = [fillability.solve_certificate(S, -S.A11) for S in structures]
    u0 = certs[0].u
    dev = float(np.max(np.abs(u0.values + 1)))
    amb = fillability.build_ambient(structures, certs, 0.0, dt * (slices - 1))
    r1, r2 = fillability.integrability_residuals(amb)
    x = structures[0].chart.nodes()[0]
    bump = Field(structures[0].chart, 0.05 * np.sin(x))
    amb2 = fillability.build_ambient(structures, certs, 0.0, dt * (slices - 1),
                                     u_override=[c.u + bump for c in certs])
    q1, q2 = fillability.integrability_residuals(amb2)
    m = {"u_plus_1": dev, "r1": r1, "r2": r2, "control": q1 + q2, "margin": amb.margin}
    ok = dev <= 1e-7 and r1 <= 1e-6 and r2 <= 1e-6 and q1 + q2 > 1e-3
    return CheckResult(7, "certificate u=-1 and ambient integrability", ok, m,
                       "|u+1|<=1e-7, r<=1e-6, control>1e-3")


# -- 8: jet matching ------------------------------------------------------------------

@_timed
def check_jets(solves: int = 1000, rejects: int = 100, seed: int = 8) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(solves):
        J = fillability.random_complex_structure(rng)
        C = fillability.random_anticommuting(J, rng)
        eta = fillability.match_jets(J, C)
        worst = max(worst, float(np.max(np.abs(eta @ J - J @ eta - C))))
    rejected = 0
    for _ in range(rejects):
        J = fillability.random_complex_structure(rng)
        C = fillability.random_anticommuting(J, rng) + rng.standard_normal((4, 4))
        try:
            fillability.match_jets(J, C)
        except fillability.JetError:
            rejected += 1
    m = {"max_residual": worst, "rejected": rejected, "of": rejects}
    return CheckResult(8, "jet matcher", worst <= 1e-12 and rejected == rejects, m,
                       "residual<=1e-12, all rejected")


# -- 9, 10: embedded identities --------------------------------------------------------

def _zs():
    return Poly.var(0), Poly.var(1), Poly.var(0, True), Poly.var(1, True)


def random_degree2(rng) -> Poly:
    z1, z2, zb1, zb2 = _zs()
    gens = [Poly.const(1.0), z1, z2, zb1, zb2]
    out = Poly()
    for i in range(5):
        for j in range(i, 5):
            c = complex(rng.standard_normal(), rng.standard_normal())
            out = out + gens[i] * gens[j] * c
    return out


@_timed
def check_dbar_identity(samples: int = 200, seed: int = 9, antiwitness: str = "zb1") -> CheckResult:
    """Residual of dbar_b Y_f - i frakD f on S^3; ``antiwitness`` picks the
    function expected outside the kernel ("zb1" as stated, "zb1^2" as a valid one)."""
    z1, z2, zb1, zb2 = _zs()
    rng = np.random.default_rng(seed)
    sph = embedded.hypersurface("sphere")
    pts = sph.sample(samples, seed=seed)
    fs = {"z1zb2": z1 * zb2, "|z1|^2": z1 * zb1, "random": random_degree2(rng)}
    m = {}
    for name, f in fs.items():
        m[f"closed[{name}]"] = embedded.dbar_b_check(sph, f, pts, closed=True)[0]
        m[f"diff[{name}]"] = embedded.dbar_b_check(sph, f, pts, closed=False)[0]
    m["ker[z1]"] = float(embedded.frakD_norm(sph, z1, pts).max())
    m["ker[z2]"] = float(embedded.frakD_norm(sph, z2, pts).max())
    wit = {"zb1": zb1, "zb1^2": zb1 * zb1}[antiwitness]
    m[f"witness[{antiwitness}]"] = float(embedded.frakD_norm(sph, wit, pts).max())
    ok = (max(v for k, v in m.items() if k.startswith("closed")) <= 1e-5
          and max(v for k, v in m.items() if k.startswith("diff")) <= 1e-3
          and max(m["ker[z1]"], m["ker[z2]"]) <= 1e-6
          and m[f"witness[{antiwitness}]"] >= 0.1)
    return CheckResult(9, "dbar_b Y_f identity on S^3", ok, m,
                       "closed<=1e-5, diff<=1e-3, kernel<=1e-6, witness>=0.1")


@_timed
def check_route_agreement(samples: int = 200, seed: int = 10, eps=(0.02, 0.01)) -> CheckResult:
    rng = np.random.default_rng(seed)
    sph = embedded.hypersurface("sphere")
    pts = sph.sample(samples, seed=seed)
    worst = 0.0
    for _ in range(3):
        f = random_degree2(rng)
        worst = max(worst, embedded.route_agreement(sph, f, pts)[0])
    _, _, zb1, _ = _zs()
    f = zb1 * zb1 + random_degree2(rng)
    errs = [embedded.tangency_check(sph, f, e, pts[:50]) for e in eps]
    order = math.log(errs[0] / errs[1]) / math.log(eps[0] / eps[1])
    m = {"route_max": worst, "lie_err": errs[-1], "order": order}
    return CheckResult(10, "two-route agreement", worst <= 1e-5 and order >= 1.8, m,
                       "route<=1e-5, order>=1.8")


# -- 11: energy monotonicity ------------------------------------------------------------

@_timed
def check_energy(res: int = 8, steps: int = 50, dt: float = 0.01) -> CheckResult:
    cfg = flows.FlowConfig(dt=dt)
    st = flows.FlowState.initial(catalog.t3_roto(1, res), coupled=True)
    st = flows.run(st, "coupled-torsion", steps * dt, dt, cfg=cfg)
    E = np.array([h.energy for h in st.history])
    jumps = np.diff(E)
    m = {"steps": len(jumps), "max_increase": float(jumps.max()), "allowed": 10 * dt * dt,
         "E0": E[0], "E_end": E[-1]}
    return CheckResult(11, "energy monotonicity", bool(np.all(jumps <= 10 * dt * dt)), m,
                       "dE<=10 dt^2 per step")


CHECKS = {
    1: check_catalog_invariants,
    2: check_identity_suite,
    3: check_duality,
    4: check_two_re_frakD,
    5: check_cartan_consistency,
    6: check_gauge_fixed,
    7: check_certificate,
    8: check_jets,
    9: check_dbar_identity,
    10: check_route_agreement,
    11: check_energy,
}


def run_all(only=None, echo=print, overrides=None):
    """Run the checks in order; ``overrides`` maps criterion number to kwargs."""
    results = []
    for k, fn in CHECKS.items():
        if only and k not in only:
            continue
        res = fn(**(overrides or {}).get(k, {}))
        if echo:
            echo(res.line())
        results.append(res)
    return results
