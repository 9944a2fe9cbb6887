"""Convergence study for the hypersurface checks: difference-step order of the
dbar_b Y_f identity, torsion growth on perturbed spheres, and Lie-transport order.

    python3 scripts/embed_convergence.py --samples 50
"""

import argparse

import numpy as np

from crlab import embedded as em
from crlab.poly import Poly


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    z1, z2 = Poly.var(0), Poly.var(1)
    zb1, zb2 = Poly.var(0, True), Poly.var(1, True)
    f = z1 * zb2 + zb1 * zb1

    g = em.hypersurface("sphere-perturbed", {"eps": 0.2, "mode": 2})
    p = g.sample(args.samples, args.seed)
    print("difference step h, identity residual")
    prev = None
    for h in (4e-2, 2e-2, 1e-2, 5e-3):
        r = em.dbar_b_check(g, f, p, h=h)[0]
        print(f"  {h:.0e}  {r:.3e}" + (f"  order {np.log2(prev / r):.2f}" if prev else ""))
        prev = r

    for mode in (1, 2):
        print(f"perturbed sphere mode {mode}: eps, max |A|")
        prev = None
        for eps in (0.04, 0.02, 0.01, 0.005):
            gp = em.hypersurface("sphere-perturbed", {"eps": eps, "mode": mode})
            a = np.max(np.abs(em.connection_torsion_at(gp, gp.sample(args.samples, args.seed)).A1b1b))
            print(f"  {eps:.3f}  {a:.3e}" + (f"  slope {np.log2(prev / a):.2f}" if prev else ""))
            prev = a

    s = em.hypersurface("sphere")
    ps = s.sample(args.samples, args.seed)
    print("Lie transport on S^3: Euler step, error")
    prev = None
    for eps in (0.04, 0.02, 0.01):
        e = em.tangency_check(s, f, eps, ps)
        print(f"  {eps:.2f}  {e:.3e}" + (f"  order {np.log2(prev / e):.2f}" if prev else ""))
        prev = e


if __name__ == "__main__":
    main()
