"""Run a flow on a catalog geometry and record the torsion/Cartan history as CSV.

    python3 scripts/flow_experiment.py --geometry t3-roto:n=1@16 --kind cartan --T 0.2
"""

import argparse
import csv
from pathlib import Path

from crlab import geometry_catalog
from crlab.flows import CSV_HEADER, FlowAborted, FlowConfig, FlowState, cfl_limit, run, torsion_monitor


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--geometry", default="t3-roto:n=1@16")
    ap.add_argument("--kind", default="torsion",
                    choices=("torsion", "cartan", "gauge-fixed", "coupled-torsion"))
    ap.add_argument("--T", type=float, default=0.1)
    ap.add_argument("--dt", type=float)
    ap.add_argument("--out", default="results/flow.csv")
    args = ap.parse_args()
    geom = geometry_catalog(args.geometry)
    dt = args.dt or cfl_limit(geom.chart, args.kind, 0.1)
    st = FlowState.initial(geom, coupled=args.kind == "coupled-torsion")
    try:
        st = run(st, args.kind, args.T, dt, monitors=[torsion_monitor], cfg=FlowConfig(dt=dt))
    except FlowAborted as e:
        print(f"aborted at t={e.state.t:.4g}: {e.reason}")
        st = e.state
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        w.writerows(h.row() for h in st.history)
    print(f"{len(st.history) - 1} steps of dt={dt:.3g}; wrote {out}")


if __name__ == "__main__":
    main()
