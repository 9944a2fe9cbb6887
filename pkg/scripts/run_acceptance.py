"""Run the acceptance checks and write a JSON summary.

    python3 scripts/run_acceptance.py [--only 1 3 7] [--out results/acceptance.json]
"""

import argparse
import json
from pathlib import Path

from crlab.selftest import run_all


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--only", type=int, nargs="*")
    ap.add_argument("--out", default="results/acceptance.json")
    ap.add_argument("--stated-witness", action="store_true",
                    help="use zb1 (as stated) instead of zb1^2 for criterion 9")
    args = ap.parse_args()
    over = None if args.stated_witness else {9: {"antiwitness": "zb1^2"}}
    results = run_all(only=args.only or None, overrides=over)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps([{"criterion": r.number, "name": r.name, "passed": r.passed,
                                "measured": {k: float(v) for k, v in r.measured.items()},
                                "seconds": r.seconds} for r in results], indent=2))
    print(f"{sum(r.passed for r in results)}/{len(results)} passed; wrote {out}")


if __name__ == "__main__":
    main()
