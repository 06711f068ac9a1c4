"""Run every distribution and estimator at N = 1e3..1e6 and write a JSON summary.

    python scripts/run_desk_suite.py --out results/desk_suite.json --threads 8
"""

import argparse
import json
import os
import sys
from pathlib import Path

from boltzent.experiment import CI_REPLICATES, run_desk_suite


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results/desk_suite.json"))
    ap.add_argument("--curves-dir", type=Path, default=None, help="also write every curve CSV here")
    ap.add_argument("--replicates", type=int, default=CI_REPLICATES)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args(argv)
    summary = run_desk_suite(args.replicates, args.seed, args.threads, args.curves_dir,
                             progress=lambda msg: print(msg, file=sys.stderr, flush=True))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(summary, indent=2) + "\n")
    print(f"total {summary['seconds']:.1f} s -> {args.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
