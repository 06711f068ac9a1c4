"""Regenerate every table and figure profile at desk scale.

    python scripts/reproduce_all.py --out results --max-n 1e6 --replicates 20
"""

import argparse
import os
import sys
import time
from pathlib import Path

from boltzent.experiment import CI_REPLICATES, PROFILES, reproduce


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--max-n", type=float, default=1e6)
    ap.add_argument("--replicates", type=int, default=CI_REPLICATES)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--profiles", nargs="+", choices=PROFILES, default=list(PROFILES))
    args = ap.parse_args(argv)
    for profile in args.profiles:
        t0 = time.perf_counter()
        reproduce(profile, args.out / profile, int(args.max_n), args.replicates, args.seed, args.threads)
        print(f"{profile}: {time.perf_counter() - t0:.1f} s -> {args.out / profile}", file=sys.stderr)


if __name__ == "__main__":
    main()
