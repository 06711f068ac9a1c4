"""Command-line front end.

Exit codes: 0 success, 1 usage or input-format error, 2 derivative minimum on
the grid boundary, 3 file system error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import distributions as dists
from .errors import BoundaryMinimumError, DataFormatError, InvalidArgumentError, ResourceBudgetError
from .experiment import CI_REPLICATES, FULL_REPLICATES, PROFILES, reproduce
from .kde import KERNELS
from .selector import (
    Estimator,
    SmoothingGrid,
    curve_to_csv,
    default_grid,
    entropy_curve,
    entropy_curve_from_seeds,
    find_derivative_minimum,
    fmt17,
    read_curve,
)

EXIT_OK, EXIT_USAGE, EXIT_BOUNDARY, EXIT_IO = 0, 1, 2, 3
SAMPLE_SCHEMA = "boltzent.sample/1"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_like(text: str) -> int:
    # accepts 100000, 1e5, 1_000
    try:
        val = float(text.replace("_", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if val != int(val):
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(val)


# -- sample files --------------------------------------------------------------

def sample_to_text(sample: dists.Sample) -> str:
    lines = [f"# dist={sample.distribution_id} n={sample.n} seed={sample.seed} dim={sample.dim} schema={SAMPLE_SCHEMA}"]
    lines += [",".join(fmt17(v) for v in row) for row in sample.data]
    return "\n".join(lines) + "\n"


def read_sample_file(path) -> tuple[np.ndarray, dict]:
    """Rows of comma- or space-separated numbers; ``#`` lines are metadata."""
    meta: dict = {}
    rows = []
    width = None
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            for tok in s[1:].split():
                k, _, v = tok.partition("=")
                meta[k] = v
            continue
        parts = s.replace(",", " ").split()
        try:
            row = [float(v) for v in parts]
        except ValueError:
            raise DataFormatError(f"{path}:{lineno}: non-numeric value in {s!r}") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DataFormatError(f"{path}:{lineno}: expected {width} columns, got {len(row)}")
        rows.append(row)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return np.array(rows), meta


# -- argument parsing ------------------------------------------------------------

def _global_flags(defaults: bool) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    kw = {} if defaults else {"default": argparse.SUPPRESS}
    p.add_argument("--seed", type=_int_like, help="base seed; replicate r uses seed + r (default 0)",
                   **({"default": 0} if defaults else kw))
    p.add_argument("--threads", type=_int_like, help="worker processes (default 1)",
                   **({"default": 1} if defaults else kw))
    p.add_argument("--out-dir", type=Path, help="directory for outputs (default .)",
                   **({"default": Path(".")} if defaults else kw))
    return p


def _estimator_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--estimator", choices=("histogram", "kde"), default="histogram")
    p.add_argument("--kernel", choices=tuple(KERNELS), default="epanechnikov")
    p.add_argument("--method", choices=("quadrature", "resubstitution"), default="quadrature",
                   help="kernel entropy integration method")
    p.add_argument("--grid-lo", type=float, help="smallest grid parameter (default: automatic)")
    p.add_argument("--grid-hi", type=float, help="largest grid parameter (default: automatic)")
    p.add_argument("--grid-points", type=_int_like, default=60)


def _generation_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dist", choices=dists.DISTRIBUTION_IDS, help="distribution to sample")
    p.add_argument("--n", type=_int_like, help="sample size")
    p.add_argument("--replicates", type=_int_like, default=1)
    p.add_argument("--sample-file", type=Path, help="use this sample instead of drawing one")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="boltzent", description="Entropy of samples and smoothing-parameter selection.",
                     parents=[_global_flags(True)])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    g = [_global_flags(False)]

    ps = sub.add_parser("sample", parents=g, help="draw a sample and write it as text")
    ps.add_argument("dist", choices=dists.DISTRIBUTION_IDS)
    ps.add_argument("--n", type=_int_like, required=True)
    ps.add_argument("--out", type=Path, help="output file (default <out-dir>/<dist>_n<n>_seed<seed>.txt; '-' for stdout)")

    pc = sub.add_parser("curve", parents=g, help="tabulate entropy over a smoothing grid")
    _generation_flags(pc)
    _estimator_flags(pc)
    pc.add_argument("--out", type=Path, help="output CSV (default <out-dir>/<dist>_<estimator>_<n>.csv; '-' for stdout)")

    pl = sub.add_parser("select", parents=g, help="derivative-minimum selection, JSON on stdout")
    pl.add_argument("--curve", type=Path, help="curve CSV written by 'curve'")
    _generation_flags(pl)
    _estimator_flags(pl)

    pr = sub.add_parser("reproduce", parents=g, help="rerun a table or figure at desk scale")
    pr.add_argument("profile", choices=PROFILES)
    pr.add_argument("--max-n", type=_int_like, default=10**6)
    pr.add_argument("--replicates", type=_int_like, default=None,
                    help=f"replicates per sample size (default {CI_REPLICATES}, or {FULL_REPLICATES} with --full)")
    pr.add_argument("--full", action="store_true", help=f"use {FULL_REPLICATES} replicates")
    return parser


# -- commands --------------------------------------------------------------------

def _write(path: Path, text: str) -> None:
    if str(path) == "-":
        sys.stdout.write(text)
        return
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as err:
        raise OSError(f"cannot write {path}: {err.strerror or err}") from None


def cmd_sample(args) -> int:
    s = dists.sample(args.dist, args.n, args.seed)
    out = args.out or args.out_dir / f"{args.dist}_n{args.n}_seed{args.seed}.txt"
    _write(out, sample_to_text(s))
    return EXIT_OK


def _grid_for(args, first_data: np.ndarray, est: Estimator) -> SmoothingGrid:
    auto = default_grid(first_data, est, num=args.grid_points)
    lo = args.grid_lo if args.grid_lo is not None else auto.values[0]
    hi = args.grid_hi if args.grid_hi is not None else auto.values[-1]
    if args.grid_lo is None and args.grid_hi is None:
        return auto
    return SmoothingGrid.geometric(lo, hi, args.grid_points, est.grid_kind)


def _build_curve(args):
    est = Estimator(args.estimator, args.kernel)
    if args.sample_file is not None:
        data, meta = read_sample_file(args.sample_file)
        grid = _grid_for(args, data, est)
        curve = entropy_curve([data], grid, est, args.method)
        label = (meta.get("dist", args.sample_file.stem), len(data))
    else:
        if args.dist is None or args.n is None:
            raise UsageError("give either --sample-file or both --dist and --n")
        if args.replicates < 1:
            raise UsageError("--replicates must be >= 1")
        first = dists.sample(args.dist, args.n, args.seed).data
        grid = _grid_for(args, first, est)
        seeds = range(args.seed, args.seed + args.replicates)
        curve = entropy_curve_from_seeds(args.dist, args.n, seeds, grid, est, args.method, args.threads)
        label = (args.dist, args.n)
    return curve, est, label


def cmd_curve(args) -> int:
    curve, est, (name, n) = _build_curve(args)
    meta = {"dist": name, "estimator": est.label, "n": n, "seed": args.seed}
    out = args.out or args.out_dir / f"{name}_{est.label}_{n}.csv"
    _write(out, curve_to_csv(curve, meta))
    try:
        find_derivative_minimum(curve)
    except BoundaryMinimumError as err:
        print(f"warning: {err}", file=sys.stderr)
    except InvalidArgumentError:
        pass
    return EXIT_OK


def cmd_select(args) -> int:
    if args.curve is not None:
        curve = read_curve(args.curve)
    else:
        curve, _, _ = _build_curve(args)
    try:
        res = find_derivative_minimum(curve)
        code = EXIT_OK
    except BoundaryMinimumError as err:
        res = err.result
        print(f"error: {err}", file=sys.stderr)
        code = EXIT_BOUNDARY
    print(json.dumps(res.to_record()))
    return code


def cmd_reproduce(args) -> int:
    reps = args.replicates or (FULL_REPLICATES if args.full else CI_REPLICATES)
    out = args.out_dir / args.profile
    reproduce(args.profile, out, max_n=args.max_n, replicates=reps, base_seed=args.seed, threads=args.threads)
    print(f"wrote {out}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {"sample": cmd_sample, "curve": cmd_curve, "select": cmd_select, "reproduce": cmd_reproduce}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as stop:
        # argparse exits on --help and on usage errors; report the code instead
        return stop.code if isinstance(stop.code, int) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UsageError, DataFormatError, InvalidArgumentError, ResourceBudgetError) as err:
        print(f"boltzent {args.command}: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except BoundaryMinimumError as err:
        print(f"boltzent {args.command}: error: {err}", file=sys.stderr)
        return EXIT_BOUNDARY
    except OSError as err:
        print(f"boltzent {args.command}: error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
