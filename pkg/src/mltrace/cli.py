"""Command-line harness: ``mltrace estimate | triangles | sweep``.

Exit codes: 0 success, 1 usage error, 2 data or domain error, 3 numeric
failure.  A JSON config file (``--config``) may set any long option using
its dest name (``budget_matvecs``, ``fn``, ...); command-line flags win.
The default seed is read from ``TRACE_MLMC_SEED``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .chebyshev import FunctionSpec
from .errors import (
    AdjacencyError,
    DimensionError,
    DomainError,
    IntervalViolationError,
    MatrixMarketError,
    OracleSizeError,
)
from .matio import ExplicitOperator, GramPlusShift, SparseMatrix, read_matrix_market
from .multilevel import estimate_trace
from .reference import all_sign_vectors, inverse_spectrum_matrix
from .sampling import ProbeStream
from .triangles import (
    TriangleSampleMatrix,
    fit_control_variates,
    triangle_estimate,
    triangle_samples,
    triangle_samples_from_probes,
    validate_adjacency,
)

log = logging.getLogger("mltrace")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
SWEEP_FIELDS = ["matrix", "function", "degree", "mode", "trial", "seed", "estimate", "stderr", "matvecs"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _default_seed():
    raw = os.environ.get("TRACE_MLMC_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"TRACE_MLMC_SEED must be an integer, got {raw!r}") from None


def _interval(text):
    try:
        a, b = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("interval must be 'a,b'") from None
    return a, b


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_common(p):
    p.add_argument("--config", help="JSON file with default option values")
    p.add_argument("--seed", type=int, default=None, help="master seed (default: $TRACE_MLMC_SEED or 0)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")


def _add_estimator_opts(p):
    p.add_argument("--matrix", help="Matrix Market file")
    p.add_argument("--synthetic", type=int, metavar="D", help="use the dense d x d SPSD matrix with eigenvalues 1/i")
    p.add_argument("--fn", default="sqrt", help="log | sqrt | exp | cube | power:<p>")
    p.add_argument("--gram", action="store_true", help="use A^T A + lambda I")
    p.add_argument("--shift", type=float, default=0.0, help="regularization lambda for --gram")
    p.add_argument("--interval", type=_interval, help="spectral interval 'a,b'")
    p.add_argument("--interval-method", choices=["gershgorin", "power"], default="gershgorin")
    p.add_argument("--pilot", type=int, default=10, help="pilot sample size m_pilot")
    p.add_argument("--symmetry-trick", action="store_true", help="ceil(n/2) matvecs per sample")
    p.add_argument("--no-reuse-pilot", dest="reuse_pilot", action="store_false")


def build_parser():
    parser = _Parser(prog="mltrace", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mltrace {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("estimate", help="estimate trace(f(A))")
    _add_common(p)
    _add_estimator_opts(p)
    p.add_argument("--degree", type=int, required=False)
    p.add_argument("--mode", default="multilevel", help="single | multilevel | fixed-levels:l1,l2,...")
    p.add_argument("--budget-matvecs", type=float)
    p.add_argument("--variance", type=float, help="target variance eps^2")
    p.add_argument("--samples", type=int)
    p.add_argument("--csv", help="append a result row to this CSV file")
    p.add_argument("--json", action="store_true", help="print the full report as JSON")

    p = sub.add_parser("triangles", help="estimate the number of triangles")
    _add_common(p)
    p.add_argument("--matrix", required=False)
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--cv", dest="cv", action="store_true", default=True)
    p.add_argument("--no-cv", dest="cv", action="store_false")
    p.add_argument("--plain", action="store_true", help="3 matvecs per sample instead of 2")
    p.add_argument("--exhaustive", action="store_true", help="enumerate all 2^d probes (small graphs only)")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("sweep", help="degree sweep, single vs multilevel, CSV output")
    _add_common(p)
    _add_estimator_opts(p)
    p.add_argument("--degrees", type=_int_list, required=False)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--modes", default="single,multilevel")
    p.add_argument("--samples", type=int, default=50, help="single-level samples; multilevel gets samples*n matvecs")
    p.add_argument("--out", help="CSV path (default stdout)")
    return parser


def _parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a subcommand is required (estimate, triangles, sweep)")
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(cfg) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = _default_seed()
    return args


def _load_operator(args):
    if bool(args.matrix) == bool(getattr(args, "synthetic", None)):
        raise UsageError("give exactly one of --matrix or --synthetic")
    if args.matrix:
        A = read_matrix_market(args.matrix)
        name = os.path.basename(args.matrix)
    else:
        M, _ = inverse_spectrum_matrix(args.synthetic, seed=0)
        A = SparseMatrix.from_dense(M, symmetric=True)
        name = f"synthetic-inv{args.synthetic}"
    if args.gram:
        return GramPlusShift(A, args.shift), name
    if not A.symmetric:
        raise DimensionError("matrix is not symmetric; use --gram for A^T A")
    return ExplicitOperator(A), name


def _parse_mode(text):
    if text in ("single", "multilevel"):
        return text, None
    if text.startswith("fixed-levels:"):
        return "fixed", _int_list(text.split(":", 1)[1])
    raise UsageError(f"unknown mode {text!r}")


def _config_dict(args):
    return {k: v for k, v in vars(args).items() if k not in ("verbose",)}


def cmd_estimate(args, out):
    if args.degree is None:
        raise UsageError("--degree is required")
    mode, levels = _parse_mode(args.mode)
    op, name = _load_operator(args)
    fn = FunctionSpec.parse(args.fn, args.shift if args.gram else 0.0)
    rep = estimate_trace(
        op,
        fn,
        args.degree,
        mode=mode,
        levels=levels,
        interval=args.interval,
        interval_method=args.interval_method,
        budget=args.budget_matvecs,
        variance=args.variance,
        samples=args.samples,
        m_pilot=args.pilot,
        seed=args.seed,
        symmetry_trick=args.symmetry_trick,
        reuse_pilot=args.reuse_pilot,
        workers=args.workers,
    )
    rep.info["version"] = __version__
    rep.info["matrix"] = name
    rep.info["config"] = _config_dict(args)
    if args.json:
        json.dump(rep.to_dict(), out, indent=2, default=str)
        out.write("\n")
    else:
        out.write(f"matrix     {name}\n")
        out.write(f"function   {fn.name}  degree {args.degree}  interval {rep.info['interval']} ({rep.info['interval_method']})\n")
        out.write(f"estimate   {rep.estimate!r}\n")
        out.write(f"stderr     {rep.stderr!r}\n")
        out.write(f"matvecs    {rep.matvecs}\n")
        if rep.plan is not None:
            out.write(f"levels     {list(rep.plan.levels)}\n")
            out.write(f"samples    {list(rep.allocation.samples)}\n")
        else:
            out.write(f"samples    {rep.levels[0].samples}\n")
        out.write(f"seed       {args.seed}  version {__version__}\n")
        out.write(f"config     {json.dumps(_config_dict(args), default=str, sort_keys=True)}\n")
    if args.csv:
        new = not os.path.exists(args.csv)
        with open(args.csv, "a", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            if new:
                w.writerow(SWEEP_FIELDS)
            w.writerow([name, fn.name, args.degree, args.mode, 0, args.seed, repr(rep.estimate), repr(rep.stderr), rep.matvecs])
    return EXIT_OK


def cmd_triangles(args, out):
    if not args.matrix:
        raise UsageError("--matrix is required")
    A = read_matrix_market(args.matrix)
    validate_adjacency(A)
    if args.exhaustive:
        Z = all_sign_vectors(A.shape[0], cap=20)
        y, used = triangle_samples_from_probes(A, Z, not args.plain)
        samples = TriangleSampleMatrix(y, used, A.nnz, 0.0)
    else:
        samples = triangle_samples(A, args.samples, ProbeStream(args.seed), not args.plain, workers=args.workers)
    fit = fit_control_variates(samples) if args.cv and samples.m >= 3 else None
    est, se = triangle_estimate(samples, fit)
    if args.exhaustive:
        # every probe enumerated: the mean is exact, there is no sampling error
        se = 0.0
    result = {
        "matrix": os.path.basename(args.matrix),
        "estimate": est,
        "stderr": se,
        "samples": samples.m,
        "matvecs": samples.matvecs,
        "cv": fit is not None,
        "a1": fit.a1 if fit else None,
        "a2": fit.a2 if fit else None,
        "seed": args.seed,
        "version": __version__,
        "note": "control-variate coefficients fitted on the estimation samples" if fit else None,
    }
    if args.json:
        json.dump(result, out, indent=2)
        out.write("\n")
    else:
        for k, v in result.items():
            if v is not None:
                out.write(f"{k:<10} {v}\n")
    return EXIT_OK


def cmd_sweep(args, out):
    if not args.degrees:
        raise UsageError("--degrees is required")
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    for m in modes:
        if m not in ("single", "multilevel"):
            raise UsageError(f"sweep modes are single and multilevel, got {m!r}")
    op, name = _load_operator(args)
    fn = FunctionSpec.parse(args.fn, args.shift if args.gram else 0.0)
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else out
    try:
        w = csv.writer(fh)
        w.writerow(SWEEP_FIELDS)
        for n in args.degrees:
            for mode in modes:
                for t in range(args.trials):
                    seed = args.seed + t
                    kw = dict(samples=args.samples) if mode == "single" else dict(
                        budget=args.samples * n * op.unit_cost
                    )
                    rep = estimate_trace(
                        op,
                        fn,
                        n,
                        mode=mode,
                        interval=args.interval,
                        interval_method=args.interval_method,
                        m_pilot=args.pilot,
                        seed=seed,
                        symmetry_trick=args.symmetry_trick,
                        reuse_pilot=args.reuse_pilot,
                        workers=args.workers,
                        **kw,
                    )
                    w.writerow([name, fn.name, n, mode, t, seed, repr(rep.estimate), repr(rep.stderr), rep.matvecs])
    finally:
        if fh is not out:
            fh.close()
    return EXIT_OK


def main(argv=None, out=None):
    out = out or sys.stdout
    try:
        args = _parse(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        handler = {"estimate": cmd_estimate, "triangles": cmd_triangles, "sweep": cmd_sweep}[args.command]
        return handler(args, out)
    except UsageError as exc:
        print(f"mltrace: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (
        MatrixMarketError,
        DomainError,
        AdjacencyError,
        DimensionError,
        OracleSizeError,
        OSError,
    ) as exc:
        print(f"mltrace: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (IntervalViolationError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"mltrace: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"mltrace: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
