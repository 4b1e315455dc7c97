"""Compare the numba kernels with the numpy/scipy fallback.

Each path runs in its own interpreter because ``MLTRACE_DISABLE_NUMBA`` is
read at import time.  Both runs time the same workloads and report a hash of
their outputs, so the table also shows whether the two paths agree bit for
bit (probes) or to rounding (products).

    python3 benchmarks/bench_kernels.py [--d 20000] [--block 32] [--repeat 5]
"""
import argparse
import hashlib
import json
import os
import subprocess
import sys
import time

import numpy as np


def best_of(fn, repeat):
    fn()  # warm up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def worker(d, block, repeat):
    import scipy.sparse as sp

    from mltrace import FunctionSpec, estimate_trace
    from mltrace.kernels import HAVE_NUMBA, affine_spmm, cheb_next, rademacher_block, rowdot
    from mltrace.matio import ExplicitOperator, SparseMatrix

    rng = np.random.default_rng(0)
    R = sp.random(d, d, density=8.0 / d, random_state=1, format="csr")
    A = SparseMatrix.from_scipy(((R + R.T) * 0.5).tocsr())
    X = rng.standard_normal((block, d))
    Y = rng.standard_normal((block, d))
    Z = rademacher_block(7, 0, block, d)

    results = {}
    results["rademacher"] = best_of(lambda: rademacher_block(7, 0, block, d), repeat)
    results["affine_spmm"] = best_of(lambda: affine_spmm(A, 0.5, 0.1, X), repeat)
    results["cheb_next"] = best_of(lambda: cheb_next(A, 0.5, 0.1, X, Y), repeat)
    results["rowdot"] = best_of(lambda: rowdot(X, Y), repeat)

    op = ExplicitOperator(A)
    radius = float(abs(A.to_scipy()).sum(axis=1).max())

    def pipeline():
        return estimate_trace(op, FunctionSpec("exp"), 20, interval=(-radius, radius), budget=20 * 40, seed=3)

    results["estimate_trace"] = best_of(pipeline, max(1, repeat // 2))
    rep = pipeline()
    digest = {
        "probes": hashlib.sha1(Z.tobytes()).hexdigest()[:12],
        "estimate": repr(rep.estimate),
    }
    return {"numba": HAVE_NUMBA, "times": results, "digest": digest}


def run_path(disable, args):
    env = dict(os.environ, MLTRACE_DISABLE_NUMBA="1" if disable else "0")
    cmd = [sys.executable, __file__, "--worker", "--d", str(args.d), "--block", str(args.block), "--repeat", str(args.repeat)]
    out = subprocess.run(cmd, env=env, check=True, capture_output=True, text=True).stdout
    return json.loads(out.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=20000)
    ap.add_argument("--block", type=int, default=32)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.worker:
        print(json.dumps(worker(args.d, args.block, args.repeat)))
        return 0

    fast = run_path(False, args)
    slow = run_path(True, args)
    if not fast["numba"]:
        print("numba is not importable; both columns use the fallback")
    print(f"d={args.d} block={args.block} best of {args.repeat}")
    print(f"{'kernel':<16}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name in fast["times"]:
        a, b = fast["times"][name] * 1e3, slow["times"][name] * 1e3
        print(f"{name:<16}{a:>12.3f}{b:>12.3f}{b / a:>10.2f}")
    same_probes = fast["digest"]["probes"] == slow["digest"]["probes"]
    print(f"probe bits identical: {same_probes}")
    print(f"estimates: numba {fast['digest']['estimate']}  numpy {slow['digest']['estimate']}")
    return 0 if same_probes else 1


if __name__ == "__main__":
    sys.exit(main())
