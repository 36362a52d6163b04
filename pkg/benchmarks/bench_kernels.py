"""Compiled vs numpy kernels: per-call timings and an end-to-end GK run.

    python benchmarks/bench_kernels.py [--rows 300] [--repeat 20]

Both backends must produce bit-identical results; the script checks that
before reporting times.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from ucwfp import kernels
from ucwfp.iteration import StopRule, run
from ucwfp.mappings import make_map
from ucwfp.soperator import SOperator
from ucwfp.spaces import SparseVector, make_space


def rand_sparse(rng, n, span):
    idx = np.sort(rng.choice(span, size=n, replace=False)).astype(np.int64) + 1
    return idx, rng.standard_normal(n) / np.sqrt(n)


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def bench_calls(repeat):
    rng = np.random.default_rng(0)
    w = np.exp2(-0.5 ** np.arange(-1.0, 70000.0))
    rows = []
    for n in (100, 1000, 10_000, 30_000):
        ia, va = rand_sparse(rng, n, 2 * n)
        ib, vb = rand_sparse(rng, n, 2 * n)
        calls = {
            "sparse_combine": lambda: kernels.sparse_combine(ia, va, ib, vb, 0.3),
            "sparse_dist": lambda: kernels.sparse_dist(ia, va, ib, vb),
            "gk_step": lambda: kernels.gk_step(ia, va, w),
        }
        for name, fn in calls.items():
            out, times = {}, {}
            for backend in kernels.available():
                kernels.use(backend)
                out[backend] = fn()
                times[backend] = best_of(fn, repeat)
            ref = out["python"]
            for backend, res in out.items():
                same = (np.array_equal(res[0], ref[0]) and np.array_equal(res[1], ref[1])) if isinstance(ref, tuple) \
                    else res == ref
                if not same:
                    raise SystemExit(f"{name} n={n}: {backend} differs from python")
            rows.append((name, n, times))
    return rows


def bench_run(n_rows):
    space = make_space({"model": "sparse_l2"})
    op = SOperator(make_map(space, {"map": "goebelkirk"}))
    res = {}
    for backend in kernels.available():
        kernels.use(backend)
        t = time.perf_counter()
        traj = run(op, SparseVector.unit(1), StopRule(max_rows=n_rows - 1, residual_tol=0.0), keep_s=False)
        res[backend] = (time.perf_counter() - t, traj.last.y, traj.ms)
    ref = res["python"]
    for backend, (_, y, ms) in res.items():
        if ms != ref[2] or y != ref[1]:
            raise SystemExit(f"GK run under {backend} diverges from python")
    return {b: v[0] for b, v in res.items()}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=300)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    backends = kernels.available()
    initial = kernels.BACKEND
    print(f"backends: {', '.join(backends)}")
    print(f"{'kernel':<16}{'nnz':>8}" + "".join(f"{b + ' us':>16}" for b in backends) + f"{'speedup':>10}")
    for name, n, times in bench_calls(args.repeat):
        line = f"{name:<16}{n:>8}" + "".join(f"{times[b] * 1e6:>16.1f}" for b in backends)
        if "compiled" in times:
            line += f"{times['python'] / times['compiled']:>9.1f}x"
        print(line)
    times = bench_run(args.rows)
    line = f"GK run, {args.rows} rows: " + ", ".join(f"{b} {t:.2f} s" for b, t in times.items())
    if "compiled" in times:
        line += f" ({times['python'] / times['compiled']:.1f}x)"
    print(line)
    kernels.use(initial)


if __name__ == "__main__":
    main()
