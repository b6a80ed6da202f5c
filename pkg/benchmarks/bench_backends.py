"""Compare the numba and pure-numpy paths of every hot kernel.

    python3 benchmarks/bench_backends.py [--n 2000] [--dim 8] [--M 64] [--queries 500]

Prints one row per (kernel, backend): best-of-N wall clock, speedup over
numpy, and the max abs deviation from the numpy result. JIT compilation is
excluded by a warm-up call.
"""

import argparse

from lazykrr import bench


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--M", type=int, default=64)
    p.add_argument("--queries", type=int, default=500)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args()
    rows = bench.backend_comparison(n=a.n, dim=a.dim, M=a.M, queries=a.queries, seed=a.seed, repeats=a.repeats)
    base = {r["kernel"]: r["seconds"] for r in rows if r["backend"] == "numpy"}
    print(f"{'kernel':<16}{'backend':<9}{'seconds':>11}{'speedup':>9}{'max|diff|':>12}")
    for r in rows:
        speedup = base[r["kernel"]] / r["seconds"] if r["seconds"] > 0 else float("inf")
        print(f"{r['kernel']:<16}{r['backend']:<9}{r['seconds']:>11.5f}{speedup:>9.2f}{r['max_abs_diff']:>12.2e}")


if __name__ == "__main__":
    main()
