"""Compare the compiled chain kernel with the pure-Python fallback.

Usage: python3 benchmarks/bench_backends.py [--n 4096] [--d 10] [--iterations 2000]
"""
import argparse

from smh.bench import bench_backends
from smh.kernels import available_backends


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=4096)
    ap.add_argument("--d", type=int, default=10)
    ap.add_argument("--iterations", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if available_backends() == ("python",):
        print("compiled extension not built; only the Python backend is available")
    rows = bench_backends(args.n, args.d, args.iterations, seed=args.seed)
    print(f"{'kernel':10s} {'backend':9s} {'us/iter':>12s} {'accept':>8s} {'evals':>10s}  identical")
    per_kernel = {}
    for r in rows:
        per_kernel.setdefault(r.kernel, {})[r.backend] = r.us_per_iter
        print(f"{r.kernel:10s} {r.backend:9s} {r.us_per_iter:12.2f} {r.accept_rate:8.3f} "
              f"{r.mean_evals:10.1f}  {r.matches_reference}")
    for kernel, t in per_kernel.items():
        if "compiled" in t:
            print(f"{kernel}: compiled is {t['python'] / t['compiled']:.1f}x faster")


if __name__ == "__main__":
    main()
