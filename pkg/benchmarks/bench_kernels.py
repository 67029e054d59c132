"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--n 100000] [--dp-n 2000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from pdpart import _backend
from pdpart.sampler import RngStream


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100_000, help="sequential sampler path length")
    ap.add_argument("--dp-n", type=int, default=2000, help="sample size for the exact law of K_n")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    cps = np.array([args.n], dtype=np.int64)
    backends = {"python": _backend.implementation("python")}
    try:
        backends["cython"] = _backend.implementation("cython")
    except ImportError:
        print("compiled kernels not built; timing the fallback only")

    results = {}
    for name, mod in backends.items():
        crp = best_of(lambda: mod.crp_path(RngStream(1).bit_generator, 0.5, 1.0, cps, 4), args.repeat)
        dp = best_of(lambda: mod.law_kn_logprob(0.5, 1.0, args.dp_n), args.repeat)
        results[name] = (crp, dp)

    print(f"{'backend':<8} {'crp_path n=' + str(args.n):>22} {'law_kn n=' + str(args.dp_n):>18}")
    for name, (crp, dp) in results.items():
        print(f"{name:<8} {crp:>20.4f} s {dp:>16.4f} s")
    if len(results) == 2:
        (pc, pd), (cc, cd) = results["python"], results["cython"]
        print(f"{'speedup':<8} {pc / cc:>21.1f}x {pd / cd:>17.1f}x")


if __name__ == "__main__":
    main()
