"""Time bootstrap replicate refits on the compiled and pure-Python backends.

Usage: python benchmarks/bench_refit.py [--B 1000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from ipmboot import _backend, bootstrap, data_file, fileio, ipm
from ipmboot import gauss_newton as gn


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--B", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    spec = ipm.ModelSpec("second_order_2f_full")
    data = fileio.read_dataset(data_file("synth13.csv"))
    res = gn.fit(spec, data)
    Y = bootstrap.replicate_responses(res, bootstrap.BootstrapConfig(B=args.B, seed=42))
    cfg = gn.SolverConfig()

    cases = [("python", 1), ("python", 4)]
    if _backend.HAVE_KERNEL:
        cases += [("compiled", 1), ("compiled", 4)]
    else:
        print("compiled kernel not built; timing the fallback only")

    print(f"{args.B} replicate refits, n={data.n}, p={spec.p}, best of {args.repeat}")
    print(f"{'backend':<10}{'threads':>8}{'seconds':>10}{'refits/s':>12}{'speedup':>9}")
    base = None
    reference = None
    for backend, threads in cases:
        t, (theta_star, _) = best_of(
            lambda: bootstrap.refit_replicates(spec, data, res.theta_hat, Y, cfg, backend, threads),
            args.repeat,
        )
        base = base or t
        if reference is None:
            reference = theta_star
        diff = float(np.max(np.abs(theta_star - reference)))
        print(f"{backend:<10}{threads:>8}{t:>10.4f}{args.B / t:>12.0f}{base / t:>8.1f}x   max|dtheta| {diff:.1e}")


if __name__ == "__main__":
    main()
