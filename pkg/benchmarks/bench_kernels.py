"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported side by side through ``get_kernels``; the
first numba call per kernel (compilation) is excluded from the timings.
"""
import argparse
import time

import numpy as np

from taulasso._backend import get_kernels
from taulasso.preprocessing import standardize
from taulasso.selection import make_lambda_grid
from taulasso.simbench import generate, scenario
from taulasso.rho import TuningPair


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(k, tuning):
    rng = np.random.default_rng(0)
    r = rng.standard_normal(100_000)
    c0, c1, d = tuning.c0, tuning.c1, tuning.delta

    train, _, _ = generate(scenario("scenario1", contaminated=True), 0)
    std, _ = standardize(train)
    Xt = np.ascontiguousarray(std.X.T)
    grid = make_lambda_grid(std, tuning)

    big, _, _ = generate(scenario("scenario3").with_(n=2000), 1)
    Xt_big = np.ascontiguousarray(big.X.T)

    def path():
        b = np.zeros(std.p)
        for lam in grid:
            b = k.tau_lasso_irwls(Xt, std.y, lam, b, c0, c1, d, 500, 1e-10, 1e-8, 1e-10)[0]

    return {
        "m_scale n=1e5": lambda: k.m_scale(r, c0, d, -1.0, 1e-12, 200),
        "tau-Lasso path (30 lambdas, n=50, p=10)": path,
        "tau-Lasso fit n=2000, p=30": lambda: k.tau_lasso_irwls(
            Xt_big, big.y, 0.01, np.zeros(big.p), c0, c1, d, 500, 1e-10, 1e-8, 1e-10),
        "S-Ridge fit n=2000, p=30": lambda: k.s_ridge_irwls(Xt_big, big.y, 0.1, np.zeros(big.p), c0, d, 500,
                                                            1e-10, 1e-8),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    tuning = TuningPair()
    backends = {name: cases(get_kernels(name), tuning) for name in ("numba", "numpy")}
    for fn in backends["numba"].values():  # compile
        fn()
    print(f"{'kernel':45s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for label in backends["numba"]:
        t_nb = best_of(backends["numba"][label], args.repeat)
        t_np = best_of(backends["numpy"][label], args.repeat)
        print(f"{label:45s} {1e3 * t_nb:11.2f} {1e3 * t_np:11.2f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
