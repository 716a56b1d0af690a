"""Compare the compiled and numpy leave-one-out kernels.

Times one leave-one-out criterion evaluation (the quantity the simplex
search evaluates hundreds of times per fit) for both backends over a range
of sample sizes, and one complete single-index fit per backend.

    python3 benchmarks/bench_kernels.py [--sizes 100,400,1600] [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from fsir import smoother
from fsir.fpca import estimate_eigenbasis
from fsir.index import fit_single_index
from fsir.simulation import SimScenario, generate_predictors, generate_response


def bench_sse(impl, z, y, h, local_linear, repeat):
    t = timeit.repeat(lambda: impl.loo_sse(z, y, h, 0.1, local_linear), number=1, repeat=repeat)
    return float(np.median(t))


def bench_fit(impl, n, seed=0):
    data = generate_predictors(SimScenario("i", n, 0.1, seed=seed))
    data = data.with_responses(generate_response("i", data, 0.1, seed + 1))
    basis = estimate_eigenbasis(data, 4)
    saved = smoother._impl
    smoother._impl = impl
    try:
        t0 = timeit.default_timer()
        fit_single_index(data, basis, 0.3, 4)
        return timeit.default_timer() - t0
    finally:
        smoother._impl = saved


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="100,200,400,800,1600,3200")
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--fit-sizes", default="200,800")
    args = ap.parse_args()
    backends = smoother.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the numpy backend is available")
    rng = np.random.default_rng(0)
    print(f"{'n':>6} {'kind':>5} " + " ".join(f"{b + ' ms':>12}" for b in backends) + "   speedup")
    for n in (int(s) for s in args.sizes.split(",")):
        z = rng.standard_normal(n)
        y = np.sin(z) + 0.1 * rng.standard_normal(n)
        h = 1.06 * n ** -0.2
        for ll in (False, True):
            times = {b: bench_sse(m, z, y, h, ll, args.repeat) for b, m in backends.items()}
            ratio = times["python"] / times["cython"] if "cython" in times else float("nan")
            cells = " ".join(f"{1e3 * t:12.4f}" for t in times.values())
            print(f"{n:6d} {'ll' if ll else 'lc':>5} {cells}   {ratio:7.1f}x")
    print("\nfull single-index fit (r=4, h=0.3, grid start + simplex)")
    for n in (int(s) for s in args.fit_sizes.split(",")):
        times = {b: bench_fit(m, n) for b, m in backends.items()}
        print(f"{n:6d} " + " ".join(f"{b}={t:.3f}s" for b, t in times.items()))


if __name__ == "__main__":
    main()
