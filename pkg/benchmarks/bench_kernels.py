"""Compare the compiled and pure-Python kernel backends.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``. For context it
also times the dense symmetric eigensolve that follows the weight matrix in a
full model build; that step is shared by both backends.
"""

import argparse
import timeit

import numpy as np
import scipy.linalg

from bgpredict import kernels
from bgpredict.data import butterworth_coefficients
from bgpredict.diffusion import build_laplacian, choose_epsilon
from bgpredict.predega import ZoneTables


def cases(rng):
    pts = rng.uniform(40, 400, size=(3700, 7))
    eps = choose_epsilon(pts)
    signal = rng.uniform(40, 400, 100_000)
    b0, b1, a1 = butterworth_coefficients(0.8)
    n = 100_000
    ref = rng.uniform(40, 400, n)
    pred = ref + rng.normal(0, 30, n)
    pr, rr = rng.normal(0, 2, (2, n))
    defined = np.ones(n, dtype=np.uint8)
    t = ZoneTables.default()
    return {
        "gaussian_weights N=3700 d=7": lambda b: b.gaussian_weights(pts, eps),
        "iir_first_order n=1e5": lambda b: b.iir_first_order(signal, b0, b1, a1, signal[0], signal[0]),
        "classify_batch n=1e5": lambda b: b.classify_batch(pred, ref, pr, rr, defined, t.point_params,
                                                           t.rate_params, t.combination, t.endpoint),
    }, pts, eps


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if kernels.compiled_backend is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    table, pts, eps = cases(np.random.default_rng(0))
    print(f"{'kernel':32s} {'cython s':>10s} {'python s':>10s} {'speedup':>8s}")
    for name, call in table.items():
        tc = best_of(lambda: call(kernels.compiled_backend), args.repeat)
        tp = best_of(lambda: call(kernels.python_backend), args.repeat)
        print(f"{name:32s} {tc:10.4f} {tp:10.4f} {tp / tc:8.1f}x")
    W = kernels.compiled_backend.gaussian_weights(pts, eps)
    L = build_laplacian(W).matrix
    te = best_of(lambda: scipy.linalg.eigh(L, subset_by_index=[0, 49], driver="evr"), 1)
    print(f"{'eigh 50 of 3700 (shared)':32s} {te:10.4f}")


if __name__ == "__main__":
    main()
