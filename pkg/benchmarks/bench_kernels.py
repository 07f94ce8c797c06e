"""Time the compiled kernels against the numpy/scipy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from hoianomaly import _pykernels

try:
    from hoianomaly import _kernels
except ImportError:
    _kernels = None


def cases(rng):
    d = 13
    A = rng.normal(size=(d, d))
    chol = np.linalg.cholesky(A @ A.T + np.eye(d))
    X = rng.normal(size=(20_000, d))
    mu = rng.normal(size=d)
    scores = rng.gamma(2.0, size=2000)
    diff = rng.normal(size=112)
    P = rng.normal(size=(112, 112))
    ties = np.sort(np.round(rng.normal(size=10_000), 1))
    return {
        "sq_mahalanobis 20000x13": lambda k: k.sq_mahalanobis(X, mu, chol),
        "sq_mahalanobis 1x13": lambda k: k.sq_mahalanobis(X[:1], mu, chol),
        "gaussian_smooth 2000, sigma=3": lambda k: k.gaussian_smooth(scores, 3.0),
        "saliency 112x112": lambda k: k.saliency(diff, P),
        "tie_ranks 10000": lambda k: k.tie_ranks(ties),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = [("python", _pykernels)] + ([("cython", _kernels)] if _kernels else [])
    if _kernels is None:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':32s}" + "".join(f"{name:>14s}" for name, _ in backends) + ("   speedup" if _kernels else ""))
    for label, fn in cases(np.random.default_rng(0)).items():
        times = []
        for _, mod in backends:
            timer = timeit.Timer(lambda: fn(mod))
            n, _ = timer.autorange()
            times.append(min(timer.repeat(args.repeat, n)) / n)
        row = f"{label:32s}" + "".join(f"{t * 1e6:12.1f}us" for t in times)
        if len(times) == 2:
            row += f"  {times[0] / times[1]:7.2f}x"
        print(row)


if __name__ == "__main__":
    main()
