"""Compiled vs pure-Python kernels.

    python benchmarks/bench_kernels.py [--n 5000] [--m 2] [--repeat 5]

Prints the best-of-``repeat`` wall time per kernel for both backends, the
speed-up, and the largest absolute difference between their outputs.
"""

import argparse
import timeit

import numpy as np

from msnar import _kernels_py as py
from msnar.model import ModelSpec, emission_logdensities

try:
    from msnar import _kernels as compiled
except ImportError:  # pragma: no cover
    compiled = None


def cases(n, m, seed):
    g = np.random.default_rng(seed)
    A = np.ascontiguousarray(g.dirichlet(np.ones(m) * 3, size=m))
    spec = ModelSpec.linear(A, g.normal(size=m), g.uniform(-0.9, 0.9, m), g.uniform(0.5, 2, m))
    y = np.ascontiguousarray(g.normal(0, 2, n + 1))
    logb = emission_logdensities(spec, y)
    init = np.ascontiguousarray(spec.initial_distribution)
    b, rho, sig = (np.ascontiguousarray(v) for v in (spec.b, spec.rho, spec.sigma))
    cum = np.ascontiguousarray(np.cumsum(A, axis=1))
    u = g.random(n)
    x = compiled.simulate_chain(cum, np.cumsum(init), u) if compiled else py.simulate_chain(cum, np.cumsum(init), u)
    e = g.standard_normal(n)
    Q = np.ascontiguousarray(A * g.uniform(0.2, 1.2, m)[None, :])

    def fb(k):
        terms, pred, filt = np.empty(n), np.empty((n, m)), np.empty((n, m))
        k.forward(logb, A, init, terms, pred, filt)
        sm, xi = np.empty((n, m)), np.empty((m, m))
        k.backward(logb, A, terms, filt, sm, xi)
        return sm

    return {
        "forward_loglik": lambda k: k.forward_loglik(logb, A, init)[0],
        "linear_gaussian_loglik": lambda k: k.linear_gaussian_loglik(y, b, rho, sig, A, init)[0],
        "forward+backward": fb,
        "simulate_chain": lambda k: k.simulate_chain(cum, np.cumsum(init), u),
        "linear_recursion": lambda k: k.linear_recursion(x, b, rho, sig, e, 0.0),
        "perron_root": lambda k: k.perron_root(Q, 1e-8, 1e-12, 100000)[0],
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--m", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; only the Python backend is available")
    print(f"n={args.n} m={args.m}")
    print(f"{'kernel':<24}{'compiled (ms)':>15}{'python (ms)':>14}{'speed-up':>10}{'max |diff|':>12}")
    for name, fn in cases(args.n, args.m, args.seed).items():
        tp = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat))
        if compiled is None:
            print(f"{name:<24}{'-':>15}{tp * 1e3:>14.3f}")
            continue
        tc = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat))
        diff = float(np.max(np.abs(np.asarray(fn(compiled), dtype=float) - np.asarray(fn(py), dtype=float))))
        print(f"{name:<24}{tc * 1e3:>15.3f}{tp * 1e3:>14.3f}{tp / tc:>9.1f}x{diff:>12.1e}")


if __name__ == "__main__":
    main()
