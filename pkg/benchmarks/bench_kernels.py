"""Compiled vs pure-Python kernel timings.

Run with ``python benchmarks/bench_kernels.py``.  Each kernel is timed on the
same inputs under both backends; results are checked to agree before timing
is reported.
"""
import argparse
import timeit

import numpy as np

from gdpshrink import _backend
from gdpshrink.map_estimation import MapConfig, em_laplace
from gdpshrink.model import SimSpec, gen_sim_data, standardize


def _lasso_inputs(n, p, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = X[:, :5] @ np.array([3.0, 1.5, 0, 2.0, 0]) + 3.0 * rng.standard_normal(n)
    G = X.T @ X
    c = X.T @ y
    lam = 0.1 * 2 * np.max(np.abs(c))
    return G, c, np.full(p, lam)


def bench_cd(p, number):
    G, c, pen = _lasso_inputs(4 * p, p)

    def run():
        beta = np.zeros(p)
        _backend.cd_lasso_gram(G, c, pen, beta, 10_000, 1e-12)
        return beta

    return run, number


def bench_hyp1f1(number):
    zs = np.linspace(0.5, 60.0, 200)

    def run():
        return [_backend.hyp1f1_series(2.5, 0.5, z, 1e-15, 100_000)[0] for z in zs]

    return run, number


def bench_em(number):
    data, _, _ = gen_sim_data(SimSpec(2, 400, p=20, seed=1), 0)
    ds, _ = standardize(data)

    def run():
        return em_laplace(ds, MapConfig()).beta

    return run, number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    cases = {
        "cd_lasso_gram p=20": bench_cd(20, 200),
        "cd_lasso_gram p=100": bench_cd(100, 20),
        "hyp1f1_series x200": bench_hyp1f1(20),
        "em_laplace n=400 p=20": bench_em(20),
    }
    backends = _backend.available()
    print(f"backends: {', '.join(backends)}")
    print(f"{'kernel':<24}" + "".join(f"{b:>14}" for b in backends) + ("   speedup" if len(backends) > 1 else ""))
    prev = _backend.current()
    try:
        for name, (fn, number) in cases.items():
            times, outs = [], []
            for b in backends:
                _backend.use(b)
                outs.append(np.asarray(fn()))
                times.append(min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number)
            for o in outs[1:]:
                np.testing.assert_allclose(o, outs[0], rtol=1e-9, atol=1e-12)
            line = f"{name:<24}" + "".join(f"{t * 1e3:>12.3f}ms" for t in times)
            if len(times) > 1:
                line += f"{times[backends.index('python')] / times[backends.index('compiled')]:>9.1f}x"
            print(line)
    finally:
        _backend.use(prev)


if __name__ == "__main__":
    main()
