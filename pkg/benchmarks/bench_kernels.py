"""Compare numba and numpy jet kernels, raw and end to end.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from finslerprod import _kernels
from finslerprod.curvature import curvature_batch, einstein_diagnostics, direction_samples
from finslerprod.jet import algebra
from finslerprod.scene import load_scene


def best_of(fn, repeat):
    fn()  # warm up (numba compiles on first call)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def raw_cases(rng):
    for nvars, order, batch in ((4, 4, 50), (8, 4, 50), (8, 6, 8), (8, 2, 1)):
        alg = algebra(nvars, order)
        a = rng.standard_normal((batch, alg.size))
        b = rng.standard_normal((batch, alg.size))
        taylor = rng.standard_normal((batch, order + 1))
        u = b.copy()
        u[:, 0] = 0.0
        yield f"mul     vars={nvars} order={order} batch={batch}", lambda alg=alg, a=a, b=b: _kernels.mul(a, b, alg.mul_i, alg.mul_j, alg.mul_starts)
        yield f"compose vars={nvars} order={order} batch={batch}", lambda alg=alg, u=u, t=taylor: _kernels.compose(u, t, alg.mul_i, alg.mul_j, alg.mul_starts)


def pipeline_cases():
    scene = load_scene("demo.json")
    p = scene.metric("sphere_sphere_ratio")
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.uniform(0.5, 2.5, 20), rng.uniform(-1, 1, 20), rng.uniform(0.5, 2.5, 20), rng.uniform(-1, 1, 20)])
    Y = rng.standard_normal((20, 4))
    yield "curvature_batch S2xS2 (20 points, order 4)", lambda: curvature_batch(p, X, Y)
    x = X[0]
    Ys = direction_samples(p.spec, x, 8, 0)
    yield "einstein_diagnostics S2xS2 (8 directions, order 6)", lambda: einstein_diagnostics(p, x, Ys)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = _kernels.available_backends()
    rng = np.random.default_rng(1)
    cases = list(raw_cases(rng)) + list(pipeline_cases())
    print(f"{'case':<52}" + "".join(f"{b:>12}" for b in backends) + "     speedup")
    for name, fn in cases:
        row = {}
        for b in backends:
            _kernels.set_backend(b)
            row[b] = best_of(fn, args.repeat)
        line = f"{name:<52}" + "".join(f"{row[b] * 1e3:>10.3f}ms" for b in backends)
        if "numba" in row and "numpy" in row:
            line += f"  {row['numpy'] / row['numba']:>8.2f}x"
        print(line)
    # agreement between backends on one product
    outs = []
    for b in backends:
        _kernels.set_backend(b)
        outs.append(_kernels.mul(*_agreement_args()))
    if len(outs) == 2:
        print(f"max |numba - numpy| on a product: {np.max(np.abs(outs[0] - outs[1])):.3g}")


def _agreement_args():
    alg = algebra(6, 4)
    rng = np.random.default_rng(7)
    return rng.standard_normal((10, alg.size)), rng.standard_normal((10, alg.size)), alg.mul_i, alg.mul_j, alg.mul_starts


if __name__ == "__main__":
    main()
