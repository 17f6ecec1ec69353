"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 200] [--reps 5]

Prints one line per kernel with the best-of-``reps`` time for each backend,
the speedup and the largest absolute difference between their outputs.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from hyexpand import kernels
from hyexpand.cumulants import interval_data
from hyexpand.model import ModelSpec
from hyexpand.sampling import generate_poisson


def best_of(fn, reps):
    best, out = math.inf, None
    for _ in range(reps):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(n, batch, seed):
    rng = np.random.default_rng(seed)
    model = ModelSpec.constant(1.0, 1.0, 0.8)
    scheme = generate_poisson(n, 1.0, 1.0, seed=seed)
    s, t = scheme.pi1.breakpoints, scheme.pi2.breakpoints
    dx1 = rng.standard_normal(scheme.N1)
    dx2 = rng.standard_normal(scheme.N2)
    yield "hy_sweep", lambda b: b.hy_sweep(s, t, dx1, dx2)[0]

    d = interval_data(model, scheme)
    ov = d.index
    yield "chain_sums", lambda b: np.array(
        b.chain_sums(ov.jlo, ov.jhi, ov.ilo, ov.ihi, ov.offset, d.w, d.v1I, d.v2J))

    tables = model.integrals.arrays()
    M = int(n + 10 * math.sqrt(n) + 20)
    g1 = rng.standard_exponential((batch, M))
    g2 = rng.standard_exponential((batch, M))
    z = rng.standard_normal((batch, 2 * M, 2))
    dtab = np.zeros((6, 2))
    yield f"mc_batch[{batch}]", lambda b: b.mc_batch(
        1.0, float(n), float(n), g1, g2, z, 1, tables, dtab, (0.0, 0.0), 0, model=model)[0]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200, help="expected points per unit time")
    ap.add_argument("--batch", type=int, default=256, help="replicates per mc_batch call")
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if kernels.compiled_backend is None:
        print("compiled backend not built; only the fallback is available")
    print(f"{'kernel':<16}{'compiled [s]':>14}{'fallback [s]':>14}{'speedup':>10}{'max |diff|':>12}")
    for name, call in cases(args.n, args.batch, args.seed):
        tp, outp = best_of(lambda: call(kernels.python_backend), args.reps)
        if kernels.compiled_backend is None:
            print(f"{name:<16}{'-':>14}{tp:>14.3e}{'-':>10}{'-':>12}")
            continue
        tc, outc = best_of(lambda: call(kernels.compiled_backend), args.reps)
        diff = float(np.max(np.abs(np.asarray(outc) - np.asarray(outp))))
        print(f"{name:<16}{tc:>14.3e}{tp:>14.3e}{tp / tc:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
