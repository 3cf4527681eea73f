"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--threads 1]
"""

import argparse
import timeit

import numpy as np

from motionseed import _backend
from motionseed.attention import TokenGrid
from motionseed.sinkhorn import cost_matrix


def cases(threads):
    rng = np.random.default_rng(0)
    grid = TokenGrid.from_frames(4, 16, 16)
    C = np.ascontiguousarray(cost_matrix(grid))
    CT = np.ascontiguousarray(C.T)
    n = C.shape[0]
    a, b = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
    f, g = rng.normal(0, 0.01, n), rng.normal(0, 0.01, n)
    src = np.ascontiguousarray(rng.random((96, 96, 4)))
    th = np.deg2rad(12.0)
    inv = np.ascontiguousarray([[np.cos(th) / 1.1, np.sin(th) / 1.1, 4.0], [-np.sin(th) / 1.1, np.cos(th) / 1.1, -3.0]])
    return {
        f"sinkhorn_log {n}x{n}, 50 sweeps": lambda k: k.sinkhorn_log(C, CT, a, b, 0.05, 50, 0.0, threads),
        f"transport_plan {n}x{n}": lambda k: k.transport_plan(C, f, g, 0.05, threads),
        "warp_bilinear 110x110x4": lambda k: k.warp_bilinear(src, inv, 0.0, 0.0, -7, -7, 110, 110),
    }


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()
    names = _backend.available()
    print(f"backends: {', '.join(names)}; threads {args.threads}")
    print(f"{'kernel':36s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fn in cases(args.threads).items():
        best = {}
        for name in names:
            k = _backend.get(name)
            fn(k)  # warm up
            best[name] = min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat))
        row = f"{label:36s}" + "".join(f"{best[n] * 1e3:10.2f}ms" for n in names)
        if len(names) > 1:
            row += f"{best['python'] / best['compiled']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
