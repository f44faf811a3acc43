"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py --rows 4096 --repeat 5
"""
import argparse
import math
import timeit

import numpy as np

from stablab.kernels import get_backend


def cases(rows, cols, levels):
    g = np.random.Generator(np.random.Philox(0))
    u, w = g.random((rows, cols)), g.standard_exponential((rows, cols))
    x = g.standard_normal((rows, cols))
    wts = np.full(cols, 1.0 / cols)
    rho = np.linspace(0.0, 1.0, cols)
    nb = (1 << (levels + 1)) - 2
    ub, wb = g.random((max(rows // 8, 1), nb)), g.standard_exponential((max(rows // 8, 1), nb))
    theta = 2.0 ** (-np.arange(1, levels + 1) / 1.5)
    return {
        "sas_transform a=1.5": lambda k: k.sas_transform(u, w, 1.5),
        "rows_norm q=3": lambda k: k.rows_norm(x, wts, 3.0),
        "cumsum_norm q=2": lambda k: k.cumsum_norm(x, rho, wts, 2.0),
        "cumsum_norm sup": lambda k: k.cumsum_norm(x, None, wts, math.inf),
        f"block_max_sum L={levels}": lambda k: k.block_max_sum(ub, wb, 1.5, theta),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=4096)
    ap.add_argument("--cols", type=int, default=1024)
    ap.add_argument("--levels", type=int, default=12)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    py = get_backend("python")
    try:
        cy = get_backend("cython")
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return 1
    print(f"{'kernel':<24}{'numpy [ms]':>12}{'cython [ms]':>13}{'speedup':>9}")
    for name, fn in cases(args.rows, args.cols, args.levels).items():
        t = {}
        for label, mod in (("py", py), ("cy", cy)):
            fn(mod)
            t[label] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<24}{t['py']:>12.2f}{t['cy']:>13.2f}{t['py'] / t['cy']:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
