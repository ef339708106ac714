"""Time the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Both backends are called directly so one process can compare them.  The
first numba call per signature is a warm-up and is not timed.
"""

import argparse
import time

import numpy as np

from capacitary import _kernels
from capacitary.content import level_costs
from capacitary.dyadic import CubeFamilyPolicy, GridSpec, family_masks


def _time(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(rng):
    for n, depth in [(1, 10), (2, 5), (2, 7), (3, 4)]:
        spec = GridSpec(n, depth)
        costs = level_costs(spec, 0.5)
        f = np.round(rng.uniform(0, 8, spec.num_cells), 1)
        w = np.exp(rng.uniform(-1, 1, spec.num_cells)).round(2)
        sets = rng.random((256, spec.num_cells)) < 0.4
        args = (spec.fanout, spec.depth)
        yield f"dp_root      n={n} L={depth} x256", lambda k: k.dp_root(sets, costs, *args)
        yield f"layer_cake   n={n} L={depth}", lambda k: k.layer_cake_nodes(f, costs, *args)
        if spec.num_cells <= 4096:
            yield f"weighted     n={n} L={depth}", lambda k: k.weighted_layer_cake_nodes(f, w, costs, *args)
        if n == 2 and depth == 5:
            masks = family_masks(spec, CubeFamilyPolicy("shifted"))[:, spec.to_morton]
            yield f"masked       n={n} L={depth} x{masks.shape[0]}", lambda k: k.masked_layer_cake(f, masks, costs, *args)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        print("numba not installed; only the numpy backend is available")
        return
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':34s} {'numpy [s]':>11s} {'numba [s]':>11s} {'speedup':>8s}  max|diff|")
    for name, call in cases(rng):
        t_np = _time(lambda: call(_kernels.NUMPY), args.repeat)
        t_nb = _time(lambda: call(_kernels.NUMBA), args.repeat)
        diff = np.max(np.abs(np.asarray(call(_kernels.NUMPY)) - np.asarray(call(_kernels.NUMBA))))
        print(f"{name:34s} {t_np:11.4f} {t_nb:11.4f} {t_np / t_nb:8.1f}  {diff:.1e}")


if __name__ == "__main__":
    main()
