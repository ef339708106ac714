"""Standard inputs: power weights, the counterexample pairs, random step data."""

from __future__ import annotations

import math

import numpy as np

from .dyadic import CellSet, DyadicCube, GridFunction, GridSpec, dyadic_cubes
from .weights import power_weight

__all__ = [
    "power_weight",
    "log2_exact",
    "counterexample1_pair",
    "counterexample3_pair",
    "slab_sets",
    "random_step_function",
    "random_weight",
    "random_two_level_weight",
    "random_cell_set",
    "random_antichain",
]


def log2_exact(m: int, what: str = "m") -> int:
    if not isinstance(m, (int, np.integer)) or m < 1 or m & (m - 1):
        raise ValueError(f"{what} must be a power of two, got {m}")
    return int(m).bit_length() - 1


def counterexample1_pair(m: int, n: int, depth: int | None = None):
    """``f = 2^(k-1)`` and ``w = 2^-(k-1)`` on the k-th of the ``m^n`` subcubes.

    Subcubes are enumerated in row-major order on the unit root.  The grid
    depth defaults to ``log2 m`` (one cell per subcube).
    """
    j = log2_exact(m)
    depth = j if depth is None else depth
    if depth < j:
        raise ValueError("grid too coarse for m")
    spec = GridSpec(n, depth)
    coarse = np.arange(m**n).reshape((m,) * n)
    rep = 1 << (depth - j)
    k = coarse
    for axis in range(n):
        k = np.repeat(k, rep, axis=axis)
    k = k.reshape(-1).astype(float)
    return GridFunction(spec, 2.0**k), GridFunction(spec, 2.0 ** (-k))


def slab_sets(n: int, levels: int, depth: int) -> list:
    """Slabs ``[0,1)^(n-1) x [1 - 2^-(k-1), 1 - 2^-k)`` for ``k = 1..levels``."""
    if levels > depth:
        raise ValueError("slab thickness not resolvable at this depth")
    spec = GridSpec(n, depth)
    side = spec.cells_per_side
    out = []
    for k in range(1, levels + 1):
        lo = side - (side >> (k - 1))
        hi = side - (side >> k)
        grid = np.zeros(spec.shape, dtype=bool)
        grid[(slice(None),) * (n - 1) + (slice(lo, hi),)] = True
        out.append(CellSet(spec, grid))
    return out


def counterexample3_pair(n: int, levels: int, depth: int):
    """``w = 2^-k``, ``f = 2^k`` on the k-th slab; the top strip continues the pattern.

    The strip above the last resolved slab gets ``k = levels + 1`` so that
    ``f * w = 1`` on the whole root.
    """
    if n < 2:
        raise ValueError("slab construction needs n >= 2")
    spec = GridSpec(n, depth)
    k = np.full(spec.shape, levels + 1, dtype=float)
    for i, S in enumerate(slab_sets(n, levels, depth), start=1):
        k[S.mask.reshape(spec.shape)] = i
    k = k.reshape(-1)
    return GridFunction(spec, 2.0**k), GridFunction(spec, 2.0 ** (-k))


def random_step_function(spec: GridSpec, rng, levels: int | None = None, zero_fraction: float = 0.0,
                         low: float = 0.0, high: float = 4.0) -> GridFunction:
    """Random non-negative values, constant on dyadic cubes of a random coarse level."""
    levels = spec.depth if levels is None else min(levels, spec.depth)
    coarse = GridSpec(spec.n, levels, spec.root_origin, spec.root_side)
    vals = rng.uniform(low, high, size=coarse.num_cells)
    if zero_fraction > 0:
        vals[rng.random(coarse.num_cells) < zero_fraction] = 0.0
    return refine(GridFunction(coarse, vals), spec.depth - levels)


def random_weight(spec: GridSpec, rng, spread: float = 8.0, levels: int | None = None) -> GridFunction:
    """Positive weight with log-uniform values in ``[1/spread, spread]``."""
    levels = spec.depth if levels is None else min(levels, spec.depth)
    coarse = GridSpec(spec.n, levels, spec.root_origin, spec.root_side)
    logs = rng.uniform(-math.log(spread), math.log(spread), size=coarse.num_cells)
    return refine(GridFunction(coarse, np.exp(logs)), spec.depth - levels)


def random_two_level_weight(spec: GridSpec, rng, coarse_depth: int = 2, ratio: float | None = None) -> GridFunction:
    """Weight taking two values, constant on cells of depth ``coarse_depth``."""
    coarse = GridSpec(spec.n, min(coarse_depth, spec.depth), spec.root_origin, spec.root_side)
    hi = rng.uniform(1.5, 6.0) if ratio is None else ratio
    pick = rng.random(coarse.num_cells) < 0.5
    if not pick.any() or pick.all():
        pick[0] = not pick[0]
    return refine(GridFunction(coarse, np.where(pick, hi, 1.0)), spec.depth - coarse.depth)


def refine(f: GridFunction, extra: int) -> GridFunction:
    """Same step function on a grid ``extra`` levels finer."""
    arr = f.as_array()
    rep = 1 << extra
    for axis in range(f.spec.n):
        arr = np.repeat(arr, rep, axis=axis)
    return GridFunction(f.spec.refine(extra), arr)


def random_cell_set(spec: GridSpec, rng, density: float | None = None, nonempty: bool = True) -> CellSet:
    density = rng.uniform(0.05, 0.9) if density is None else density
    m = rng.random(spec.num_cells) < density
    if nonempty and not m.any():
        m[rng.integers(spec.num_cells)] = True
    return CellSet(spec, m)


def random_antichain(spec: GridSpec, rng, stop: float = 0.45, keep: float = 0.7) -> list:
    """Random non-overlapping dyadic cubes: split top-down, keep some stopped cubes."""
    out = []
    stack = [DyadicCube.root(spec.n)]
    while stack:
        cube = stack.pop()
        if cube.level == spec.depth or (cube.level > 0 and rng.random() < stop):
            if rng.random() < keep:
                out.append(cube)
            continue
        stack.extend(cube.children())
    if not out:
        out.append(DyadicCube(spec.depth, (0,) * spec.n))
    order = rng.permutation(len(out))
    return [out[i] for i in order]
