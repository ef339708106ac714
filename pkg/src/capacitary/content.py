"""Dyadic Hausdorff content of cell sets.

The content of ``E`` is the cheapest cover of ``E`` by dyadic cubes inside the
root, each cube of side ``s`` costing ``s**delta``.  On the tree this is the
recursion ``value(Q) = min(side(Q)**delta, sum of children values)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from . import _kernels
from .dyadic import CellSet, DyadicCube, GridSpec, cells_in_cube

__all__ = [
    "ContentParams",
    "level_costs",
    "cube_content",
    "dyadic_content",
    "dyadic_content_many",
    "optimal_cover",
    "brute_force_content",
    "slab_content_diagnostic",
    "equivalence_diagnostic",
]


@dataclass(frozen=True)
class ContentParams:
    """Dimension ``n`` and content exponent ``0 < delta <= n``."""

    n: int
    delta: float

    def __post_init__(self):
        if not 1 <= int(self.n) <= 3:
            raise ValueError("n must be 1, 2 or 3")
        d = float(self.delta)
        if not (0.0 < d <= self.n) or not math.isfinite(d):
            raise ValueError(f"delta must lie in (0, n], got {self.delta}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "delta", d)

    def check_grid(self, spec: GridSpec) -> None:
        if spec.n != self.n:
            raise ValueError(f"mismatched grids: content of dimension {self.n} on a {spec.n}-d grid")


def cube_content(side: float, delta: float) -> float:
    """Content ``side**delta`` of a single cube."""
    return float(side) ** float(delta)


def level_costs(spec: GridSpec, delta: float) -> np.ndarray:
    """Content of one dyadic cube at each level 0..depth."""
    return np.array(
        [cube_content(spec.side(lvl), delta) for lvl in range(spec.depth + 1)],
        dtype=np.float64,
    )


def _params_for(E: CellSet, params) -> ContentParams:
    if not isinstance(params, ContentParams):
        params = ContentParams(E.spec.n, params)
    params.check_grid(E.spec)
    return params


def dyadic_content(E: CellSet, params, trace: bool = False, backend=None):
    """Exact dyadic content of ``E``.

    Parameters
    ----------
    E : CellSet
    params : ContentParams or float
        A bare float is read as ``delta`` on the grid's dimension.
    trace : bool
        When true, also return the optimal cover as a list of
        :class:`DyadicCube` (ties go to the children).

    Examples
    --------
    >>> from capacitary.dyadic import GridSpec, CellSet
    >>> spec = GridSpec(1, 1)
    >>> round(dyadic_content(CellSet.full(spec), 0.5), 12)
    1.0
    """
    params = _params_for(E, params)
    if not trace:
        return float(dyadic_content_many(E.spec, E.morton[None, :], params.delta, backend)[0])
    cover = optimal_cover(E, params, backend)
    value = float(dyadic_content_many(E.spec, E.morton[None, :], params.delta, backend)[0])
    return value, cover


def dyadic_content_many(spec: GridSpec, masks_morton, delta: float, backend=None) -> np.ndarray:
    """Content of every row of a (k, cells) boolean array in Morton order."""
    kern = _kernels.get_backend(backend)
    costs = level_costs(spec, delta)
    return kern.dp_root(np.asarray(masks_morton, dtype=bool), costs, spec.fanout, spec.depth)


def optimal_cover(E: CellSet, params, backend=None) -> list:
    """Optimal dyadic cover of ``E`` recovered from the DP table."""
    params = _params_for(E, params)
    spec = E.spec
    kern = _kernels.get_backend(backend)
    costs = level_costs(spec, params.delta)
    nodes = kern.dp_nodes(E.morton[None, :], costs, spec.fanout, spec.depth)[0]
    offsets = _kernels.level_offsets(spec.fanout, spec.depth)
    f = spec.fanout
    cover = []
    stack = [(0, 0)]
    while stack:
        lvl, code = stack.pop()
        value = nodes[offsets[lvl] + code]
        if value == 0.0:
            continue
        if lvl == spec.depth:
            cover.append(DyadicCube.from_morton(lvl, code, spec.n))
            continue
        first = offsets[lvl + 1] + code * f
        child_sum = nodes[first : first + f].sum()
        if child_sum <= costs[lvl] * (1.0 + _kernels.TIE_RTOL):
            stack.extend((lvl + 1, code * f + b) for b in range(f - 1, -1, -1))
        else:
            cover.append(DyadicCube.from_morton(lvl, code, spec.n))
    return cover


def brute_force_content(E: CellSet, params, max_covers: int = 1 << 17) -> float:
    """Content of ``E`` by listing every cover by cubes that meet ``E``.

    Independent of the DP: works on row-major masks, walks the geometric
    tree, and keeps the full array of cover costs at every node, taking the
    minimum only at the root.  Raises ``ValueError`` when some node would
    hold more than ``max_covers`` covers.
    """
    params = _params_for(E, params)
    spec = E.spec
    grid = E.mask.reshape(spec.shape)
    delta = params.delta

    def covers(cube: DyadicCube) -> np.ndarray:
        size = spec.cells_per_side >> cube.level
        block = grid[tuple(slice(c * size, (c + 1) * size) for c in cube.coords)]
        if not block.any():
            return np.zeros(1)
        own = float(spec.side(cube.level)) ** delta
        if cube.level == spec.depth:
            return np.array([own])
        parts = [covers(child) for child in cube.children()]
        count = math.prod(p.size for p in parts)
        if count + 1 > max_covers:
            raise ValueError(f"brute force bound exceeded: {count + 1} covers > {max_covers}")
        combined = reduce(np.add.outer, parts).reshape(-1)
        return np.concatenate(([own], combined))

    return float(covers(DyadicCube.root(spec.n)).min())


def slab_content_diagnostic(params: ContentParams, base_dim: int, thickness: float, depth: int | None = None) -> float:
    """Content of the slab ``[0,1)^k x [0,t)^(n-k)`` on the unit root.

    ``thickness`` must be ``2**-j`` with ``j <= depth`` (default ``depth = j``).
    """
    if not isinstance(params, ContentParams):
        raise TypeError("params must be ContentParams")
    n = params.n
    if not 0 <= base_dim < n:
        raise ValueError("base dimension must satisfy 0 <= k < n")
    t = float(thickness)
    j = -math.log2(t) if t > 0 else float("nan")
    if not (t > 0 and abs(j - round(j)) < 1e-12 and round(j) >= 0):
        raise ValueError(f"thickness {thickness} is not a dyadic 2**-j")
    j = int(round(j))
    depth = j if depth is None else int(depth)
    if j > depth:
        raise ValueError("thickness not resolvable at this depth")
    spec = GridSpec(n, depth)
    thin = spec.cells_per_side >> j
    grid = np.zeros(spec.shape, dtype=bool)
    grid[(slice(None),) * base_dim + (slice(0, thin),) * (n - base_dim)] = True
    return dyadic_content(CellSet(spec, grid), params)


def equivalence_diagnostic(E: CellSet, params) -> dict:
    """Compare the dyadic content with bounds on the cube-cover content.

    The lower bound ``|E|**(delta/n)`` holds for every cover by cubes; the
    upper bound is the cheaper of the dyadic value and the bounding cube.
    The ratios are empirical; no equivalence constant is assumed.
    """
    params = _params_for(E, params)
    spec = E.spec
    dyadic = dyadic_content(E, params)
    if E.is_empty:
        return {"dyadic": 0.0, "lower_bound": 0.0, "upper_bound": 0.0, "ratio_to_lower": 1.0}
    volume = len(E) * float(spec.leaf_side) ** spec.n
    lower = volume ** (params.delta / spec.n)
    coords = np.array(np.unravel_index(E.indices, spec.shape))
    span = int((coords.max(axis=1) - coords.min(axis=1)).max()) + 1
    upper = min(dyadic, cube_content(float(spec.leaf_side) * span, params.delta))
    return {
        "dyadic": dyadic,
        "lower_bound": lower,
        "upper_bound": upper,
        "ratio_to_lower": dyadic / lower,
        "ratio_to_upper": dyadic / upper,
    }


def content_of_cube(spec: GridSpec, cube, params) -> float:
    return dyadic_content(cells_in_cube(spec, cube), params)
