"""Dyadic grids, grid functions, cell sets and cube families.

Leaf cells are half-open boxes ``[a, b)`` indexed in row-major (C) order with
axis 0 varying slowest.  Internally the kernels use Morton order; the
permutation between the two lives on :class:`GridSpec`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Sequence, Union

import numpy as np

MAX_DIM = 3
MAX_DEPTH = 12


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x).limit_denominator(1 << 40)
    return Fraction(x)


@dataclass(frozen=True)
class GridSpec:
    """Uniform dyadic grid of ``2**(n*depth)`` leaf cells on a root cube."""

    n: int
    depth: int
    root_origin: tuple = None
    root_side: Fraction = Fraction(1)

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or not 1 <= self.n <= MAX_DIM:
            raise ValueError(f"dimension must be in 1..{MAX_DIM}, got {self.n}")
        if not isinstance(self.depth, (int, np.integer)) or not 0 <= self.depth <= MAX_DEPTH:
            raise ValueError(f"depth must be in 0..{MAX_DEPTH}, got {self.depth}")
        origin = self.root_origin
        if origin is None:
            origin = (0,) * self.n
        origin = tuple(_as_fraction(c) for c in origin)
        if len(origin) != self.n:
            raise ValueError("root_origin must have n coordinates")
        side = _as_fraction(self.root_side)
        if side <= 0:
            raise ValueError("root_side must be positive")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "depth", int(self.depth))
        object.__setattr__(self, "root_origin", origin)
        object.__setattr__(self, "root_side", side)

    @property
    def fanout(self) -> int:
        return 1 << self.n

    @property
    def cells_per_side(self) -> int:
        return 1 << self.depth

    @property
    def num_cells(self) -> int:
        return 1 << (self.n * self.depth)

    @property
    def shape(self) -> tuple:
        return (self.cells_per_side,) * self.n

    @property
    def leaf_side(self) -> Fraction:
        return self.root_side / self.cells_per_side

    @property
    def num_nodes(self) -> int:
        return (self.fanout ** (self.depth + 1) - 1) // (self.fanout - 1)

    def side(self, level: int) -> Fraction:
        return self.root_side / (1 << level)

    @cached_property
    def to_morton(self) -> np.ndarray:
        """Row-major index of the cell at each Morton position."""
        coords = np.indices(self.shape).reshape(self.n, -1)
        code = np.zeros(self.num_cells, dtype=np.int64)
        for bit in range(self.depth):
            for axis in range(self.n):
                b = (coords[axis] >> bit) & 1
                code |= b << (bit * self.n + (self.n - 1 - axis))
        perm = np.argsort(code, kind="stable")
        perm.flags.writeable = False
        return perm

    @cached_property
    def from_morton(self) -> np.ndarray:
        """Morton position of each row-major cell."""
        inv = np.empty(self.num_cells, dtype=np.int64)
        inv[self.to_morton] = np.arange(self.num_cells)
        inv.flags.writeable = False
        return inv

    def cell_centers(self) -> np.ndarray:
        """Centers of all leaf cells, shape (num_cells, n), row-major."""
        coords = np.indices(self.shape).reshape(self.n, -1).T.astype(float)
        h = float(self.leaf_side)
        origin = np.array([float(c) for c in self.root_origin])
        return origin + (coords + 0.5) * h

    def refine(self, extra: int = 1) -> "GridSpec":
        return GridSpec(self.n, self.depth + extra, self.root_origin, self.root_side)

    def check_same(self, other: "GridSpec") -> None:
        if self != other:
            raise ValueError(f"mismatched grids: {self} vs {other}")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Non-negative step function, one value per leaf cell (row-major)."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64).reshape(-1)
        if vals.size != self.spec.num_cells:
            raise ValueError(
                f"expected {self.spec.num_cells} values, got {vals.size}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        if np.any(vals < 0):
            raise ValueError("values must be non-negative")
        object.__setattr__(self, "values", _frozen(vals))

    @classmethod
    def constant(cls, spec: GridSpec, c: float = 1.0) -> "GridFunction":
        return cls(spec, np.full(spec.num_cells, float(c)))

    @cached_property
    def morton(self) -> np.ndarray:
        return _frozen(np.ascontiguousarray(self.values[self.spec.to_morton]))

    @classmethod
    def from_morton(cls, spec: GridSpec, values: np.ndarray) -> "GridFunction":
        return cls(spec, np.asarray(values)[spec.from_morton])

    @property
    def is_weight(self) -> bool:
        return bool(np.all(self.values > 0))

    def require_weight(self, name: str = "weight") -> "GridFunction":
        if not self.is_weight:
            raise ValueError(f"{name} must be strictly positive on every cell")
        return self

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.spec.shape)

    def restrict(self, E: "CellSet") -> "GridFunction":
        self.spec.check_same(E.spec)
        return GridFunction(self.spec, np.where(E.mask, self.values, 0.0))

    def _other(self, other):
        if isinstance(other, GridFunction):
            self.spec.check_same(other.spec)
            return other.values
        return float(other)

    def __add__(self, other):
        return GridFunction(self.spec, self.values + self._other(other))

    __radd__ = __add__

    def __mul__(self, other):
        return GridFunction(self.spec, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return GridFunction(self.spec, self.values / self._other(other))

    def __pow__(self, exponent: float):
        return GridFunction(self.spec, self.values ** float(exponent))

    def maximum(self, other) -> "GridFunction":
        return GridFunction(self.spec, np.maximum(self.values, self._other(other)))

    def allclose(self, other: "GridFunction", rtol=1e-12, atol=0.0) -> bool:
        self.spec.check_same(other.spec)
        return bool(np.allclose(self.values, other.values, rtol=rtol, atol=atol))


@dataclass(frozen=True, eq=False)
class CellSet:
    """Set of leaf cells, stored as a boolean membership mask (row-major)."""

    spec: GridSpec
    mask: np.ndarray

    def __post_init__(self):
        m = np.array(self.mask, dtype=bool).reshape(-1)
        if m.size != self.spec.num_cells:
            raise ValueError(f"expected {self.spec.num_cells} membership bits, got {m.size}")
        object.__setattr__(self, "mask", _frozen(m))

    @classmethod
    def empty(cls, spec: GridSpec) -> "CellSet":
        return cls(spec, np.zeros(spec.num_cells, dtype=bool))

    @classmethod
    def full(cls, spec: GridSpec) -> "CellSet":
        return cls(spec, np.ones(spec.num_cells, dtype=bool))

    @classmethod
    def from_indices(cls, spec: GridSpec, indices: Iterable[int]) -> "CellSet":
        m = np.zeros(spec.num_cells, dtype=bool)
        idx = np.asarray(list(indices), dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= spec.num_cells):
            raise ValueError("cell index out of range")
        m[idx] = True
        return cls(spec, m)

    @cached_property
    def morton(self) -> np.ndarray:
        return _frozen(np.ascontiguousarray(self.mask[self.spec.to_morton]))

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def __len__(self) -> int:
        return int(self.mask.sum())

    @property
    def is_empty(self) -> bool:
        return not self.mask.any()

    def _other(self, other: "CellSet") -> np.ndarray:
        self.spec.check_same(other.spec)
        return other.mask

    def __or__(self, other):
        return CellSet(self.spec, self.mask | self._other(other))

    def __and__(self, other):
        return CellSet(self.spec, self.mask & self._other(other))

    def __sub__(self, other):
        return CellSet(self.spec, self.mask & ~self._other(other))

    def __invert__(self):
        return CellSet(self.spec, ~self.mask)

    def __eq__(self, other):
        if not isinstance(other, CellSet):
            return NotImplemented
        return self.spec == other.spec and bool(np.array_equal(self.mask, other.mask))

    def __hash__(self):
        return hash((self.spec, self.mask.tobytes()))

    def issubset(self, other: "CellSet") -> bool:
        return not np.any(self.mask & ~self._other(other))

    def indicator(self, value: float = 1.0) -> GridFunction:
        return GridFunction(self.spec, np.where(self.mask, float(value), 0.0))


@dataclass(frozen=True, order=True)
class DyadicCube:
    """Node of the dyadic tree: ``level`` 0 is the root."""

    level: int
    coords: tuple

    def __post_init__(self):
        coords = tuple(int(c) for c in self.coords)
        if self.level < 0:
            raise ValueError("level must be >= 0")
        if any(c < 0 or c >= (1 << self.level) for c in coords):
            raise ValueError(f"coords {coords} out of range for level {self.level}")
        object.__setattr__(self, "level", int(self.level))
        object.__setattr__(self, "coords", coords)

    @classmethod
    def root(cls, n: int) -> "DyadicCube":
        return cls(0, (0,) * n)

    @property
    def n(self) -> int:
        return len(self.coords)

    def parent(self) -> "DyadicCube":
        if self.level == 0:
            raise ValueError("the root has no parent")
        return DyadicCube(self.level - 1, tuple(c >> 1 for c in self.coords))

    def ancestors(self):
        """Proper ancestors from the parent up to the root."""
        cube = self
        while cube.level > 0:
            cube = cube.parent()
            yield cube

    def children(self) -> list:
        return [
            DyadicCube(self.level + 1, tuple(2 * c + b for c, b in zip(self.coords, bits)))
            for bits in itertools.product((0, 1), repeat=self.n)
        ]

    def contains(self, other: "DyadicCube") -> bool:
        if other.level < self.level:
            return False
        shift = other.level - self.level
        return all((c >> shift) == s for c, s in zip(other.coords, self.coords))

    def overlaps(self, other: "DyadicCube") -> bool:
        return self.contains(other) or other.contains(self)

    def side(self, spec: GridSpec) -> Fraction:
        return spec.side(self.level)

    def to_grid_cube(self, spec: GridSpec) -> "GridCube":
        if self.level > spec.depth:
            raise ValueError("cube is finer than the grid")
        size = 1 << (spec.depth - self.level)
        return GridCube(tuple(c * size for c in self.coords), size)

    def morton_code(self) -> int:
        code = 0
        n = self.n
        for bit in range(self.level):
            for axis, c in enumerate(self.coords):
                code |= ((c >> bit) & 1) << (bit * n + (n - 1 - axis))
        return code

    def node_index(self, spec: GridSpec) -> int:
        """Position of this cube in a flat level-by-level node array."""
        offset = (spec.fanout**self.level - 1) // (spec.fanout - 1)
        return offset + self.morton_code()

    @classmethod
    def from_morton(cls, level: int, code: int, n: int) -> "DyadicCube":
        coords = [0] * n
        for bit in range(level):
            for axis in range(n):
                coords[axis] |= ((code >> (bit * n + (n - 1 - axis))) & 1) << bit
        return cls(level, tuple(coords))

    def to_json(self) -> dict:
        return {"level": self.level, "coords": list(self.coords)}


@dataclass(frozen=True, order=True)
class GridCube:
    """Axis-aligned cube with corner and side measured in leaf cells."""

    corner: tuple
    size: int

    def __post_init__(self):
        object.__setattr__(self, "corner", tuple(int(c) for c in self.corner))
        if self.size < 1:
            raise ValueError("cube size must be >= 1 leaf cell")

    def within(self, spec: GridSpec) -> bool:
        return len(self.corner) == spec.n and all(
            0 <= c and c + self.size <= spec.cells_per_side for c in self.corner
        )

    def as_dyadic(self, spec: GridSpec) -> DyadicCube | None:
        size = self.size
        if size & (size - 1) or any(c % size for c in self.corner):
            return None
        level = spec.depth - (size.bit_length() - 1)
        return DyadicCube(level, tuple(c // size for c in self.corner))

    def side(self, spec: GridSpec) -> Fraction:
        return spec.leaf_side * self.size

    def to_json(self) -> dict:
        return {"corner": list(self.corner), "size": self.size}


Cube = Union[DyadicCube, GridCube]


def _grid_cube(spec: GridSpec, cube: Cube) -> GridCube:
    gc = cube.to_grid_cube(spec) if isinstance(cube, DyadicCube) else cube
    if not gc.within(spec):
        raise ValueError(f"cube {cube} lies outside the root")
    return gc


def cells_in_cube(spec: GridSpec, cube: Cube) -> CellSet:
    """Leaf cells whose closure lies in ``cube``."""
    gc = _grid_cube(spec, cube)
    m = np.zeros(spec.shape, dtype=bool)
    m[tuple(slice(c, c + gc.size) for c in gc.corner)] = True
    return CellSet(spec, m)


@dataclass(frozen=True)
class CubeFamilyPolicy:
    """Which cubes the suprema range over.

    ``kind`` is ``"dyadic"``, ``"shifted"`` (dyadic cubes plus translates by
    ``j/translates`` of their side, snapped to the leaf grid) or ``"all"``
    (every grid-aligned cube).  When a family is larger than ``max_cubes`` the
    dyadic cubes are always kept and the rest is subsampled with ``seed``.
    """

    kind: str = "dyadic"
    max_cubes: int = 200_000
    translates: int = 2
    seed: int = 0

    def __post_init__(self):
        aliases = {"dyadic-only": "dyadic", "shifted-dyadic": "shifted", "all-grid-cubes": "all"}
        kind = aliases.get(self.kind, self.kind)
        if kind not in ("dyadic", "shifted", "all"):
            raise ValueError(f"unknown cube family {self.kind!r}")
        if self.translates not in (2, 3):
            raise ValueError("translates must be 2 or 3")
        if self.max_cubes < 1:
            raise ValueError("max_cubes must be positive")
        object.__setattr__(self, "kind", kind)

    def validate(self, spec: GridSpec) -> None:
        if self.kind == "all" and spec.n == 3 and spec.depth > 5:
            raise ValueError("all-grid-cubes family refused for n=3 with depth > 5")


def dyadic_cubes(spec: GridSpec) -> list:
    """All tree nodes, root first, then level by level in row-major order."""
    out = []
    for lvl in range(spec.depth + 1):
        for coords in itertools.product(range(1 << lvl), repeat=spec.n):
            out.append(DyadicCube(lvl, coords))
    return out


def _shifted_cubes(spec: GridSpec, translates: int) -> list:
    seen = set()
    out = []
    per_side = spec.cells_per_side
    for lvl in range(spec.depth + 1):
        size = per_side >> lvl
        offsets = sorted({(size * j) // translates for j in range(translates)})
        for off in itertools.product(offsets, repeat=spec.n):
            for base in itertools.product(range(1 << lvl), repeat=spec.n):
                corner = tuple(b * size + o for b, o in zip(base, off))
                gc = GridCube(corner, size)
                if gc.within(spec) and gc not in seen:
                    seen.add(gc)
                    out.append(gc)
    return out


def _all_cubes(spec: GridSpec) -> list:
    out = []
    per_side = spec.cells_per_side
    for size in range(per_side, 0, -1):
        for corner in itertools.product(range(per_side - size + 1), repeat=spec.n):
            out.append(GridCube(corner, size))
    return out


def _family_size(spec: GridSpec, policy: CubeFamilyPolicy) -> int:
    if policy.kind == "all":
        return sum((spec.cells_per_side - s + 1) ** spec.n for s in range(1, spec.cells_per_side + 1))
    return 0


@lru_cache(maxsize=64)
def _enumerate_cached(spec: GridSpec, policy: CubeFamilyPolicy) -> tuple:
    policy.validate(spec)
    if policy.kind == "dyadic":
        cubes = dyadic_cubes(spec)
        if len(cubes) > policy.max_cubes:
            raise ValueError("dyadic family alone exceeds max_cubes")
        return tuple(cubes)
    if policy.kind == "all" and _family_size(spec, policy) > 5 * policy.max_cubes:
        raise ValueError("all-grid-cubes family too large for max_cubes; lower depth")
    rest = _shifted_cubes(spec, policy.translates) if policy.kind == "shifted" else _all_cubes(spec)
    dyadic = [c.to_grid_cube(spec) for c in dyadic_cubes(spec)]
    dset = set(dyadic)
    others = [c for c in rest if c not in dset]
    if len(dyadic) > policy.max_cubes:
        raise ValueError("dyadic family alone exceeds max_cubes")
    room = policy.max_cubes - len(dyadic)
    if len(others) > room:
        rng = np.random.default_rng(policy.seed)
        keep = np.sort(rng.choice(len(others), size=room, replace=False))
        others = [others[i] for i in keep]
    return tuple(dyadic + others)


def enumerate_cubes(spec: GridSpec, policy: CubeFamilyPolicy | None = None) -> list:
    """Deterministically ordered cube family.

    The dyadic family is returned as :class:`DyadicCube` nodes (root first);
    the other families as :class:`GridCube` descriptors, dyadic ones first.
    """
    return list(_enumerate_cached(spec, policy or CubeFamilyPolicy()))


@lru_cache(maxsize=32)
def _family_masks_cached(spec: GridSpec, policy: CubeFamilyPolicy) -> np.ndarray:
    cubes = _enumerate_cached(spec, policy)
    out = np.zeros((len(cubes), spec.num_cells), dtype=bool)
    grid = np.arange(spec.num_cells).reshape(spec.shape)
    for i, cube in enumerate(cubes):
        gc = _grid_cube(spec, cube)
        rows = grid[tuple(slice(c, c + gc.size) for c in gc.corner)].reshape(-1)
        out[i, spec.from_morton[rows]] = True
    return _frozen(out)


def family_masks(spec: GridSpec, policy: CubeFamilyPolicy) -> np.ndarray:
    """Boolean (cubes, cells) membership matrix in Morton order."""
    return _family_masks_cached(spec, policy)


def cube_mask_morton(spec: GridSpec, cube: Cube) -> np.ndarray:
    return cells_in_cube(spec, cube).morton


def nodes_of_level(spec: GridSpec, level: int) -> slice:
    f = spec.fanout
    lo = (f**level - 1) // (f - 1)
    return slice(lo, lo + f**level)


def node_to_cube(spec: GridSpec, index: int) -> DyadicCube:
    f = spec.fanout
    level = 0
    while (f ** (level + 1) - 1) // (f - 1) <= index:
        level += 1
    code = index - (f**level - 1) // (f - 1)
    return DyadicCube.from_morton(level, code, spec.n)


def leaf_max_over_ancestors(spec: GridSpec, node_values: np.ndarray) -> np.ndarray:
    """For each leaf (Morton order), the max of ``node_values`` over its ancestors."""
    cur = node_values[nodes_of_level(spec, 0)]
    for lvl in range(1, spec.depth + 1):
        cur = np.maximum(np.repeat(cur, spec.fanout), node_values[nodes_of_level(spec, lvl)])
    return cur


def node_level_array(spec: GridSpec) -> np.ndarray:
    """Level of each entry in a flat node array."""
    return np.concatenate(
        [np.full(spec.fanout**lvl, lvl, dtype=np.int64) for lvl in range(spec.depth + 1)]
    )


def check_non_overlapping(cubes: Sequence[DyadicCube]) -> None:
    ordered = sorted(cubes, key=lambda c: c.level)
    seen = set()
    for cube in ordered:
        if cube in seen or any(a in seen for a in cube.ancestors()):
            raise ValueError(f"overlapping dyadic cubes at {cube}")
        seen.add(cube)
