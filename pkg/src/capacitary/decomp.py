"""Stopping-time decompositions, sparse covers and packing selections."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .choquet import Capacity, level_slices
from .content import ContentParams, dyadic_content, dyadic_content_many, level_costs, optimal_cover
from .dyadic import (
    CellSet,
    DyadicCube,
    GridFunction,
    GridSpec,
    cells_in_cube,
    check_non_overlapping,
    dyadic_cubes,
)

__all__ = [
    "Decomposition",
    "cz_decompose",
    "sparse_cover",
    "sparse_cover_violations",
    "packed_subfamily",
    "PackingReport",
    "packing_report",
    "level_set_cover",
    "linearity_ratio",
    "maximal_cubes",
]


@dataclass(frozen=True)
class Decomposition:
    selected: tuple
    residual: CellSet
    diagnostics: dict = field(default_factory=dict)

    def covered(self) -> CellSet:
        out = CellSet.empty(self.residual.spec)
        for cube in self.selected:
            out = out | cells_in_cube(self.residual.spec, cube)
        return out

    def to_json(self) -> dict:
        return {
            "selected": [c.to_json() for c in self.selected],
            "residual": [int(i) for i in self.residual.indices],
            "diagnostics": self.diagnostics,
        }


def maximal_cubes(cubes: Sequence[DyadicCube]) -> list:
    """Drop every cube contained in another one of the list."""
    uniq = sorted(set(cubes), key=lambda c: (c.level, c.coords))
    keep = set()
    for cube in uniq:
        if not any(a in keep for a in cube.ancestors()):
            keep.add(cube)
    return sorted(keep, key=lambda c: (c.level, c.coords))


def cz_decompose(w: GridFunction, Q: DyadicCube, lam: float, delta: float) -> Decomposition:
    """Stopping time on content averages of ``w`` below the cube ``Q``.

    Children of a cube whose average exceeds ``lam`` are selected;
    the others are subdivided down to leaf level, where they become residual.

    Examples
    --------
    >>> from capacitary.dyadic import GridSpec, GridFunction, DyadicCube
    >>> w = GridFunction(GridSpec(1, 1), [2.0, 0.5])
    >>> d = cz_decompose(w, DyadicCube.root(1), 1.5, 1.0)
    >>> d.selected, d.residual.indices.tolist()
    ((DyadicCube(level=1, coords=(0,)),), [1])
    """
    spec = w.spec
    w.require_weight()
    if Q.level > spec.depth:
        raise ValueError("cube finer than the grid")
    cap = Capacity(delta)
    avg = cap.integrals_on_nodes(w) / cap.nodes(spec)
    top = avg[Q.node_index(spec)]
    if not lam > top:
        raise ValueError(f"lambda={lam} must exceed the average {top} over Q")
    selected, averages = [], {}
    residual = np.zeros(spec.num_cells, dtype=bool)
    stack = [Q]
    while stack:
        cube = stack.pop()
        if cube.level == spec.depth:
            residual |= cells_in_cube(spec, cube).mask
            continue
        for child in cube.children():
            a = avg[child.node_index(spec)]
            if a > lam:
                selected.append(child)
                averages[str(child.to_json())] = float(a)
            else:
                stack.append(child)
    selected.sort()
    diag = {"lambda": float(lam), "average_Q": float(top), "upper": float(2.0**delta * lam),
            "averages": [averages[str(c.to_json())] for c in selected]}
    return Decomposition(tuple(selected), CellSet(spec, residual), diag)


def sparse_cover(E: CellSet, delta: float) -> Decomposition:
    """Cover ``E`` by dyadic cubes each holding a third of its content in ``E``.

    Start from an optimal cover of ``E``; keep cubes ``P`` with
    ``H(P) <= 3 H(P & E)``, drop cubes missing ``E``, and replace the rest by
    an optimal cover of ``P & E``.  Those are strictly smaller cubes, so the
    loop ends at leaf level at the latest.
    """
    spec = E.spec
    params = ContentParams(spec.n, delta)
    if E.is_empty:
        return Decomposition((), CellSet.empty(spec), {"content_E": 0.0, "rounds": 0})
    kept, discarded, rounds = [], 0, 0
    pending = optimal_cover(E, params)
    while pending:
        rounds += 1
        nxt = []
        for P in pending:
            cells = cells_in_cube(spec, P)
            inside = cells & E
            if inside.is_empty:
                discarded += 1
                continue
            hp = dyadic_content(cells, params)
            hin = dyadic_content(inside, params)
            if hp <= 3.0 * hin:
                kept.append(P)
            else:
                nxt.extend(optimal_cover(inside, params))
        pending = nxt
    cubes = maximal_cubes(kept)
    total = sum(dyadic_content(cells_in_cube(spec, c), params) for c in cubes)
    hE = dyadic_content(E, params)
    densities = [
        dyadic_content(cells_in_cube(spec, c), params) / dyadic_content(cells_in_cube(spec, c) & E, params)
        for c in cubes
    ]
    covered = CellSet.empty(spec)
    for c in cubes:
        covered = covered | cells_in_cube(spec, c)
    diag = {"content_E": hE, "total_content": total, "ratio": total / hE,
            "max_density_ratio": max(densities), "rounds": rounds, "discarded": discarded}
    return Decomposition(tuple(cubes), E - covered, diag)


def sparse_cover_violations(E: CellSet, delta: float, decomp: Decomposition, rtol: float = 1e-12) -> list:
    """Human-readable list of failed sparse-cover bounds (empty when all hold)."""
    out = []
    d = decomp.diagnostics
    if d["total_content"] > 2.0 * d["content_E"] * (1 + rtol):
        out.append(f"total {d['total_content']} > 2 H(E) = {2 * d['content_E']}")
    if decomp.selected and d["max_density_ratio"] > 3.0 * (1 + rtol):
        out.append(f"density ratio {d['max_density_ratio']} > 3")
    if not decomp.residual.is_empty or not E.issubset(decomp.covered()):
        out.append("E not covered")
    return out


def _weighted_node_content(w: GridFunction, delta: float) -> np.ndarray:
    return Capacity(delta).integrals_on_nodes(w)


def packed_subfamily(cubes: Sequence[DyadicCube], w: GridFunction, delta: float, constant: float = 2.0) -> list:
    """Greedy selection in input order under the packing budget.

    A cube is admitted when, for itself and each dyadic ancestor ``Q``, the
    weighted content already admitted inside ``Q`` plus its own stays within
    ``constant * w_H(Q)``.  Returns the admitted input indices.
    """
    check_non_overlapping(cubes)
    spec = w.spec
    mass = _weighted_node_content(w, delta)
    admitted_mass = {}
    picked = []
    for i, cube in enumerate(cubes):
        own = mass[cube.node_index(spec)]
        chain = [cube, *cube.ancestors()]
        ok = all(
            admitted_mass.get(Q, 0.0) + own <= constant * mass[Q.node_index(spec)] for Q in chain
        )
        if ok:
            picked.append(i)
            for Q in chain:
                admitted_mass[Q] = admitted_mass.get(Q, 0.0) + own
    return picked


@dataclass(frozen=True)
class PackingReport:
    admitted: tuple
    packing_ratio: float
    union_content: float
    admitted_content: float

    @property
    def covering_ratio(self) -> float:
        return self.union_content / self.admitted_content if self.admitted_content else float("inf")

    def to_json(self) -> dict:
        return {"admitted": list(self.admitted), "packing_ratio": self.packing_ratio,
                "union_content": self.union_content, "admitted_content": self.admitted_content,
                "covering_ratio": self.covering_ratio}


def packing_report(cubes: Sequence[DyadicCube], w: GridFunction, delta: float, admitted: Sequence[int]) -> PackingReport:
    """Exhaustive post-hoc check over every dyadic cube of the grid.

    ``packing_ratio`` is the largest ``sum_{admitted in Q} w_H / w_H(Q)``;
    the union content is ``w_H`` of all input cubes together.
    """
    spec = w.spec
    mass = _weighted_node_content(w, delta)
    chosen = [cubes[i] for i in admitted]
    worst = 0.0
    inside = {}
    for c in chosen:
        own = mass[c.node_index(spec)]
        for Q in [c, *c.ancestors()]:
            inside[Q] = inside.get(Q, 0.0) + own
    for Q in dyadic_cubes(spec):
        m = mass[Q.node_index(spec)]
        worst = max(worst, inside.get(Q, 0.0) / m)
    union = CellSet.empty(spec)
    for c in cubes:
        union = union | cells_in_cube(spec, c)
    from .choquet import choquet_integral

    union_content = choquet_integral(w, union, Capacity(delta))
    adm = float(sum(mass[c.node_index(spec)] for c in chosen))
    return PackingReport(tuple(admitted), float(worst), float(union_content), adm)


def level_set_cover(E: CellSet, w: GridFunction, delta: float, p: float = 1.0) -> Decomposition:
    """Sparse-cover each level set ``{2^(k-1) < w <= 2^k} & E`` and merge.

    The merged family is reduced to its maximal cubes so that it is
    non-overlapping.  ``p`` is recorded only.
    """
    from .choquet import choquet_integral

    spec = E.spec
    w.require_weight()
    cubes = []
    per_level = {}
    for k, Ek in level_slices(w).items():
        part = Ek & E
        if part.is_empty:
            continue
        dec = sparse_cover(part, delta)
        per_level[k] = len(dec.selected)
        cubes.extend(dec.selected)
    merged = maximal_cubes(cubes)
    cap = Capacity(delta)
    total = sum(choquet_integral(w, cells_in_cube(spec, c), cap) for c in merged)
    base = choquet_integral(w, E, cap)
    covered = CellSet.empty(spec)
    for c in merged:
        covered = covered | cells_in_cube(spec, c)
    diag = {"p": float(p), "levels": per_level, "sum_cubes": float(total),
            "integral_E": float(base), "ratio": float(total / base) if base else 0.0}
    return Decomposition(tuple(merged), E - covered, diag)


def linearity_ratio(cubes: Sequence[DyadicCube], f: GridFunction, w: GridFunction, delta: float) -> dict:
    """``sum_j int_{Q_j} f w / int_{union Q_j} f w`` and the packing constant of the family."""
    from .choquet import choquet_integral

    check_non_overlapping(cubes)
    spec = w.spec
    fw = f * w
    cap = Capacity(delta)
    parts = sum(choquet_integral(fw, cells_in_cube(spec, c), cap) for c in cubes)
    union = CellSet.empty(spec)
    for c in cubes:
        union = union | cells_in_cube(spec, c)
    whole = choquet_integral(fw, union, cap)
    beta = packing_report(cubes, w, delta, range(len(cubes))).packing_ratio
    return {"ratio": parts / whole if whole else 0.0, "packing_beta": beta,
            "sum_parts": parts, "union_integral": whole}
