"""Capacitary and Lebesgue maximal operators over a cube family."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .choquet import Capacity
from .dyadic import (
    CubeFamilyPolicy,
    GridFunction,
    GridSpec,
    family_masks,
    leaf_max_over_ancestors,
    nodes_of_level,
)

__all__ = [
    "MaximalConfig",
    "family_averages",
    "maximal",
    "capacitary_maximal",
    "lebesgue_maximal",
    "compare_embedding",
    "EmbeddingReport",
    "weak_type_ratio",
]


@dataclass(frozen=True)
class MaximalConfig:
    """Capacity used for the averages and the cube family for the supremum."""

    capacity: Capacity
    family: CubeFamilyPolicy = field(default_factory=CubeFamilyPolicy)


def _denominators(cfg: MaximalConfig, spec: GridSpec, masks=None) -> np.ndarray:
    if masks is None:
        den = cfg.capacity.nodes(spec)
    else:
        den = cfg.capacity.many(spec, masks)
    if np.any(den <= 0):
        raise ValueError("cube family contains a cube of zero capacity")
    return den


def family_averages(f: GridFunction, cfg: MaximalConfig) -> np.ndarray:
    """``int_Q f dC / C(Q)`` for each cube of the family.

    The order is that of :func:`capacitary.dyadic.enumerate_cubes` except
    for the dyadic family, which uses flat node order (Morton within level).
    """
    spec = f.spec
    cfg.family.validate(spec)
    if cfg.family.kind == "dyadic":
        return cfg.capacity.integrals_on_nodes(f) / _denominators(cfg, spec)
    masks = family_masks(spec, cfg.family)
    return cfg.capacity.integrals_on_masks(f, masks) / _denominators(cfg, spec, masks)


def _scatter_max(spec: GridSpec, cfg_family: CubeFamilyPolicy, averages: np.ndarray) -> np.ndarray:
    if cfg_family.kind == "dyadic":
        return leaf_max_over_ancestors(spec, averages)
    masks = family_masks(spec, cfg_family)
    return np.where(masks, averages[:, None], -np.inf).max(axis=0)


def maximal(f: GridFunction, cfg: MaximalConfig) -> GridFunction:
    """Per cell, the largest family average over cubes containing the cell.

    Examples
    --------
    >>> from capacitary.dyadic import GridSpec, GridFunction
    >>> f = GridFunction(GridSpec(1, 1), [1.0, 0.0])
    >>> maximal(f, MaximalConfig(Capacity(0.5))).values.round(5)
    array([1.     , 0.70711])
    """
    avg = family_averages(f, cfg)
    out = _scatter_max(f.spec, cfg.family, avg)
    if not np.all(np.isfinite(out)):
        raise ValueError("some cell is not covered by the cube family")
    return GridFunction.from_morton(f.spec, np.maximum(out, 0.0))


def capacitary_maximal(f: GridFunction, delta: float, family=None, weight: GridFunction | None = None,
                       backend: str | None = None) -> GridFunction:
    fam = family if isinstance(family, CubeFamilyPolicy) else CubeFamilyPolicy(family or "dyadic")
    return maximal(f, MaximalConfig(Capacity(delta, weight=weight, backend=backend), fam))


def lebesgue_maximal(f: GridFunction, family=None) -> GridFunction:
    """Maximal function with plain volume averages."""
    fam = family if isinstance(family, CubeFamilyPolicy) else CubeFamilyPolicy(family or "dyadic")
    spec = f.spec
    fam.validate(spec)
    vals = f.morton
    if fam.kind == "dyadic":
        avg = np.empty(spec.num_nodes)
        for lvl in range(spec.depth + 1):
            avg[nodes_of_level(spec, lvl)] = vals.reshape(spec.fanout**lvl, -1).mean(axis=1)
    else:
        masks = family_masks(spec, fam)
        avg = (masks @ vals) / masks.sum(axis=1)
    out = _scatter_max(spec, fam, avg)
    return GridFunction.from_morton(spec, np.maximum(out, 0.0))


@dataclass(frozen=True)
class EmbeddingReport:
    """Pointwise ``[M(f^(n/delta))]^(delta/n) <= (n/delta)^(delta/n) M_H f``."""

    lhs: np.ndarray
    rhs: np.ndarray
    max_ratio: float
    violations: int

    @property
    def holds(self) -> bool:
        return self.violations == 0

    def to_json(self) -> dict:
        return {"max_ratio": self.max_ratio, "violations": self.violations, "holds": self.holds}


def compare_embedding(f: GridFunction, delta: float, family=None, rtol: float = 1e-12) -> EmbeddingReport:
    n = f.spec.n
    lhs = lebesgue_maximal(f ** (n / delta), family).values ** (delta / n)
    rhs = (n / delta) ** (delta / n) * capacitary_maximal(f, delta, family).values
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, np.inf, 0.0))
    bad = int(np.sum(lhs > rhs * (1 + rtol)))
    return EmbeddingReport(lhs, rhs, float(ratio.max()), bad)


def weak_type_ratio(f: GridFunction, w: GridFunction, delta: float, family=None) -> float:
    """``sup_t t * w_H({M_w f > t}) / int f dw_H`` for the ``w_H``-averaged maximal."""
    cap = Capacity(delta, weight=w)
    fam = family if isinstance(family, CubeFamilyPolicy) else CubeFamilyPolicy(family or "dyadic")
    mf = maximal(f, MaximalConfig(cap, fam))
    levels = np.unique(mf.morton[mf.morton > 0])
    if levels.size == 0:
        raise ValueError("f vanishes identically")
    caps = cap.many(f.spec, mf.morton[None, :] >= levels[:, None])
    num = float(np.max(levels * caps))
    den = float(cap.integrals_on_masks(f, np.ones((1, f.spec.num_cells), dtype=bool))[0])
    return num / den
