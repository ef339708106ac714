"""Layer-cake Choquet integrals, the weighted capacity ``w_H`` and norms."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from . import _kernels
from .content import ContentParams, level_costs
from .dyadic import CellSet, GridFunction, GridSpec

__all__ = [
    "Capacity",
    "content_capacity",
    "weighted_capacity",
    "choquet_integral",
    "weighted_content",
    "choquet_norm",
    "lp_norm",
    "weak_norm",
    "linf_norm",
    "level_slices",
]


class Capacity:
    """Set function on cell sets: the dyadic content, or ``F -> int_F w dH``.

    Parameters
    ----------
    delta : float
        Content exponent.
    weight : GridFunction, optional
        When given, the capacity is the weighted content of ``weight``.
    backend : str, optional
        Force ``"numba"`` or ``"numpy"`` kernels.
    """

    def __init__(self, delta: float, weight: Optional[GridFunction] = None, backend: str | None = None):
        self.delta = float(delta)
        self.weight = weight
        self.backend = backend
        if weight is not None:
            ContentParams(weight.spec.n, self.delta)

    @property
    def kind(self) -> str:
        return "content" if self.weight is None else "weighted_content"

    def __repr__(self):
        return f"Capacity(kind={self.kind!r}, delta={self.delta})"

    def describe(self) -> dict:
        return {"kind": self.kind, "delta": self.delta}

    def _check(self, spec: GridSpec):
        ContentParams(spec.n, self.delta)
        if self.weight is not None:
            self.weight.spec.check_same(spec)

    def _kern(self):
        return _kernels.get_backend(self.backend)

    def __call__(self, E: CellSet) -> float:
        self._check(E.spec)
        return float(self.many(E.spec, E.morton[None, :])[0])

    def many(self, spec: GridSpec, masks_morton: np.ndarray) -> np.ndarray:
        """Capacity of each row of a (k, cells) Morton-order mask array."""
        self._check(spec)
        costs = level_costs(spec, self.delta)
        masks = np.asarray(masks_morton, dtype=bool)
        if self.weight is None:
            return self._kern().dp_root(masks, costs, spec.fanout, spec.depth)
        return self._kern().masked_layer_cake(
            self.weight.morton, masks, costs, spec.fanout, spec.depth
        )

    def integrals_on_nodes(self, f: GridFunction) -> np.ndarray:
        """``int_Q f dC`` for every dyadic node Q (flat node array)."""
        spec = f.spec
        self._check(spec)
        costs = level_costs(spec, self.delta)
        if self.weight is None:
            return self._kern().layer_cake_nodes(f.morton, costs, spec.fanout, spec.depth)
        return self._kern().weighted_layer_cake_nodes(
            f.morton, self.weight.morton, costs, spec.fanout, spec.depth
        )

    def nodes(self, spec: GridSpec) -> np.ndarray:
        """Capacity of every dyadic node."""
        self._check(spec)
        if self.weight is None:
            from .dyadic import node_level_array

            return level_costs(spec, self.delta)[node_level_array(spec)]
        return Capacity(self.delta, backend=self.backend).integrals_on_nodes(self.weight)

    def integrals_on_masks(self, f: GridFunction, masks_morton: np.ndarray) -> np.ndarray:
        """``int_M f dC`` for each row M of a Morton-order mask array."""
        spec = f.spec
        self._check(spec)
        costs = level_costs(spec, self.delta)
        masks = np.asarray(masks_morton, dtype=bool)
        if self.weight is None:
            return self._kern().masked_layer_cake(f.morton, masks, costs, spec.fanout, spec.depth)
        return self._kern().masked_weighted_layer_cake(
            f.morton, self.weight.morton, masks, costs, spec.fanout, spec.depth
        )


def content_capacity(delta: float, backend: str | None = None) -> Capacity:
    return Capacity(delta, backend=backend)


def weighted_capacity(delta: float, w: GridFunction, backend: str | None = None) -> Capacity:
    return Capacity(delta, weight=w, backend=backend)


def _region(f: GridFunction, E: Optional[CellSet]) -> np.ndarray:
    if E is None:
        return np.ones((1, f.spec.num_cells), dtype=bool)
    f.spec.check_same(E.spec)
    return E.morton[None, :]


def choquet_integral(f: GridFunction, E: Optional[CellSet], C: Capacity) -> float:
    """``sum_i (v_i - v_{i-1}) C({f 1_E >= v_i})`` over the distinct values of ``f 1_E``.

    ``E=None`` integrates over the whole root.

    Examples
    --------
    >>> from capacitary.dyadic import GridSpec, GridFunction
    >>> f = GridFunction(GridSpec(1, 1), [2.0, 1.0])
    >>> round(choquet_integral(f, None, Capacity(0.5)), 5)
    1.70711
    """
    return float(C.integrals_on_masks(f, _region(f, E))[0])


def weighted_content(F: CellSet, w: GridFunction, delta: float) -> float:
    """``w_H(F) = int_F w dH``."""
    return choquet_integral(w, F, Capacity(delta))


def linf_norm(f: GridFunction, E: Optional[CellSet] = None) -> float:
    if E is None:
        return float(f.values.max(initial=0.0))
    f.spec.check_same(E.spec)
    return float(f.values[E.mask].max(initial=0.0))


def lp_norm(f: GridFunction, delta: float, p: float, w: Optional[GridFunction] = None, E: Optional[CellSet] = None) -> float:
    """``(int_E f^p w dH)^(1/p)``; ``p = inf`` gives the max over ``E``."""
    p = float(p)
    if p < 1:
        raise ValueError("p must be >= 1")
    if math.isinf(p):
        return linf_norm(f, E)
    g = f**p if w is None else (f**p) * w
    return choquet_integral(g, E, Capacity(delta)) ** (1.0 / p)


def weak_norm(f: GridFunction, delta: float, p: float, w: Optional[GridFunction] = None, E: Optional[CellSet] = None) -> float:
    """``sup_t t * C({f 1_E > t})^(1/p)`` with ``C`` the (weighted) content.

    On a step function the supremum is attained as ``t`` increases to a
    value ``v`` of ``f``, where the superlevel set is ``{f >= v}``.
    """
    p = float(p)
    if p < 1:
        raise ValueError("p must be >= 1")
    g = f if E is None else f.restrict(E)
    if math.isinf(p):
        return linf_norm(g)
    levels = np.unique(g.morton[g.morton > 0])
    if levels.size == 0:
        return 0.0
    cap = Capacity(delta, weight=w)
    masks = g.morton[None, :] >= levels[:, None]
    caps = cap.many(g.spec, masks)
    return float(np.max(levels * caps ** (1.0 / p)))


def choquet_norm(f: GridFunction, delta: float, p: float, w: Optional[GridFunction] = None, E: Optional[CellSet] = None, weak: bool = False) -> float:
    """Strong or weak weighted Choquet–Lebesgue norm of ``f``."""
    return (weak_norm if weak else lp_norm)(f, delta, p, w=w, E=E)


def level_slices(f: GridFunction) -> dict:
    """Cell sets ``{2^(k-1) < f <= 2^k}`` keyed by ``k`` (non-empty ones only)."""
    vals = f.values
    out = {}
    pos = vals > 0
    if not pos.any():
        return out
    ks = np.ceil(np.log2(vals[pos]))
    # correct for rounding at exact powers of two
    ks = ks.astype(np.int64)
    full = np.zeros(vals.size, dtype=np.int64)
    full[pos] = ks
    for idx in np.flatnonzero(pos):
        k = full[idx]
        while vals[idx] <= 2.0 ** (k - 1):
            k -= 1
        while vals[idx] > 2.0**k:
            k += 1
        full[idx] = k
    for k in np.unique(full[pos]):
        out[int(k)] = CellSet(f.spec, pos & (full == k))
    return out
