"""Capacitary Muckenhoupt constants and related weight diagnostics.

All constants are maxima over a declared finite cube family, so they are
lower bounds for the supremum over all cubes.  Membership of a weight class
is judged by how an estimate behaves as the grid is refined; see
:func:`trend_verdict`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .choquet import Capacity
from .dyadic import (
    CellSet,
    CubeFamilyPolicy,
    DyadicCube,
    GridFunction,
    GridSpec,
    enumerate_cubes,
    family_masks,
    node_to_cube,
)
from .maximal import MaximalConfig, family_averages, maximal

DEFAULT_GAMMAS = tuple(2.0**-k for k in range(1, 11))

WeightSource = Union[GridFunction, Callable[[int], GridFunction]]


@dataclass(frozen=True)
class ApEstimate:
    p: float
    delta: float
    value: float
    family: CubeFamilyPolicy
    argmax: object = None

    def to_json(self) -> dict:
        arg = self.argmax.to_json() if hasattr(self.argmax, "to_json") else self.argmax
        return {"p": self.p, "delta": self.delta, "value": self.value,
                "family": self.family.kind, "argmax": arg}


@dataclass(frozen=True)
class RhiEstimate:
    gamma: float
    K: float
    family: CubeFamilyPolicy
    table: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"gamma": self.gamma, "K": self.K, "family": self.family.kind,
                "table": {str(g): ks for g, ks in self.table.items()}}


class NoStableGammaError(ValueError):
    """No exponent in the grid kept the reverse Hölder constant under the cap."""


def _family(family) -> CubeFamilyPolicy:
    return family if isinstance(family, CubeFamilyPolicy) else CubeFamilyPolicy(family or "dyadic")


def _cube_of(spec: GridSpec, family: CubeFamilyPolicy, index: int):
    if family.kind == "dyadic":
        return node_to_cube(spec, index)
    return enumerate_cubes(spec, family)[index]


def _averages(f: GridFunction, delta: float, family: CubeFamilyPolicy) -> np.ndarray:
    return family_averages(f, MaximalConfig(Capacity(delta), family))


def ap_constant(w: GridFunction, p: float, delta: float, family=None) -> ApEstimate:
    """``max_Q avg_Q(w) * avg_Q(w^(-1/(p-1)))^(p-1)`` with content averages.

    Examples
    --------
    >>> from capacitary.dyadic import GridSpec, GridFunction
    >>> w = GridFunction(GridSpec(1, 1), [2.0, 1.0])
    >>> ap_constant(w, 2, 1.0).value
    1.125
    """
    p = float(p)
    if p <= 1:
        raise ValueError("ap_constant needs p > 1; use a1_constant for p = 1")
    w.require_weight()
    family = _family(family)
    a = _averages(w, delta, family)
    b = _averages(w ** (-1.0 / (p - 1.0)), delta, family)
    terms = a * b ** (p - 1.0)
    i = int(np.argmax(terms))
    return ApEstimate(p, float(delta), float(terms[i]), family, _cube_of(w.spec, family, i))


def a1_constant(w: GridFunction, delta: float, family=None) -> ApEstimate:
    """``max_x M w(x) / w(x)`` with the content maximal operator."""
    w.require_weight()
    family = _family(family)
    mw = maximal(w, MaximalConfig(Capacity(delta), family))
    ratio = mw.values / w.values
    i = int(np.argmax(ratio))
    return ApEstimate(1.0, float(delta), float(ratio[i]), family, int(i))


def power_weight(spec: GridSpec, alpha: float) -> GridFunction:
    """``|x|^alpha`` evaluated at cell centres."""
    r = np.linalg.norm(spec.cell_centers(), axis=1)
    if alpha == 0:
        return GridFunction.constant(spec, 1.0)
    return GridFunction(spec, r ** float(alpha))


def power_weight_oracle(alpha: float, p: float, delta: float) -> bool:
    """Membership of ``|x|^alpha`` in the capacitary class for ``(p, delta)``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if p == 1:
        return -delta < alpha <= 0
    return -delta < alpha < delta * (p - 1)


# ---------------------------------------------------------------------------
# resolution sweeps
# ---------------------------------------------------------------------------

STABLE_GROWTH = 0.05
DIVERGENT_GROWTH = 0.25
CONTRACTING = 0.9
NON_CONTRACTING = 0.95


@dataclass(frozen=True)
class TrendVerdict:
    verdict: str
    values: tuple
    growth: tuple
    increment_ratios: tuple
    rule: str

    @property
    def stable(self) -> bool:
        return self.verdict == "stable"

    @property
    def divergent(self) -> bool:
        return self.verdict == "divergent"

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "values": list(self.values), "growth": list(self.growth),
                "increment_ratios": list(self.increment_ratios), "rule": self.rule}


def growth_verdict(values: Sequence[float], stable_tol=STABLE_GROWTH, divergent_tol=DIVERGENT_GROWTH) -> str:
    """Plain relative-growth rule: every step below / above a threshold."""
    v = np.asarray(values, dtype=float)
    g = v[1:] / v[:-1] - 1.0
    if np.all(g < stable_tol):
        return "stable"
    if np.all(g >= divergent_tol):
        return "divergent"
    return "inconclusive"


def trend_verdict(values: Sequence[float], stable_tol=STABLE_GROWTH, divergent_tol=DIVERGENT_GROWTH,
                  contracting=CONTRACTING, non_contracting=NON_CONTRACTING) -> TrendVerdict:
    """Classify a sequence of estimates taken at equally spaced resolutions.

    The growth rule is tried first.  If it is inconclusive the increments
    decide: geometric contraction (each increment at most ``contracting``
    times the previous one) means a bounded, Cauchy-like sequence, while
    increments that stay level or grow mean divergence.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        raise ValueError("trend test needs at least three resolutions")
    g = v[1:] / v[:-1] - 1.0
    inc = np.diff(v)
    tiny = 1e-12 * np.abs(v[1:])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(np.abs(inc[:-1]) > tiny[:-1], inc[1:] / inc[:-1], 0.0)
    verdict = growth_verdict(v, stable_tol, divergent_tol)
    rule = "growth"
    if verdict == "inconclusive":
        rule = "increments"
        flat = np.abs(inc) <= tiny
        if np.all(flat[1:] | (np.abs(inc[1:]) <= contracting * np.abs(inc[:-1]))):
            verdict = "stable"
        elif np.all(inc > 0) and np.all(ratios >= non_contracting):
            verdict = "divergent"
    return TrendVerdict(verdict, tuple(v), tuple(g), tuple(ratios), rule)


def _at(source: WeightSource, depth: int | None) -> GridFunction:
    if isinstance(source, GridFunction):
        return source
    if depth is None:
        raise ValueError("a weight factory needs explicit depths")
    return source(depth)


def sweep(estimator: Callable[[GridFunction], float], source: Callable[[int], GridFunction],
          depths: Sequence[int]) -> TrendVerdict:
    """Run ``estimator`` on ``source(L)`` for each depth and classify the trend."""
    return trend_verdict([estimator(source(L)) for L in depths])


# ---------------------------------------------------------------------------
# doubling, reverse Hölder, self-improvement, embeddings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DoublingReport:
    ap: float
    worst_slack: float
    violations: int
    pairs: int
    dilate_worst_slack: float
    dilate_violations: int
    seed: int

    def to_json(self) -> dict:
        return dict(self.__dict__)


def doubling_check(w: GridFunction, p: float, delta: float, samples: int = 200, seed: int = 0,
                   family=None, rtol: float = 1e-12) -> DoublingReport:
    """Sample ``E`` inside family cubes and test both doubling inequalities.

    Slack is right-hand side over left-hand side; values below one are
    violations.  The dilates of a dyadic cube are its dyadic ancestors,
    i.e. cubes of side ``t * side`` that contain it.
    """
    from .content import dyadic_content
    from .choquet import weighted_content

    family = _family(family)
    spec = w.spec
    if p == 1:
        est = a1_constant(w, delta, family).value
    else:
        est = ap_constant(w, p, delta, family).value
    rng = np.random.default_rng(seed)
    cubes = enumerate_cubes(spec, family)
    from .dyadic import cells_in_cube

    worst, bad = math.inf, 0
    for _ in range(samples):
        Q = cubes[rng.integers(len(cubes))]
        cq = cells_in_cube(spec, Q)
        idx = cq.indices
        pick = rng.random(idx.size) < rng.uniform(0.1, 1.0)
        if not pick.any():
            pick[rng.integers(idx.size)] = True
        E = CellSet.from_indices(spec, idx[pick])
        lhs = (dyadic_content(E, delta) / dyadic_content(cq, delta)) ** p
        rhs = 2.0**p * est * weighted_content(E, w, delta) / weighted_content(cq, w, delta)
        slack = rhs / lhs
        worst = min(worst, slack)
        bad += slack < 1.0 - rtol

    dworst, dbad = math.inf, 0
    if family.kind == "dyadic":
        cap_w = Capacity(delta).integrals_on_nodes(w)
        for _ in range(samples):
            Q = cubes[rng.integers(len(cubes))]
            if Q.level == 0:
                continue
            anc = list(Q.ancestors())
            big = anc[rng.integers(len(anc))]
            t = 2.0 ** (Q.level - big.level)
            lhs = cap_w[big.node_index(spec)]
            rhs = 2.0**p * est * t ** (p * delta) * cap_w[Q.node_index(spec)]
            slack = rhs / lhs
            dworst = min(dworst, slack)
            dbad += slack < 1.0 - rtol
    return DoublingReport(float(est), float(worst), int(bad), int(samples), float(dworst), int(dbad), int(seed))


def rhi_ratio(w: GridFunction, gamma: float, delta: float, family=None) -> float:
    """``max_Q [avg_Q w^(1+gamma)]^(1/(1+gamma)) / avg_Q w``."""
    family = _family(family)
    top = _averages(w ** (1.0 + gamma), delta, family) ** (1.0 / (1.0 + gamma))
    return float(np.max(top / _averages(w, delta, family)))


def reverse_holder(w: WeightSource, p: Optional[float] = None, delta: float = 1.0, family=None,
                   gammas: Sequence[float] = DEFAULT_GAMMAS, cap: float = 8.0,
                   depths: Optional[Sequence[int]] = None) -> RhiEstimate:
    """Largest ``gamma`` whose reverse Hölder constant stays ``<= cap``.

    ``w`` is either a grid function (single resolution) or a factory
    ``depth -> GridFunction`` evaluated at each of ``depths``.  ``p`` is
    accepted for symmetry with the other estimators and is not used.
    """
    gammas = sorted(float(g) for g in gammas)
    if not gammas:
        raise ValueError("empty gamma grid")
    family = _family(family)
    levels = [None] if isinstance(w, GridFunction) else list(depths or [])
    if not levels:
        raise ValueError("a weight factory needs explicit depths")
    weights = [_at(w, L) for L in levels]
    table = {}
    best = None
    for g in gammas:
        ks = [rhi_ratio(x, g, delta, family) for x in weights]
        table[g] = ks
        if max(ks) <= cap:
            best = g
    if best is None:
        raise NoStableGammaError(f"no gamma in the grid keeps K <= {cap}")
    return RhiEstimate(best, float(max(table[best])), family, table)


@dataclass(frozen=True)
class SelfImproveResult:
    q: float
    gamma: float
    rhi_K: float
    estimates: tuple
    depths: tuple

    def to_json(self) -> dict:
        return {"q": self.q, "gamma": self.gamma, "rhi_K": self.rhi_K,
                "estimates": [e.value for e in self.estimates], "depths": list(self.depths)}


def self_improve(w: WeightSource, p: float, delta: float, family=None,
                 gammas: Sequence[float] = DEFAULT_GAMMAS, cap: float = 8.0,
                 depths: Optional[Sequence[int]] = None) -> SelfImproveResult:
    """Reverse Hölder on ``w^(-1/(p-1))`` gives ``q = 1 + (p-1)/(1+gamma) < p``."""
    if p <= 1:
        raise ValueError("self-improvement needs p > 1")
    family = _family(family)
    expo = -1.0 / (p - 1.0)
    if isinstance(w, GridFunction):
        sigma = w**expo
        levels = (None,)
    else:
        src = w
        sigma = lambda L: src(L) ** expo
        levels = tuple(depths or ())
    rhi = reverse_holder(sigma, p, delta, family, gammas, cap, depths=None if levels == (None,) else levels)
    q = 1.0 + (p - 1.0) / (1.0 + rhi.gamma)
    ests = tuple(ap_constant(_at(w, L), q, delta, family) for L in levels)
    return SelfImproveResult(q, rhi.gamma, rhi.K, ests, tuple(L for L in levels if L is not None))


@dataclass(frozen=True)
class EmbeddingEstimate:
    p: float
    delta: float
    p_embedded: float
    beta: float
    value_delta: float
    value_beta: float

    @property
    def ratio(self) -> float:
        return self.value_beta / self.value_delta

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d["ratio"] = self.ratio
        return d


def embedded_exponent(p: float, delta: float, beta: float) -> float:
    return (p * delta + beta - delta) / beta


def delta_embedding(w: GridFunction, p: float, delta: float, beta: float, family=None) -> EmbeddingEstimate:
    """Constants at ``(p, delta)`` and at ``(p', beta)`` with ``p' = (p delta + beta - delta)/beta``."""
    if not beta > delta:
        raise ValueError("beta must exceed delta")
    if beta > w.spec.n:
        raise ValueError("beta must not exceed n")
    family = _family(family)
    pe = embedded_exponent(p, delta, beta)
    if p == 1:
        vd = a1_constant(w, delta, family).value
        vb = a1_constant(w, beta, family).value
    else:
        vd = ap_constant(w, p, delta, family).value
        vb = ap_constant(w, pe, beta, family).value
    return EmbeddingEstimate(float(p), float(delta), pe, float(beta), vd, vb)
