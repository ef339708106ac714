"""Inequality checks and counterexample reproductions.

Each check returns a :class:`CheckReport`.  ``passed`` is ``True``/``False``
only for checks with a fixed numeric bound; purely empirical checks leave it
``None`` and carry a verdict string instead.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .choquet import Capacity, choquet_integral, level_slices, lp_norm, weak_norm
from .content import ContentParams, cube_content, dyadic_content, slab_content_diagnostic
from .dyadic import CellSet, CubeFamilyPolicy, GridFunction, cells_in_cube, enumerate_cubes
from .generators import counterexample1_pair, counterexample3_pair, log2_exact, slab_sets
from .maximal import MaximalConfig, compare_embedding, family_averages, lebesgue_maximal, maximal
from .weights import a1_constant, ap_constant, trend_verdict

RTOL = 1e-12

__all__ = [
    "CheckReport",
    "check_fubini_substitute",
    "check_strong_type",
    "check_weak_type",
    "check_weak_space_boundedness",
    "check_classical_corollary",
    "counterexample_1",
    "counterexample_2",
    "counterexample_3",
    "check_pointwise_fubini_condition",
    "sweep_check",
    "loglog_slope",
]


@dataclass
class CheckReport:
    check_id: str
    inputs: dict
    measured: dict
    bound: Optional[float] = None
    passed: Optional[bool] = None
    verdict: str = ""
    runtime: float = 0.0
    seed: Optional[int] = None
    version: str = __version__

    @property
    def ok(self) -> bool:
        """False only when a hard bound failed."""
        return self.passed is not False

    def to_json(self) -> dict:
        return _jsonable(asdict(self))

    def rows(self) -> list:
        """Flat ``(key, value)`` rows for CSV output."""
        out = [("check_id", self.check_id), ("passed", self.passed), ("verdict", self.verdict),
               ("bound", self.bound), ("runtime", self.runtime), ("seed", self.seed)]
        for k, v in _flatten("inputs", self.inputs):
            out.append((k, v))
        for k, v in _flatten("measured", self.measured):
            out.append((k, v))
        return out


def _flatten(prefix, obj):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(f"{prefix}.{k}", v)
    elif isinstance(obj, (list, tuple)) and obj and isinstance(obj[0], (dict, list, tuple)):
        for i, v in enumerate(obj):
            yield from _flatten(f"{prefix}.{i}", v)
    else:
        yield prefix, _jsonable(obj)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if hasattr(obj, "to_json"):
        return _jsonable(obj.to_json())
    return obj


def _family(family) -> CubeFamilyPolicy:
    return family if isinstance(family, CubeFamilyPolicy) else CubeFamilyPolicy(family or "dyadic")


def _grid_info(f: GridFunction) -> dict:
    return {"n": f.spec.n, "depth": f.spec.depth}


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        rep = fn(*args, **kwargs)
        rep.runtime = time.perf_counter() - t0
        return rep

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    wrapper.__wrapped__ = fn
    return wrapper


def _weight_constant(w: GridFunction, p: float, delta: float, family) -> float:
    if p == 1:
        return a1_constant(w, delta, family).value
    return ap_constant(w, p, delta, family).value


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0])


# ---------------------------------------------------------------------------
# inequality checks
# ---------------------------------------------------------------------------


@_timed
def check_fubini_substitute(f: GridFunction, w: GridFunction, p: float, delta: float, family=None) -> CheckReport:
    """Compare ``int f w dH`` with ``int f dw_H``; the lower quarter bound is hard."""
    w.require_weight()
    family = _family(family)
    product = choquet_integral(f * w, None, Capacity(delta))
    iterated = choquet_integral(f, None, Capacity(delta, weight=w))
    const = _weight_constant(w, p, delta, family)
    upper = iterated / product if product else 0.0
    ok = 0.25 * product <= iterated * (1 + RTOL)
    return CheckReport(
        "fubini",
        {**_grid_info(f), "p": p, "delta": delta, "family": family.kind},
        {"product_integral": product, "iterated_integral": iterated,
         "lower_ratio": iterated / product if product else float("inf"),
         "upper_ratio": upper, "weight_constant": const,
         "upper_over_constant_root": upper / const ** (1.0 / p)},
        bound=0.25,
        passed=bool(ok),
        verdict="lower bound holds" if ok else "lower bound violated",
    )


def _strong_ratio(f, w, p, delta, mf) -> float:
    den = choquet_integral((f**p) * w, None, Capacity(delta))
    if den == 0:
        raise ValueError("f vanishes identically")
    return choquet_integral((mf**p) * w, None, Capacity(delta)) / den


@_timed
def check_strong_type(f: GridFunction, w: GridFunction, p: float, delta: float, family=None) -> CheckReport:
    """``int (M f)^p w dH / int f^p w dH`` (reported; no fixed bound)."""
    if p <= 1:
        raise ValueError("strong type needs p > 1")
    w.require_weight()
    family = _family(family)
    mf = maximal(f, MaximalConfig(Capacity(delta), family))
    ratio = _strong_ratio(f, w, p, delta, mf)
    return CheckReport("strong", {**_grid_info(f), "p": p, "delta": delta, "family": family.kind},
                       {"ratio": ratio}, verdict="finite" if math.isfinite(ratio) else "infinite")


@_timed
def check_weak_type(f: GridFunction, w: GridFunction, p: float, delta: float, family=None) -> CheckReport:
    """``sup_t t^p w_H({M f > t}) / int f^p w dH`` and the strong ratio for comparison."""
    w.require_weight()
    family = _family(family)
    mf = maximal(f, MaximalConfig(Capacity(delta), family))
    levels = np.unique(mf.morton[mf.morton > 0])
    if levels.size == 0:
        raise ValueError("f vanishes identically")
    caps = Capacity(delta, weight=w).many(f.spec, mf.morton[None, :] >= levels[:, None])
    den = choquet_integral((f**p) * w, None, Capacity(delta))
    weak = float(np.max(levels**p * caps)) / den
    strong = _strong_ratio(f, w, p, delta, mf)
    return CheckReport("weak", {**_grid_info(f), "p": p, "delta": delta, "family": family.kind},
                       {"ratio": weak, "strong_ratio": strong}, verdict="finite")


@_timed
def check_weak_space_boundedness(f: GridFunction, w: GridFunction, p: float, delta: float, family=None) -> CheckReport:
    """Ratio of weak weighted norms ``||M f|| / ||f||``."""
    if p <= 1:
        raise ValueError("weak-space boundedness needs p > 1")
    family = _family(family)
    mf = maximal(f, MaximalConfig(Capacity(delta), family))
    den = weak_norm(f, delta, p, w=w)
    if den == 0:
        raise ValueError("f vanishes identically")
    ratio = weak_norm(mf, delta, p, w=w) / den
    return CheckReport("weakspace", {**_grid_info(f), "p": p, "delta": delta, "family": family.kind},
                       {"ratio": ratio}, verdict="finite")


@_timed
def check_classical_corollary(f: GridFunction, w: GridFunction, p: float, q: float, delta: float, family=None) -> CheckReport:
    """Classical maximal operator against weighted Choquet norms, plus the pointwise embedding."""
    n = f.spec.n
    if p > 1 and q < p * delta / n:
        raise ValueError("need q >= p delta / n")
    if p == 1 and q <= delta / n:
        raise ValueError("need q > delta / n")
    family = _family(family)
    mf = lebesgue_maximal(f, family)
    den = choquet_integral((f**q) * w, None, Capacity(delta))
    if den == 0:
        raise ValueError("f vanishes identically")
    ratio = choquet_integral((mf**q) * w, None, Capacity(delta)) / den
    emb = compare_embedding(f, delta, family)
    return CheckReport("classical", {**_grid_info(f), "p": p, "q": q, "delta": delta, "family": family.kind},
                       {"ratio": ratio, "embedding_max_ratio": emb.max_ratio,
                        "embedding_violations": emb.violations},
                       bound=1.0, passed=emb.holds,
                       verdict="pointwise embedding holds" if emb.holds else "pointwise embedding violated")


def sweep_check(check: Callable[[int], CheckReport], depths: Sequence[int], key: str = "ratio") -> CheckReport:
    """Run ``check(L)`` for each depth and classify the trend of ``measured[key]``."""
    t0 = time.perf_counter()
    reports = [check(L) for L in depths]
    values = [r.measured[key] for r in reports]
    trend = trend_verdict(values)
    failed = any(r.passed is False for r in reports)
    return CheckReport(f"{reports[0].check_id}-sweep", {"depths": list(depths), "key": key},
                       {"values": values, "trend": trend.to_json()},
                       passed=False if failed else None, verdict=trend.verdict,
                       runtime=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# counterexamples
# ---------------------------------------------------------------------------


def _ce1_values(m: int, n: int, delta: float):
    f, w = counterexample1_pair(m, n)
    product = choquet_integral(f * w, None, Capacity(delta))
    iterated = choquet_integral(f, None, Capacity(delta, weight=w))
    return product, iterated


@_timed
def counterexample_1(m: int, n: int, delta: float, p: float = 2.0, sweep: Sequence[int] = (2, 4, 8, 16)) -> CheckReport:
    """Weight/function pair with ``int f w dH = 1`` but ``int f dw_H >= m^(n-delta)/8``."""
    log2_exact(m)
    ContentParams(n, delta)
    ms = sorted(set(sweep) | {m})
    rows = []
    ok = True
    for mm in ms:
        product, iterated = _ce1_values(mm, n, delta)
        bound = mm ** (n - delta) / 8.0
        good = abs(product - 1.0) <= RTOL and iterated >= bound * (1 - RTOL)
        ok &= good
        rows.append({"m": mm, "product_integral": product, "iterated_integral": iterated,
                     "lower_bound": bound, "ok": good})
    slope = loglog_slope([r["m"] for r in rows], [r["iterated_integral"] for r in rows])
    target = n - delta
    slope_ok = slope >= target - 0.1
    here = next(r for r in rows if r["m"] == m)
    return CheckReport(
        "counterexample1",
        {"m": m, "n": n, "delta": delta, "p": p, "sweep": ms},
        {"product_integral": here["product_integral"], "iterated_integral": here["iterated_integral"],
         "slope": slope, "target_slope": target, "slope_ok": slope_ok, "rows": rows},
        bound=here["lower_bound"],
        passed=bool(ok and slope_ok),
        verdict=f"slope {slope:.4f} vs {target}",
    )


def _ce2_values(m: int, delta: float, beta: float):
    j = log2_exact(m)
    from .dyadic import GridSpec

    spec = GridSpec(1, j)
    k = np.arange(1, m + 1, dtype=float)
    f = 2.0 ** (k - 1)
    w = 2.0 ** (-(k - 1) * beta)
    # x first: for fixed x the y-section is the interval (0, f(x)) of content f(x)^beta
    inner_y = w * np.array([cube_content(v, beta) for v in f])
    order1 = choquet_integral(GridFunction(spec, inner_y), None, Capacity(delta))
    # y first: G(y) = w_H({f > y}) is constant on (2^(i-1), 2^i]; its superlevel sets are (0, 2^i)
    wf = GridFunction(spec, w)
    cap = Capacity(delta, weight=wf)
    g = np.array([cap(CellSet(spec, k >= i + 1)) for i in range(m)] + [0.0])
    order2 = float(sum((g[i] - g[i + 1]) * cube_content(2.0**i, beta) for i in range(m)))
    return order1, order2


@_timed
def counterexample_2(m: int, delta: float, beta: float, sweep: Sequence[int] = (2, 4, 8, 16, 32)) -> CheckReport:
    """Two orders of iterated Choquet integration of ``w(x) 1{f(x) > y}`` disagree."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    log2_exact(m)
    ms = sorted(set(sweep) | {m})
    rows, ok = [], True
    for mm in ms:
        o1, o2 = _ce2_values(mm, delta, beta)
        bound = (2.0**beta - 1.0) / 2.0 ** (2 * beta) * mm ** (1.0 - delta)
        good = abs(o1 - 1.0) <= RTOL and o2 >= bound * (1 - RTOL)
        ok &= good
        rows.append({"m": mm, "order1": o1, "order2": o2, "lower_bound": bound, "ok": good})
    slope = loglog_slope([r["m"] for r in rows], [r["order2"] for r in rows])
    target = 1.0 - delta
    here = next(r for r in rows if r["m"] == m)
    return CheckReport(
        "counterexample2",
        {"m": m, "delta": delta, "beta": beta, "sweep": ms},
        {"order1": here["order1"], "order2": here["order2"], "slope": slope,
         "target_slope": target, "slope_ok": slope >= target - 0.1, "rows": rows},
        bound=here["lower_bound"],
        passed=bool(ok),
        verdict=f"slope {slope:.4f} vs {target}",
    )


@_timed
def counterexample_3(levels: int, n: int, delta: float, depth: int) -> CheckReport:
    """Slab pair with ``int f w dH = 1`` and ``sum_k 2^k w_H(E_k) = K``."""
    if n < 2:
        raise ValueError("needs n >= 2")
    if delta > n - 1:
        raise ValueError("needs delta <= n - 1")
    if levels > depth:
        raise ValueError("slab thickness not resolvable")
    params = ContentParams(n, delta)
    f, w = counterexample3_pair(n, levels, depth)
    product = choquet_integral(f * w, None, Capacity(delta))
    slabs = slab_sets(n, levels, depth)
    terms = [2.0**k * choquet_integral(w, S, Capacity(delta)) for k, S in enumerate(slabs, start=1)]
    partial = list(np.cumsum(terms))
    contents = [dyadic_content(S, params) for S in slabs]
    iterated = choquet_integral(f, None, Capacity(delta, weight=w))
    ok = (abs(product - 1.0) <= RTOL
          and all(abs(s - (i + 1)) <= RTOL * (i + 1) for i, s in enumerate(partial))
          and iterated >= levels / 4.0 * (1 - RTOL))
    return CheckReport(
        "counterexample3",
        {"levels": levels, "n": n, "delta": delta, "depth": depth},
        {"product_integral": product, "partial_sums": partial, "slab_contents": contents,
         "iterated_integral": iterated},
        bound=float(levels),
        passed=bool(ok),
        verdict="linear growth in resolved levels" if ok else "mismatch",
    )


@_timed
def check_pointwise_fubini_condition(w: GridFunction, delta: float, family=None, samples: int = 100, seed: int = 0) -> CheckReport:
    """``sup_Q int_Q w^-1 dw_H / H(Q)`` and the level-slice sum on random sets."""
    w.require_weight()
    family = _family(family)
    spec = w.spec
    cfg = MaximalConfig(Capacity(delta, weight=w), family)
    # int_Q w^-1 dw_H / H(Q) = (weighted average of w^-1) * w_H(Q) / H(Q)
    avg_inv = family_averages(w ** -1.0, cfg)
    ratio_w = family_averages(w, MaximalConfig(Capacity(delta), family))
    sup = float(np.max(avg_inv * ratio_w))
    rng = np.random.default_rng(seed)
    slices = level_slices(w)
    params = ContentParams(spec.n, delta)
    worst = 0.0
    for _ in range(samples):
        E = CellSet(spec, rng.random(spec.num_cells) < rng.uniform(0.05, 1.0))
        if E.is_empty:
            continue
        total = sum(dyadic_content(E & S, params) for S in slices.values())
        worst = max(worst, total / dyadic_content(E, params))
    return CheckReport("pointwise-fubini", {**_grid_info(w), "delta": delta, "family": family.kind,
                                            "samples": samples},
                       {"sup_ratio": sup, "level_slice_ratio": worst}, verdict="finite", seed=seed)
