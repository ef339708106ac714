"""Constructive factorization ``w = w0 * w1^(1-p)`` with ``w0, w1`` of class one.

The seed ``g`` is pushed through the positively homogeneous operator
``T3 = T1 + T2`` and the normalised iterates are summed as a geometric
series ``phi = sum_k T3^k g / A^k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .choquet import Capacity, lp_norm
from .dyadic import CubeFamilyPolicy, GridFunction
from .maximal import MaximalConfig, maximal
from .weights import ApEstimate, a1_constant, ap_constant

__all__ = [
    "FactorizationResult",
    "t_operators",
    "jones_factorize",
    "jones_synthesize",
    "SynthesisReport",
    "quasi_linearity_ratio",
]


def _family(family) -> CubeFamilyPolicy:
    return family if isinstance(family, CubeFamilyPolicy) else CubeFamilyPolicy(family or "dyadic")


def t_operators(f: GridFunction, w: GridFunction, p: float, delta: float, family=None):
    """Return ``(T1 f, T2 f, T3 f)``.

    ``T1 f = M(f^q w^(-1/p))^(1/q) w^(1/(pq))`` and
    ``T2 f = M(f^p w^(1/p))^(1/p) w^(-1/p^2)`` with ``q = p/(p-1)`` and
    ``M`` the content maximal operator over ``family``.
    """
    if p <= 1:
        raise ValueError("the T operators need p > 1")
    w.require_weight()
    q = p / (p - 1.0)
    cfg = MaximalConfig(Capacity(delta), _family(family))
    t1 = maximal((f**q) * (w ** (-1.0 / p)), cfg) ** (1.0 / q) * (w ** (1.0 / (p * q)))
    t2 = maximal((f**p) * (w ** (1.0 / p)), cfg) ** (1.0 / p) * (w ** (-1.0 / p**2))
    return t1, t2, t1 + t2


@dataclass(frozen=True)
class FactorizationResult:
    w0: GridFunction
    w1: GridFunction
    phi: GridFunction
    A: float
    terms: int
    tail: float
    a1_w0: ApEstimate
    a1_w1: ApEstimate
    p: float
    diagnostics: dict = field(default_factory=dict)

    def reconstruction_error(self, w: GridFunction) -> float:
        rebuilt = self.w0.values * self.w1.values ** (1.0 - self.p)
        return float(np.max(np.abs(rebuilt - w.values) / w.values))

    def to_json(self) -> dict:
        return {"p": self.p, "A": self.A, "terms": self.terms, "tail": self.tail,
                "a1_w0": self.a1_w0.value, "a1_w1": self.a1_w1.value,
                "diagnostics": self.diagnostics}


def _probes(w: GridFunction, g: GridFunction, p: float, q: float) -> list:
    spec = w.spec
    return [
        g,
        GridFunction.constant(spec, 1.0),
        w ** (1.0 / (p * q)),
        w ** (-1.0 / (p * q)),
    ]


def jones_factorize(w: GridFunction, p: float, delta: float, g: GridFunction | None = None,
                    A: float | None = None, max_terms: int = 200, tol: float = 1e-10,
                    family=None) -> FactorizationResult:
    """Build ``phi`` and return ``w0 = phi^p w^(1/p)``, ``w1 = phi^q w^(-1/p)``.

    Norms are Choquet ``L^(pq)`` norms with respect to the content.  When
    ``A`` is not given it is twice the largest observed ratio
    ``||T3 f|| / ||f||`` over a few fixed probes and over the normalised
    iterates of ``g`` themselves, so every series term is at most half the
    previous one.  ``p == 1`` returns ``w0 = w``, ``w1 = 1``.
    """
    family = _family(family)
    w.require_weight()
    spec = w.spec
    if p == 1:
        one = GridFunction.constant(spec, 1.0)
        return FactorizationResult(w, one, one, 1.0, 0, 0.0, a1_constant(w, delta, family),
                                   a1_constant(one, delta, family), 1.0, {"passthrough": True})
    if p < 1:
        raise ValueError("p must be >= 1")
    q = p / (p - 1.0)
    r = p * q
    g = GridFunction.constant(spec, 1.0) if g is None else g
    if not g.is_weight:
        raise ValueError("the seed g must be positive")

    def norm(h):
        return lp_norm(h, delta, r)

    def T3(h):
        return t_operators(h, w, p, delta, family)[2]

    g_norm = norm(g)
    iterates = [g / g_norm]
    ratios = []

    def extend():
        nxt = T3(iterates[-1])
        rho = norm(nxt)
        if rho == 0:
            raise ValueError("T3 annihilated an iterate")
        ratios.append(rho)
        iterates.append(nxt / rho)

    probe_ratios = [norm(T3(h)) / norm(h) for h in _probes(w, g, p, q)]
    if A is None:
        for _ in range(8):
            extend()
        A = 2.0 * max(max(probe_ratios), max(ratios))
        chosen = "probe"
    else:
        A = float(A)
        chosen = "given"

    phi = iterates[0] * g_norm
    coeff = g_norm
    partial = norm(phi)
    terms, tail = 1, float("nan")
    for k in range(1, max_terms + 1):
        while len(ratios) < k:
            extend()
        coeff *= ratios[k - 1] / A
        term_norm = coeff
        phi = phi + iterates[k] * coeff
        partial = norm(phi)
        terms = k + 1
        tail = term_norm / partial
        if tail < tol:
            break
    else:
        raise ValueError(f"series not decaying within {max_terms} terms (A={A} too small?)")
    w0 = (phi**p) * (w ** (1.0 / p))
    w1 = (phi**q) * (w ** (-1.0 / p))
    t1, t2, _ = t_operators(phi, w, p, delta, family)
    diag = {
        "A_source": chosen,
        "probe_ratios": [float(x) for x in probe_ratios],
        "iterate_ratios": [float(x) for x in ratios[:terms]],
        "T1_phi_over_phi": float(np.max(t1.values / phi.values)),
        "T2_phi_over_phi": float(np.max(t2.values / phi.values)),
        "domination_target": float(A / max(A - max(ratios), 1e-300)),
    }
    return FactorizationResult(w0, w1, phi, float(A), terms, float(tail),
                               a1_constant(w0, delta, family), a1_constant(w1, delta, family),
                               float(p), diag)


@dataclass(frozen=True)
class SynthesisReport:
    w: GridFunction
    ap: float
    bound: float
    a1_w0: float
    a1_w1: float

    @property
    def holds(self) -> bool:
        return self.ap <= self.bound * (1.0 + 1e-12)

    def to_json(self) -> dict:
        return {"ap": self.ap, "bound": self.bound, "a1_w0": self.a1_w0,
                "a1_w1": self.a1_w1, "holds": self.holds}


def jones_synthesize(w0: GridFunction, w1: GridFunction, p: float, delta: float, family=None) -> SynthesisReport:
    """``w = w0 w1^(1-p)`` and the bound ``[w]_p <= [w0]_1 [w1]_1^(p-1)``."""
    family = _family(family)
    w0.require_weight("w0")
    w1.require_weight("w1")
    w = w0 * (w1 ** (1.0 - p))
    a0 = a1_constant(w0, delta, family).value
    a1 = a1_constant(w1, delta, family).value
    est = ap_constant(w, p, delta, family).value if p > 1 else a1_constant(w, delta, family).value
    return SynthesisReport(w, float(est), float(a0 * a1 ** (p - 1.0)), float(a0), float(a1))


def quasi_linearity_ratio(fs, w: GridFunction, p: float, delta: float, family=None) -> dict:
    """Largest pointwise ``T_i(sum f_j) / sum T_i(f_j)`` for ``i = 1, 2``."""
    fs = list(fs)
    total = fs[0]
    for f in fs[1:]:
        total = total + f
    whole = t_operators(total, w, p, delta, family)
    parts = [t_operators(f, w, p, delta, family) for f in fs]
    out = {}
    for i in (0, 1):
        s = parts[0][i]
        for part in parts[1:]:
            s = s + part[i]
        num, den = whole[i].values, s.values
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(den > 0, num / den, np.where(num > 0, np.inf, 0.0))
        out[f"T{i + 1}"] = float(r.max())
    return out
