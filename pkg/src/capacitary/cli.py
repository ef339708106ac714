"""Command-line front end.

Inputs are files written by ``capacitary generate`` or inline generators:

    power:ALPHA      |x|^ALPHA evaluated at cell centres
    ce1:M            first counterexample pair (f or w depending on the flag)
    ce3:K            slab pair with K resolved slabs
    const:C          constant function
    random:SEED      random step function (--f) or log-uniform weight (--w)

Cell sets accept ``full``, ``cells:I,J,...`` (row-major indices),
``random:SEED`` or a file.  Exit status is 0 when every hard assertion
holds, 1 when one fails and 2 on usage or validation errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import io as cio
from .choquet import Capacity, choquet_integral
from .content import ContentParams, dyadic_content, optimal_cover
from .decomp import cz_decompose, sparse_cover, sparse_cover_violations
from .dyadic import CellSet, CubeFamilyPolicy, DyadicCube, GridFunction, GridSpec
from .factorize import jones_factorize, jones_synthesize
from .generators import (
    counterexample1_pair,
    counterexample3_pair,
    power_weight,
    random_cell_set,
    random_step_function,
    random_weight,
)
from .maximal import MaximalConfig, compare_embedding, maximal
from .verify import (
    check_classical_corollary,
    check_fubini_substitute,
    check_pointwise_fubini_condition,
    check_strong_type,
    check_weak_space_boundedness,
    check_weak_type,
    counterexample_1,
    counterexample_2,
    counterexample_3,
    sweep_check,
)
from .weights import (
    DEFAULT_GAMMAS,
    NoStableGammaError,
    a1_constant,
    ap_constant,
    delta_embedding,
    power_weight_oracle,
    reverse_holder,
    self_improve,
    trend_verdict,
)

OUTPUT_DIR_ENV = "CAPACITARY_OUTPUT_DIR"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# input resolution
# ---------------------------------------------------------------------------


def _spec(args, depth=None) -> GridSpec:
    return GridSpec(args.n, args.depth if depth is None else depth)


def _inline(text: str):
    if ":" in text and not Path(text).exists():
        kind, _, arg = text.partition(":")
        return kind, arg
    return None, text


def function_source(text: str, role: str, args):
    """Return ``depth -> GridFunction`` for inline inputs, or a fixed function."""
    kind, arg = _inline(text)
    if kind is None:
        obj = cio.load(arg)
        if not isinstance(obj, GridFunction):
            raise UsageError(f"{text}: not a grid function file")
        return obj
    try:
        if kind == "power":
            alpha = float(arg)
            return lambda L: power_weight(_spec(args, L), alpha)
        if kind == "const":
            c = float(arg)
            return lambda L: GridFunction.constant(_spec(args, L), c)
        if kind == "ce1":
            m = int(arg)
            return lambda L: counterexample1_pair(m, args.n, L)[0 if role == "f" else 1]
        if kind == "ce3":
            K = int(arg)
            return lambda L: counterexample3_pair(args.n, K, L)[0 if role == "f" else 1]
        if kind == "random":
            seed = int(arg)
            if role == "f":
                return lambda L: random_step_function(_spec(args, L), np.random.default_rng(seed))
            return lambda L: random_weight(_spec(args, L), np.random.default_rng(seed))
    except ValueError as exc:
        raise UsageError(f"bad generator {text!r}: {exc}") from exc
    raise UsageError(f"unknown generator {kind!r} in {text!r}")


def resolve_function(text: str, role: str, args) -> GridFunction:
    src = function_source(text, role, args)
    return src if isinstance(src, GridFunction) else src(args.depth)


def resolve_set(text: str, args) -> CellSet:
    spec = _spec(args)
    if text == "full":
        return CellSet.full(spec)
    kind, arg = _inline(text)
    if kind == "cells":
        return CellSet.from_indices(spec, [int(i) for i in arg.split(",") if i])
    if kind == "random":
        return random_cell_set(spec, np.random.default_rng(int(arg)))
    if kind is not None:
        raise UsageError(f"unknown set generator {kind!r}")
    obj = cio.load(arg)
    if not isinstance(obj, CellSet):
        raise UsageError(f"{text}: not a cell set file")
    return obj


def _family(args) -> CubeFamilyPolicy:
    return CubeFamilyPolicy(args.family, seed=args.seed)


def _depths(args):
    if not args.depths:
        return None
    return [int(x) for x in args.depths.split(",")]


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + m for m in missing))


# ---------------------------------------------------------------------------
# subcommands; each returns (result dict, passed or None)
# ---------------------------------------------------------------------------


def cmd_content(args):
    _need(args, "set")
    E = resolve_set(args.set, args)
    params = ContentParams(args.n, args.delta)
    value = dyadic_content(E, params)
    cover = [c.to_json() for c in optimal_cover(E, params)] if args.trace else None
    return {"content": value, "cells": len(E), "cover": cover}, None


def cmd_integrate(args):
    _need(args, "f")
    f = resolve_function(args.f, "f", args)
    E = resolve_set(args.set, args) if args.set else None
    w = resolve_function(args.w, "w", args) if args.w else None
    out = {"content_integral": choquet_integral(f, E, Capacity(args.delta))}
    if w is not None:
        out["product_integral"] = choquet_integral(f * w, E, Capacity(args.delta))
        out["weighted_capacity_integral"] = choquet_integral(f, E, Capacity(args.delta, weight=w))
    return out, None


def cmd_maximal(args):
    _need(args, "f")
    f = resolve_function(args.f, "f", args)
    w = resolve_function(args.w, "w", args) if args.w else None
    mf = maximal(f, MaximalConfig(Capacity(args.delta, weight=w), _family(args)))
    if args.output:
        cio.save(mf, args.output)
    return {"max": float(mf.values.max()), "values": mf.values.tolist(), "output": args.output}, None


def cmd_apconst(args):
    _need(args, "w")
    src = function_source(args.w, "w", args)
    family = _family(args)

    def est(w):
        return (a1_constant(w, args.delta, family) if args.p == 1
                else ap_constant(w, args.p, args.delta, family))

    depths = _depths(args)
    if depths and not isinstance(src, GridFunction):
        values = [est(src(L)).value for L in depths]
        trend = trend_verdict(values)
        out = {"depths": depths, "values": values, "trend": trend.to_json()}
        kind, arg = _inline(args.w)
        if kind == "power":
            label = power_weight_oracle(float(arg), args.p, args.delta)
            out["oracle_in_class"] = label
            out["oracle_agrees"] = (trend.verdict == "stable") == label if trend.verdict != "inconclusive" else None
        return out, None
    w = src if isinstance(src, GridFunction) else src(args.depth)
    return est(w).to_json(), None


def cmd_rhi(args):
    _need(args, "w")
    src = function_source(args.w, "w", args)
    gammas = [float(g) for g in args.gammas.split(",")] if args.gammas else DEFAULT_GAMMAS
    target = src if isinstance(src, GridFunction) else src
    depths = _depths(args)
    if isinstance(src, GridFunction):
        depths = None
    elif depths is None:
        target = src(args.depth)
    try:
        rep = reverse_holder(target, None, args.delta, _family(args), gammas, args.cap, depths)
    except NoStableGammaError as exc:
        return {"error": str(exc)}, None
    return rep.to_json(), None


def cmd_selfimprove(args):
    _need(args, "w")
    src = function_source(args.w, "w", args)
    depths = _depths(args)
    target = src
    if isinstance(src, GridFunction):
        depths = None
    elif depths is None:
        target = src(args.depth)
    try:
        rep = self_improve(target, args.p, args.delta, _family(args), cap=args.cap, depths=depths)
    except NoStableGammaError as exc:
        return {"error": str(exc)}, None
    return rep.to_json(), None


def cmd_embed(args):
    _need(args, "w", "beta")
    w = resolve_function(args.w, "w", args)
    out = delta_embedding(w, args.p, args.delta, args.beta, _family(args)).to_json()
    if args.f:
        rep = compare_embedding(resolve_function(args.f, "f", args), args.delta, _family(args))
        out["pointwise"] = rep.to_json()
        return out, rep.holds
    return out, None


def cmd_czdecomp(args):
    _need(args, "w", "lam")
    w = resolve_function(args.w, "w", args)
    Q = DyadicCube.root(args.n)
    if args.cube:
        level, _, coords = args.cube.partition(":")
        Q = DyadicCube(int(level), tuple(int(c) for c in coords.split(",")))
    dec = cz_decompose(w, Q, args.lam, args.delta)
    upper = dec.diagnostics["upper"]
    ok = all(args.lam < a <= upper * (1 + 1e-12) for a in dec.diagnostics["averages"])
    ok &= bool(np.all(w.values[dec.residual.indices] <= args.lam * (1 + 1e-12)))
    return dec.to_json(), ok


def cmd_sparsecover(args):
    _need(args, "set")
    E = resolve_set(args.set, args)
    dec = sparse_cover(E, args.delta)
    bad = sparse_cover_violations(E, args.delta, dec)
    out = dec.to_json()
    out["violations"] = bad
    return out, not bad


def cmd_jones(args):
    family = _family(args)
    if args.action == "factorize":
        _need(args, "w")
        w = resolve_function(args.w, "w", args)
        g = None
        if args.g == "balanced" and args.p > 1:
            g = w ** (-1.0 / args.p**2)
        res = jones_factorize(w, args.p, args.delta, g=g, family=family)
        if args.output:
            base = Path(args.output)
            cio.save(res.w0, base.with_name(base.stem + "_w0.json"))
            cio.save(res.w1, base.with_name(base.stem + "_w1.json"))
        out = res.to_json()
        err = res.reconstruction_error(w)
        out["reconstruction_error"] = err
        return out, err <= 1e-10 and res.tail < 1e-8
    _need(args, "w0", "w1")
    w0 = resolve_function(args.w0, "w", args)
    w1 = resolve_function(args.w1, "w", args)
    rep = jones_synthesize(w0, w1, args.p, args.delta, family)
    return rep.to_json(), rep.holds


CHECKS = {
    "fubini": lambda f, w, a: check_fubini_substitute(f, w, a.p, a.delta, _family(a)),
    "strong": lambda f, w, a: check_strong_type(f, w, a.p, a.delta, _family(a)),
    "weak": lambda f, w, a: check_weak_type(f, w, a.p, a.delta, _family(a)),
    "weakspace": lambda f, w, a: check_weak_space_boundedness(f, w, a.p, a.delta, _family(a)),
    "classical": lambda f, w, a: check_classical_corollary(f, w, a.p, a.q if a.q is not None else a.p, a.delta, _family(a)),
    "pointwise-fubini": lambda f, w, a: check_pointwise_fubini_condition(w, a.delta, _family(a), a.samples, a.seed),
}


def cmd_verify(args):
    check = CHECKS[args.check]
    w_src = function_source(args.w or "const:1", "w", args)
    f_src = function_source(args.f or f"random:{args.seed}", "f", args)
    depths = _depths(args)
    if depths and not isinstance(w_src, GridFunction) and not isinstance(f_src, GridFunction):
        key = "sup_ratio" if args.check == "pointwise-fubini" else "ratio"
        rep = sweep_check(lambda L: check(f_src(L), w_src(L), args), depths, key)
    else:
        f = f_src if isinstance(f_src, GridFunction) else f_src(args.depth)
        w = w_src if isinstance(w_src, GridFunction) else w_src(args.depth)
        rep = check(f, w, args)
    if rep.seed is None:
        rep.seed = args.seed
    return rep, rep.passed


def cmd_counterexample(args):
    if args.which == "1":
        rep = counterexample_1(args.m, args.n, args.delta, args.p)
    elif args.which == "2":
        rep = counterexample_2(args.m, args.delta, args.beta if args.beta is not None else 1.0)
    else:
        rep = counterexample_3(args.levels, args.n, args.delta, max(args.depth, args.levels))
    return rep, rep.passed


def cmd_generate(args):
    _need(args, "output")
    role = "f" if args.role == "f" else "w"
    kind, _ = _inline(args.kind)
    if args.kind == "full" or kind in ("cells",):
        obj = resolve_set(args.kind, args)
    elif kind == "randomset":
        obj = random_cell_set(_spec(args), np.random.default_rng(int(args.kind.partition(":")[2])))
    else:
        obj = resolve_function(args.kind, role, args)
    meta = {"generator": args.kind, "role": role, "seed": args.seed, "version": __version__}
    path = cio.save(obj, args.output, "csv" if args.csv else None, meta=meta)
    return {"written": str(path), "cells": obj.spec.num_cells}, None


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=1, help="dimension (1..3)")
    common.add_argument("--depth", "-L", type=int, default=6, help="grid depth")
    common.add_argument("--delta", type=float, default=0.5)
    common.add_argument("--p", type=float, default=2.0)
    common.add_argument("--family", default="dyadic", choices=["dyadic", "shifted", "all"])
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--depths", help="comma-separated depths for a resolution sweep")
    common.add_argument("--json", action="store_true", help="print the full JSON report (default)")
    common.add_argument("--csv", action="store_true", help="print a flat key/value table")
    common.add_argument("--out-dir", help=f"also write the report here (default ${OUTPUT_DIR_ENV})")

    parser = argparse.ArgumentParser(prog="capacitary", description="Capacitary weights on dyadic grids.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        sp = sub.add_parser(name, parents=[common], help=help_text)
        sp.set_defaults(handler=fn)
        return sp

    sp = add("content", cmd_content, "dyadic content of a cell set")
    sp.add_argument("--set")
    sp.add_argument("--trace", action="store_true")

    sp = add("integrate", cmd_integrate, "Choquet integrals")
    sp.add_argument("--f")
    sp.add_argument("--w")
    sp.add_argument("--set")

    sp = add("maximal", cmd_maximal, "capacitary maximal function")
    sp.add_argument("--f")
    sp.add_argument("--w", help="weight of the averaging capacity")
    sp.add_argument("--output")

    sp = add("apconst", cmd_apconst, "A_p constant (A_1 when p = 1)")
    sp.add_argument("--w")

    for name, fn in (("rhi", cmd_rhi), ("selfimprove", cmd_selfimprove)):
        sp = add(name, fn, "reverse Hölder exponent" if name == "rhi" else "smaller exponent q < p")
        sp.add_argument("--w")
        sp.add_argument("--cap", type=float, default=8.0)
        if name == "rhi":
            sp.add_argument("--gammas")

    sp = add("embed", cmd_embed, "constants at (p, delta) and the embedded (p', beta)")
    sp.add_argument("--w")
    sp.add_argument("--f", help="also test the pointwise maximal embedding on f")
    sp.add_argument("--beta", type=float)

    sp = add("czdecomp", cmd_czdecomp, "stopping-time decomposition")
    sp.add_argument("--w")
    sp.add_argument("--lam", type=float)
    sp.add_argument("--cube", help="LEVEL:I,J,... (default root)")

    sp = add("sparsecover", cmd_sparsecover, "sparse dyadic cover of a set")
    sp.add_argument("--set")

    sp = add("jones", cmd_jones, "factorization and synthesis")
    sp.add_argument("action", choices=["factorize", "synthesize"])
    sp.add_argument("--w")
    sp.add_argument("--w0")
    sp.add_argument("--w1")
    sp.add_argument("--g", choices=["one", "balanced"], default="one", help="series seed")
    sp.add_argument("--output", help="base path for w0/w1 files")

    sp = add("verify", cmd_verify, "inequality checks")
    sp.add_argument("check", choices=sorted(CHECKS))
    sp.add_argument("--f")
    sp.add_argument("--w")
    sp.add_argument("--q", type=float)
    sp.add_argument("--samples", type=int, default=100)

    sp = add("counterexample", cmd_counterexample, "reproduce a counterexample")
    sp.add_argument("which", choices=["1", "2", "3"])
    sp.add_argument("--m", type=int, default=8)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--levels", type=int, default=4)

    sp = add("generate", cmd_generate, "write an input file")
    sp.add_argument("kind", help="power:A, ce1:M, ce3:K, const:C, random:S, randomset:S, cells:I,J, full")
    sp.add_argument("--role", choices=["f", "w"], default="w")
    sp.add_argument("--output")
    return parser


def _config(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "handler"}


def _emit(report: dict, args, stream) -> None:
    if args.csv:
        from .verify import _flatten

        stream.write("key,value\n")
        for k, v in _flatten("", report):
            stream.write(f"{k.lstrip('.')},{json.dumps(v)}\n")
    else:
        stream.write(cio.dumps(report))
    out_dir = args.out_dir or os.environ.get(OUTPUT_DIR_ENV)
    if out_dir and args.command != "generate":
        path = Path(out_dir) / f"{args.command}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(cio.dumps(report))


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    from .verify import _jsonable

    try:
        result, passed = args.handler(args)
    except (UsageError, ValueError, FileNotFoundError) as exc:
        sys.stderr.write(f"capacitary {args.command}: error: {exc}\n")
        return 2
    if hasattr(result, "to_json"):
        result = result.to_json()
    report = _jsonable({"command": args.command, "version": __version__, "seed": args.seed,
                        "config": _config(args), "passed": passed, "result": result})
    _emit(report, args, stdout)
    return 1 if passed is False else 0


if __name__ == "__main__":
    sys.exit(main())
