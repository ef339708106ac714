"""Hot loops over the dyadic tree, in two interchangeable backends.

Every kernel works on arrays in Morton (Z-curve) order, where each dyadic
cube at level ``l`` owns a contiguous block of ``fanout**(L - l)`` leaf cells
and its children are consecutive blocks.  Node arrays are flat, level by
level from the root, with level ``l`` starting at
``(fanout**l - 1) // (fanout - 1)``.

``costs[l]`` is the content of a single cube at level ``l``.  The numba
backend is used unless ``CAPACITARY_DISABLE_NUMBA`` is set to a truthy value
or numba cannot be imported; both backends give the same results up to
floating-point summation order.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

try:  # pragma: no cover - exercised implicitly
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

# When the parent cube costs at most this much more than its children's
# optimum, the DP value keeps the parent (absorbs rounding in ties).
TIE_RTOL = 1e-13

_CHUNK = 1 << 21


def _flag_disabled() -> bool:
    return os.environ.get("CAPACITARY_DISABLE_NUMBA", "").strip().lower() in {
        "1",
        "true",
        "yes",
        "on",
    }


def level_offsets(fanout: int, depth: int) -> np.ndarray:
    """Start index of each level in a flat node array (length depth + 2)."""
    out = np.empty(depth + 2, dtype=np.int64)
    out[0] = 0
    for lvl in range(depth + 1):
        out[lvl + 1] = out[lvl] + fanout**lvl
    return out


def _thresholds(values: np.ndarray):
    levels = np.unique(values[values > 0])
    steps = np.diff(levels, prepend=0.0)
    return levels, steps


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------


def _np_reduce(vals: np.ndarray, own: float, fanout: int) -> np.ndarray:
    rows = vals.shape[0]
    child = vals.reshape(rows, -1, fanout).sum(axis=2)
    keep_own = own <= child * (1.0 + TIE_RTOL)
    return np.where(child > 0.0, np.where(keep_own, own, child), 0.0)


def np_dp_root(masks, costs, fanout, depth):
    """Dyadic content of each row of a boolean (k, N) mask array."""
    masks = np.atleast_2d(masks)
    vals = np.where(masks, costs[depth], 0.0)
    for lvl in range(depth - 1, -1, -1):
        vals = _np_reduce(vals, costs[lvl], fanout)
    return vals[:, 0].copy()


def np_dp_nodes(masks, costs, fanout, depth):
    """Dyadic content of ``mask & Q`` for every node Q, shape (k, nodes)."""
    masks = np.atleast_2d(masks)
    offsets = level_offsets(fanout, depth)
    out = np.empty((masks.shape[0], offsets[-1]))
    vals = np.where(masks, costs[depth], 0.0)
    out[:, offsets[depth] : offsets[depth + 1]] = vals
    for lvl in range(depth - 1, -1, -1):
        vals = _np_reduce(vals, costs[lvl], fanout)
        out[:, offsets[lvl] : offsets[lvl + 1]] = vals
    return out


def _row_chunks(rows, width):
    step = max(1, _CHUNK // max(width, 1))
    for start in range(0, rows, step):
        yield slice(start, min(rows, start + step))


def np_layer_cake_nodes(f, costs, fanout, depth):
    """Choquet integral of ``f`` over every dyadic node w.r.t. content."""
    offsets = level_offsets(fanout, depth)
    out = np.zeros(offsets[-1])
    levels, steps = _thresholds(f)
    for sl in _row_chunks(levels.size, f.size * 2):
        masks = f[None, :] >= levels[sl, None]
        out += steps[sl] @ np_dp_nodes(masks, costs, fanout, depth)
    return out


def np_weighted_layer_cake_nodes(f, w, costs, fanout, depth):
    """Choquet integral of ``f`` over every dyadic node w.r.t. ``w_H``."""
    offsets = level_offsets(fanout, depth)
    out = np.zeros(offsets[-1])
    levels, steps = _thresholds(f)
    wlevels, wsteps = _thresholds(w)
    for lvl, step in zip(levels, steps):
        sup = f >= lvl
        top = w[sup].max()
        use = wlevels <= top
        for sl in _row_chunks(int(use.sum()), f.size * 2):
            masks = sup[None, :] & (w[None, :] >= wlevels[use][sl, None])
            out += step * (wsteps[use][sl] @ np_dp_nodes(masks, costs, fanout, depth))
    return out


def np_masked_layer_cake(f, masks, costs, fanout, depth):
    """Choquet integral of ``f`` over each row of ``masks`` w.r.t. content."""
    masks = np.atleast_2d(masks)
    out = np.zeros(masks.shape[0])
    levels, steps = _thresholds(f)
    for lvl, step in zip(levels, steps):
        sup = f >= lvl
        out += step * np_dp_root(masks & sup[None, :], costs, fanout, depth)
    return out


def np_masked_weighted_layer_cake(f, w, masks, costs, fanout, depth):
    """Choquet integral of ``f`` over each row of ``masks`` w.r.t. ``w_H``."""
    masks = np.atleast_2d(masks)
    out = np.zeros(masks.shape[0])
    levels, steps = _thresholds(f)
    for lvl, step in zip(levels, steps):
        sub = masks & (f >= lvl)[None, :]
        out += step * np_masked_layer_cake(w, sub, costs, fanout, depth)
    return out


NUMPY = SimpleNamespace(
    name="numpy",
    dp_root=np_dp_root,
    dp_nodes=np_dp_nodes,
    layer_cake_nodes=np_layer_cake_nodes,
    weighted_layer_cake_nodes=np_weighted_layer_cake_nodes,
    masked_layer_cake=np_masked_layer_cake,
    masked_weighted_layer_cake=np_masked_weighted_layer_cake,
)


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _nb_root(mask, costs, fanout, depth, buf):
        size = mask.shape[0]
        leaf = costs[depth]
        for i in range(size):
            buf[i] = leaf if mask[i] else 0.0
        for lvl in range(depth - 1, -1, -1):
            size //= fanout
            own = costs[lvl]
            for a in range(size):
                s = 0.0
                base = a * fanout
                for b in range(fanout):
                    s += buf[base + b]
                if s > 0.0:
                    buf[a] = own if own <= s * (1.0 + TIE_RTOL) else s
                else:
                    buf[a] = 0.0
        return buf[0]

    @njit(cache=True)
    def _nb_nodes_acc(mask, costs, fanout, depth, offsets, scale, out):
        # adds scale * (content of mask & Q) to out[Q] for every node Q
        start = offsets[depth]
        size = mask.shape[0]
        leaf = costs[depth]
        tmp = np.empty(offsets[depth + 1])
        for i in range(size):
            tmp[start + i] = leaf if mask[i] else 0.0
        for lvl in range(depth - 1, -1, -1):
            lo = offsets[lvl]
            hi = offsets[lvl + 1]
            own = costs[lvl]
            for a in range(hi - lo):
                s = 0.0
                base = hi + a * fanout
                for b in range(fanout):
                    s += tmp[base + b]
                if s > 0.0:
                    tmp[lo + a] = own if own <= s * (1.0 + TIE_RTOL) else s
                else:
                    tmp[lo + a] = 0.0
        for i in range(tmp.shape[0]):
            out[i] += scale * tmp[i]

    @njit(cache=True)
    def _nb_dp_root(masks, costs, fanout, depth):
        k = masks.shape[0]
        out = np.empty(k)
        buf = np.empty(masks.shape[1])
        for r in range(k):
            out[r] = _nb_root(masks[r], costs, fanout, depth, buf)
        return out

    @njit(cache=True)
    def _nb_dp_nodes(masks, costs, fanout, depth, offsets):
        k = masks.shape[0]
        out = np.zeros((k, offsets[depth + 1]))
        for r in range(k):
            _nb_nodes_acc(masks[r], costs, fanout, depth, offsets, 1.0, out[r])
        return out

    @njit(cache=True)
    def _nb_layer_cake_nodes(f, levels, steps, costs, fanout, depth, offsets):
        out = np.zeros(offsets[depth + 1])
        mask = np.empty(f.shape[0], dtype=np.bool_)
        for i in range(levels.shape[0]):
            for c in range(f.shape[0]):
                mask[c] = f[c] >= levels[i]
            _nb_nodes_acc(mask, costs, fanout, depth, offsets, steps[i], out)
        return out

    @njit(cache=True)
    def _nb_weighted_layer_cake_nodes(
        f, w, levels, steps, wlevels, wsteps, costs, fanout, depth, offsets
    ):
        out = np.zeros(offsets[depth + 1])
        mask = np.empty(f.shape[0], dtype=np.bool_)
        for i in range(levels.shape[0]):
            top = 0.0
            for c in range(f.shape[0]):
                if f[c] >= levels[i] and w[c] > top:
                    top = w[c]
            for j in range(wlevels.shape[0]):
                if wlevels[j] > top:
                    break
                for c in range(f.shape[0]):
                    mask[c] = f[c] >= levels[i] and w[c] >= wlevels[j]
                _nb_nodes_acc(
                    mask, costs, fanout, depth, offsets, steps[i] * wsteps[j], out
                )
        return out

    @njit(cache=True)
    def _nb_masked_layer_cake(f, masks, levels, steps, costs, fanout, depth):
        m = masks.shape[0]
        size = f.shape[0]
        out = np.zeros(m)
        buf = np.empty(size)
        sub = np.empty(size, dtype=np.bool_)
        for r in range(m):
            acc = 0.0
            for i in range(levels.shape[0]):
                hit = False
                for c in range(size):
                    sub[c] = masks[r, c] and f[c] >= levels[i]
                    hit = hit or sub[c]
                if not hit:
                    break
                acc += steps[i] * _nb_root(sub, costs, fanout, depth, buf)
            out[r] = acc
        return out

    @njit(cache=True)
    def _nb_masked_weighted_layer_cake(
        f, w, masks, levels, steps, wlevels, wsteps, costs, fanout, depth
    ):
        m = masks.shape[0]
        size = f.shape[0]
        out = np.zeros(m)
        buf = np.empty(size)
        sub = np.empty(size, dtype=np.bool_)
        for r in range(m):
            acc = 0.0
            for i in range(levels.shape[0]):
                top = 0.0
                for c in range(size):
                    if masks[r, c] and f[c] >= levels[i] and w[c] > top:
                        top = w[c]
                if top == 0.0:
                    break
                inner = 0.0
                for j in range(wlevels.shape[0]):
                    if wlevels[j] > top:
                        break
                    for c in range(size):
                        sub[c] = masks[r, c] and f[c] >= levels[i] and w[c] >= wlevels[j]
                    inner += wsteps[j] * _nb_root(sub, costs, fanout, depth, buf)
                acc += steps[i] * inner
            out[r] = acc
        return out

    def nb_dp_root(masks, costs, fanout, depth):
        masks = np.ascontiguousarray(np.atleast_2d(masks), dtype=np.bool_)
        return _nb_dp_root(masks, costs, fanout, depth)

    def nb_dp_nodes(masks, costs, fanout, depth):
        masks = np.ascontiguousarray(np.atleast_2d(masks), dtype=np.bool_)
        return _nb_dp_nodes(masks, costs, fanout, depth, level_offsets(fanout, depth))

    def nb_layer_cake_nodes(f, costs, fanout, depth):
        levels, steps = _thresholds(f)
        return _nb_layer_cake_nodes(
            f, levels, steps, costs, fanout, depth, level_offsets(fanout, depth)
        )

    def nb_weighted_layer_cake_nodes(f, w, costs, fanout, depth):
        levels, steps = _thresholds(f)
        wlevels, wsteps = _thresholds(w)
        return _nb_weighted_layer_cake_nodes(
            f, w, levels, steps, wlevels, wsteps, costs, fanout, depth,
            level_offsets(fanout, depth),
        )

    def nb_masked_layer_cake(f, masks, costs, fanout, depth):
        masks = np.ascontiguousarray(np.atleast_2d(masks), dtype=np.bool_)
        levels, steps = _thresholds(f)
        return _nb_masked_layer_cake(f, masks, levels, steps, costs, fanout, depth)

    def nb_masked_weighted_layer_cake(f, w, masks, costs, fanout, depth):
        masks = np.ascontiguousarray(np.atleast_2d(masks), dtype=np.bool_)
        levels, steps = _thresholds(f)
        wlevels, wsteps = _thresholds(w)
        return _nb_masked_weighted_layer_cake(
            f, w, masks, levels, steps, wlevels, wsteps, costs, fanout, depth
        )

    NUMBA = SimpleNamespace(
        name="numba",
        dp_root=nb_dp_root,
        dp_nodes=nb_dp_nodes,
        layer_cake_nodes=nb_layer_cake_nodes,
        weighted_layer_cake_nodes=nb_weighted_layer_cake_nodes,
        masked_layer_cake=nb_masked_layer_cake,
        masked_weighted_layer_cake=nb_masked_weighted_layer_cake,
    )
else:  # pragma: no cover
    NUMBA = None


def get_backend(name: str | None = None) -> SimpleNamespace:
    """Return a kernel backend by name, or the default one when ``name`` is None."""
    if name is None:
        return NUMBA if (NUMBA is not None and not _flag_disabled()) else NUMPY
    if name == "numpy":
        return NUMPY
    if name == "numba":
        if NUMBA is None:
            raise RuntimeError("numba is not installed")
        return NUMBA
    raise ValueError(f"unknown backend {name!r}")


def active_backend() -> str:
    return get_backend().name
