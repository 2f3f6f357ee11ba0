"""Queries and set operations computed directly on sparse tile coefficients.

Any two tiles are nested or disjoint, so the cell values of a sparse density
are constant on the part of each support tile not covered by deeper support
tiles.  The operations below walk the support in depth-first order, keeping
the chain of enclosing support tiles on a stack, which gives O(s) work
(after an O(s log s) sort).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .density import SparseDensity, normalize
from .errors import DegenerateDensityError, GridArgumentError
from .grid import ROOT, GridDensity, GridSpec, TileId, contains, rect_cell_overlap, tile_cell_count

log = logging.getLogger(__name__)

__all__ = [
    "OpStats",
    "eval_point",
    "eval_xy",
    "region_sum",
    "union",
    "intersect",
    "unique_values",
    "tv_distance",
]

DEFAULT_DELTA = 0.001
NEG_TOL = 1e-12


@dataclass
class OpStats:
    """Instrumentation counters; pass one in to observe the work an operation does."""

    lookups: int = 0
    visits: int = 0


def _check_cell(d: SparseDensity, col: int, row: int) -> None:
    side = d.spec.side
    if not (0 <= col < side and 0 <= row < side):
        raise GridArgumentError(f"cell ({col}, {row}) outside {side}x{side} grid")


def eval_point(d: SparseDensity, col: int, row: int, stats: OpStats | None = None) -> float:
    """Density value of one cell from at most k+1 coefficient lookups."""
    _check_cell(d, col, row)
    k = d.k
    coeffs = d.coeffs
    value = 0.0
    for m0 in range(k + 1):
        shift = k - m0
        w = coeffs.get(TileId(m0, col >> shift, row >> shift))
        if stats is not None:
            stats.lookups += 1
        if w is not None:
            value += w / (1 << (2 * shift))
    return value


def eval_xy(d: SparseDensity, x: float, y: float, stats: OpStats | None = None) -> float:
    col, row = d.spec.cell_of(x, y)
    return eval_point(d, col, row, stats)


def region_sum(d: SparseDensity, rect: Sequence[int], stats: OpStats | None = None) -> float:
    """Probability mass of the inclusive cell rectangle ``(c0, c1, r0, r1)``."""
    k = d.k
    parts = []
    for t, w in d.coeffs.items():
        if stats is not None:
            stats.visits += 1
        overlap = rect_cell_overlap(t, rect, k)
        if overlap:
            parts.append(w * overlap / tile_cell_count(t, k))
    if not d.coeffs:
        rect_cell_overlap(ROOT, rect, k)  # still validate the rectangle
    return math.fsum(parts)


def _dfs_key(t: TileId, k: int) -> tuple[int, int]:
    """Sort key placing every tile before its descendants and after its ancestors' siblings."""
    shift = k - t.m0
    return (_morton(t.m1 << shift, t.m2 << shift), t.m0)


def _morton(col: int, row: int) -> int:
    code, bit = 0, 0
    while col or row:
        code |= ((col & 1) << (2 * bit)) | ((row & 1) << (2 * bit + 1))
        col >>= 1
        row >>= 1
        bit += 1
    return code


def _walk(tiles: Sequence[TileId], k: int, stats: OpStats | None):
    """Yield ``(tile, nearest enclosing tile in the set or None)`` in depth-first order."""
    stack: list[TileId] = []
    for t in sorted(tiles, key=lambda t: _dfs_key(t, k)):
        if stats is not None:
            stats.visits += 1
        while stack and not contains(stack[-1], t):
            stack.pop()
            if stats is not None:
                stats.visits += 1
        yield t, (stack[-1] if stack else None)
        stack.append(t)


def _level_values(d: SparseDensity, extra: Sequence[TileId] = (), stats: OpStats | None = None):
    """Value of d on the exclusive region of every tile in supp(d) | extra | {root}.

    Returns ``{tile: (value, parent_in_set)}`` with values accumulated root first.
    """
    k = d.k
    tiles = set(d.coeffs) | set(extra) | {ROOT}
    out: dict[TileId, tuple[float, TileId | None]] = {}
    for t, parent in _walk(tiles, k, stats):
        base = out[parent][0] if parent is not None else 0.0
        w = d.coeffs.get(t)
        out[t] = (base + w / tile_cell_count(t, k) if w is not None else base, parent)
    return out


def unique_values(d: SparseDensity) -> list[float]:
    """Sorted distinct cell values, from the tile hierarchy without enumerating the grid."""
    k = d.k
    levels = _level_values(d)
    covered: dict[TileId, int] = {}
    for t, (_, parent) in levels.items():
        if parent is not None:
            covered[parent] = covered.get(parent, 0) + tile_cell_count(t, k)
    values = {v for t, (v, _) in levels.items() if covered.get(t, 0) < tile_cell_count(t, k)}
    return sorted(values)


def _common_spec(densities: Sequence[SparseDensity]):
    spec = densities[0].spec
    for d in densities[1:]:
        if d.spec != spec:
            raise GridArgumentError(f"grid mismatch: {d.spec} vs {spec}")
    return spec


def _shared_metadata(densities: Sequence[SparseDensity], keys=None) -> dict:
    """Metadata entries present with equal values in every input."""
    first = dict(densities[0].metadata)
    out = {}
    for key, value in first.items():
        if keys is not None and key not in keys:
            continue
        if all(key in d.metadata and d.metadata[key] == value for d in densities[1:]):
            out[key] = value
    return out


def _threshold_renormalize(c: dict[TileId, float], spec: GridSpec, delta: float | None) -> dict[TileId, float]:
    """Drop coefficients with ``|c| <= delta * sum|c|`` and rescale to mass 1.

    A dropped positive coefficient lowers every value in its tile; when signed
    coefficients make that push some value below zero, only the dropped
    negative coefficients are removed.  Renormalization is skipped when the mass
    is already 1 to within 1e-12 so an exact result stays bit-identical.
    """
    c = {t: v for t, v in c.items() if v != 0.0}
    if delta:
        cut = delta * math.fsum(abs(v) for v in c.values())
        kept = {t: v for t, v in c.items() if abs(v) > cut}
        if len(kept) < len(c) and any(v < 0 for v in c.values()):
            probe = SparseDensity(spec, kept)
            if kept and unique_values(probe)[0] < -NEG_TOL:
                kept = {t: v for t, v in c.items() if v > 0 or abs(v) > cut}
        c = kept
    total = math.fsum(c.values())
    if not c or not total > 0.0:
        raise DegenerateDensityError(f"result has no positive mass (total {total!r})")
    if abs(total - 1.0) <= 1e-12:
        return c
    return normalize(c)


def union(entries: Sequence[tuple[SparseDensity, float]], delta: float | None = DEFAULT_DELTA,
          metadata: dict | None = None) -> SparseDensity:
    """Prior-weighted mixture of densities, merged on their coefficient vectors."""
    if not entries:
        raise GridArgumentError("union needs at least one density")
    densities = [d for d, _ in entries]
    priors = [float(p) for _, p in entries]
    spec = _common_spec(densities)
    if min(priors) < 0 or abs(math.fsum(priors) - 1.0) > 1e-9:
        raise GridArgumentError(f"priors must be non-negative and sum to 1, got {priors}")
    merged: dict[TileId, float] = {}
    for d, p in entries:
        if p == 0.0:
            continue
        for t, w in d.coeffs.items():
            merged[t] = merged.get(t, 0.0) + p * w
    c = _threshold_renormalize(merged, spec, delta)
    if metadata is None:
        metadata = _shared_metadata([d for d, p in entries if p > 0])
    return SparseDensity(spec, c, metadata)


def intersect(a: SparseDensity, b: SparseDensity, delta: float | None = DEFAULT_DELTA,
              stats: OpStats | None = None, metadata: dict | None = None) -> SparseDensity:
    """Normalized pointwise product of two densities, solved on the joint support.

    On the exclusive region of each joint-support tile the product is
    ``g = f_a * f_b``; the coefficient of that tile is ``|tile|`` times the jump
    in ``g`` from its nearest enclosing support tile.
    """
    spec = _common_spec([a, b])
    k = spec.k
    tiles = set(a.coeffs) | set(b.coeffs) | {ROOT}
    fa: dict[TileId, float] = {}
    fb: dict[TileId, float] = {}
    g: dict[TileId, float] = {}
    c: dict[TileId, float] = {}
    for t, parent in _walk(tiles, k, stats):
        size = tile_cell_count(t, k)
        base_a = fa[parent] if parent is not None else 0.0
        base_b = fb[parent] if parent is not None else 0.0
        wa, wb = a.coeffs.get(t), b.coeffs.get(t)
        fa[t] = base_a + wa / size if wa is not None else base_a
        fb[t] = base_b + wb / size if wb is not None else base_b
        g[t] = fa[t] * fb[t]
        c[t] = size * (g[t] - (g[parent] if parent is not None else 0.0))
    if not any(v != 0.0 for v in g.values()):
        raise DegenerateDensityError("the densities do not overlap; their product is zero")
    c = _threshold_renormalize(c, spec, delta)
    if metadata is None:
        metadata = _shared_metadata([a, b], keys=("alpha", "delta"))
    return SparseDensity(spec, c, metadata)


def _values(d) -> np.ndarray:
    if isinstance(d, SparseDensity):
        return d.grid_values()
    if isinstance(d, GridDensity):
        return d.values
    raise TypeError(f"expected a SparseDensity or GridDensity, got {type(d).__name__}")


def tv_distance(d, p) -> float:
    """Half the l1 distance between two densities on the same grid."""
    if d.spec != p.spec:
        raise GridArgumentError(f"grid mismatch: {d.spec} vs {p.spec}")
    return 0.5 * float(np.abs(_values(d) - _values(p)).sum())
