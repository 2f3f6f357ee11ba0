"""Canonical text documents for sparse densities, plus grid and polygon exports.

A density document is JSON laid out one tile per line::

    {
      "format_version": 1,
      "k": 2,
      "bounds": [0, 1, 0, 1],
      "alpha": 0.5,
      "delta": 0.001,
      "lambda_star": null,
      "tiles": [
        [0, 0, 0, 1]
      ]
    }

Each tile row is ``[m0, m1, m2, weight]``, sorted by ``(m0, m2, m1)``.  Floats
are written with 17 significant digits so loading recovers every bit.
"""

from __future__ import annotations

import json
import math
from typing import Any

from .density import SparseDensity
from .errors import DocumentParseError, GridArgumentError
from .grid import GridSpec, TileId, tile_cell_count

__all__ = ["FORMAT_VERSION", "save", "load", "export_grid", "export_tiles"]

FORMAT_VERSION = 1
META_KEYS = ("alpha", "delta", "lambda_star")


def _num(v: float) -> str:
    return format(float(v), ".17g")


def _meta(v: Any) -> str:
    return "null" if v is None else _num(v)


def save(d: SparseDensity, metadata: dict | None = None) -> str:
    """Serialize to the canonical document; identical inputs give identical bytes."""
    meta = dict(d.metadata)
    if metadata:
        meta.update(metadata)
    lines = [
        "{",
        f'  "format_version": {FORMAT_VERSION},',
        f'  "k": {d.k},',
        '  "bounds": [' + ", ".join(_num(b) for b in d.spec.bounds) + "],",
    ]
    for key in META_KEYS:
        lines.append(f'  "{key}": {_meta(meta.get(key))},')
    rows = [f"    [{t.m0}, {t.m1}, {t.m2}, {_num(w)}]" for t, w in d.coeffs.items()]
    if rows:
        lines.append('  "tiles": [')
        lines.append(",\n".join(rows))
        lines.append("  ]")
    else:
        lines.append('  "tiles": []')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _tile_line(text: str, i: int) -> int | None:
    """Line number of tile row ``i`` when the document uses the canonical layout."""
    for n, line in enumerate(text.splitlines(), start=1):
        if line.strip().startswith('"tiles"'):
            return n + 1 + i
    return None


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def load(text: str) -> SparseDensity:
    """Parse and validate a density document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentParseError(exc.msg, line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise DocumentParseError("document must be a JSON object")
    missing = {"format_version", "k", "bounds", "tiles"} - doc.keys()
    if missing:
        raise DocumentParseError(f"missing fields {sorted(missing)}")
    if doc["format_version"] != FORMAT_VERSION:
        raise DocumentParseError(f"unsupported format_version {doc['format_version']!r}")
    k, bounds = doc["k"], doc["bounds"]
    if not _is_int(k) or k < 0:
        raise DocumentParseError(f"k must be a non-negative integer, got {k!r}")
    if not (isinstance(bounds, list) and len(bounds) == 4 and all(_is_num(b) for b in bounds)):
        raise DocumentParseError(f"bounds must be four finite numbers, got {bounds!r}")
    try:
        spec = GridSpec(k, tuple(float(b) for b in bounds))
    except GridArgumentError as exc:
        raise DocumentParseError(str(exc)) from None
    meta = {}
    for key in META_KEYS:
        v = doc.get(key)
        if v is None:
            continue
        if not _is_num(v):
            raise DocumentParseError(f"{key} must be a number or null, got {v!r}")
        meta[key] = float(v)
    tiles = doc["tiles"]
    if not isinstance(tiles, list):
        raise DocumentParseError("tiles must be a list")
    coeffs: dict[TileId, float] = {}
    prev = None
    for i, row in enumerate(tiles):
        where = _tile_line(text, i)

        def fail(msg, i=i, where=where):
            raise DocumentParseError(f"tile {i}: {msg}", line=where)

        if not (isinstance(row, list) and len(row) == 4):
            fail(f"expected [m0, m1, m2, weight], got {row!r}")
        m0, m1, m2, w = row
        if not all(_is_int(v) for v in (m0, m1, m2)):
            fail(f"tile indices must be integers, got {row[:3]!r}")
        if not _is_num(w) or w == 0:
            fail(f"weight must be finite and nonzero, got {w!r}")
        if not 0 <= m0 <= k:
            fail(f"zoom {m0} outside [0, {k}]")
        try:
            t = TileId(m0, m1, m2)
        except GridArgumentError as exc:
            fail(str(exc))
        if prev is not None:
            if t == prev:
                fail(f"duplicate tile {t}")
            if t < prev:
                fail(f"tile {t} out of canonical (m0, m2, m1) order")
        coeffs[t] = float(w)
        prev = t
    return SparseDensity(spec, coeffs, meta)


def export_grid(d: SparseDensity) -> str:
    """CSV ``col,row,value`` with one line per cell in row-major order."""
    values = d.grid_values()
    side = d.spec.side
    out = ["col,row,value"]
    for i, v in enumerate(values):
        row, col = divmod(i, side)
        out.append(f"{col},{row},{_num(v)}")
    return "\n".join(out) + "\n"


def export_tiles(d: SparseDensity) -> str:
    """GeoJSON FeatureCollection with one rectangle per nonzero tile, in data units."""
    features = []
    for t, w in d.coeffs.items():
        x0, x1, y0, y1 = d.spec.tile_box(t)
        features.append({
            "type": "Feature",
            "geometry": {
                "type": "Polygon",
                "coordinates": [[[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]],
            },
            "properties": {
                "m0": t.m0, "m1": t.m1, "m2": t.m2,
                "weight": w,
                "value": w / tile_cell_count(t, d.k),
            },
        })
    return json.dumps({"type": "FeatureCollection", "features": features}, indent=1) + "\n"
