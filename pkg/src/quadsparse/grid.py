"""Quadtree tile arithmetic and the 2^k x 2^k cell lattice.

Cells are linearized row-major: cell ``i`` has column ``i % 2**k`` and row
``i // 2**k``. Row 0 sits at ``y_min`` and column 0 at ``x_min``.

A tile ``TileId(m0, m1, m2)`` at zoom ``m0`` covers the square block of
``2**(k - m0)`` cells per side whose column index is ``m1`` and row index is
``m2`` on the coarser ``2**m0 x 2**m0`` lattice.  Zoom 0 is the single root tile,
zoom ``k`` the individual cells.

Every tile also has a global integer index, ``level_offset(m0) + m2 * 2**m0 +
m1``, which enumerates the whole dictionary in ``(m0, m2, m1)`` order.
"""

from __future__ import annotations

import csv
import enum
import functools
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyDataError, GridArgumentError, PointsFormatError

log = logging.getLogger(__name__)

__all__ = [
    "TileId",
    "TileRelation",
    "GridSpec",
    "GridDensity",
    "tile_of",
    "ancestors",
    "tile_relation",
    "tile_cell_count",
    "dictionary_size",
    "level_offset",
    "tile_index",
    "tile_from_index",
    "tile_arrays",
    "rect_cell_overlap",
    "embed_points",
    "read_points_csv",
]


@functools.total_ordering
@dataclass(frozen=True, slots=True)
class TileId:
    """A quadtree tile: zoom level ``m0``, column ``m1``, row ``m2``."""

    m0: int
    m1: int
    m2: int

    def __post_init__(self):
        if self.m0 < 0:
            raise GridArgumentError(f"negative zoom level {self.m0}")
        side = 1 << self.m0
        if not (0 <= self.m1 < side and 0 <= self.m2 < side):
            raise GridArgumentError(
                f"tile index ({self.m1}, {self.m2}) outside zoom {self.m0}"
            )

    @property
    def sort_key(self) -> tuple[int, int, int]:
        return (self.m0, self.m2, self.m1)

    def __lt__(self, other):
        if not isinstance(other, TileId):
            return NotImplemented
        return self.sort_key < other.sort_key

    def parent(self) -> TileId:
        if self.m0 == 0:
            raise GridArgumentError("the root tile has no parent")
        return TileId(self.m0 - 1, self.m1 >> 1, self.m2 >> 1)

    def children(self) -> list[TileId]:
        m0, c, r = self.m0 + 1, 2 * self.m1, 2 * self.m2
        return [TileId(m0, c, r), TileId(m0, c + 1, r),
                TileId(m0, c, r + 1), TileId(m0, c + 1, r + 1)]

    def cell_range(self, k: int) -> tuple[int, int, int, int]:
        """Inclusive ``(c0, c1, r0, r1)`` block of cells covered at depth k."""
        _check_zoom(self.m0, k)
        h = 1 << (k - self.m0)
        return (self.m1 * h, self.m1 * h + h - 1, self.m2 * h, self.m2 * h + h - 1)

    def __repr__(self):
        return f"T({self.m0},{self.m1},{self.m2})"


ROOT = TileId(0, 0, 0)


class TileRelation(enum.Enum):
    EQUAL = "equal"
    A_CONTAINS_B = "a_contains_b"
    B_CONTAINS_A = "b_contains_a"
    DISJOINT = "disjoint"


def _check_zoom(m0: int, k: int) -> None:
    if k < 0:
        raise GridArgumentError(f"grid depth must be >= 0, got {k}")
    if not 0 <= m0 <= k:
        raise GridArgumentError(f"zoom {m0} outside [0, {k}]")


def _check_cell(col: int, row: int, k: int) -> None:
    side = 1 << k
    if not (0 <= col < side and 0 <= row < side):
        raise GridArgumentError(f"cell ({col}, {row}) outside {side}x{side} grid")


def tile_of(col: int, row: int, m0: int, k: int) -> TileId:
    """The zoom-``m0`` tile containing cell ``(col, row)``."""
    _check_zoom(m0, k)
    _check_cell(col, row, k)
    shift = k - m0
    return TileId(m0, col >> shift, row >> shift)


def ancestors(col: int, row: int, k: int) -> list[TileId]:
    """All k+1 tiles containing a cell, ordered root first."""
    _check_cell(col, row, k)
    return [TileId(m0, col >> (k - m0), row >> (k - m0)) for m0 in range(k + 1)]


def tile_relation(a: TileId, b: TileId) -> TileRelation:
    if a.m0 <= b.m0:
        d = b.m0 - a.m0
        if (b.m1 >> d, b.m2 >> d) == (a.m1, a.m2):
            return TileRelation.EQUAL if d == 0 else TileRelation.A_CONTAINS_B
    else:
        d = a.m0 - b.m0
        if (a.m1 >> d, a.m2 >> d) == (b.m1, b.m2):
            return TileRelation.B_CONTAINS_A
    return TileRelation.DISJOINT


def contains(a: TileId, b: TileId) -> bool:
    """True when tile ``a`` contains (or equals) tile ``b``."""
    if a.m0 > b.m0:
        return False
    d = b.m0 - a.m0
    return (b.m1 >> d) == a.m1 and (b.m2 >> d) == a.m2


def tile_cell_count(t: TileId, k: int) -> int:
    _check_zoom(t.m0, k)
    return 1 << (2 * (k - t.m0))


def dictionary_size(k: int) -> int:
    """Number of tiles over all zoom levels 0..k."""
    if k < 0:
        raise GridArgumentError(f"grid depth must be >= 0, got {k}")
    return ((1 << (2 * (k + 1))) - 1) // 3


def level_offset(m0: int) -> int:
    """Global index of the first tile at zoom ``m0``."""
    return ((1 << (2 * m0)) - 1) // 3


def tile_index(t: TileId) -> int:
    return level_offset(t.m0) + (t.m2 << t.m0) + t.m1


def tile_from_index(j: int) -> TileId:
    if j < 0:
        raise GridArgumentError(f"negative tile index {j}")
    m0 = 0
    while level_offset(m0 + 1) <= j:
        m0 += 1
    local = j - level_offset(m0)
    return TileId(m0, local & ((1 << m0) - 1), local >> m0)


@functools.lru_cache(maxsize=16)
def tile_arrays(k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(m0, m1, m2)`` int64 arrays for every tile, in global index order."""
    m0s, m1s, m2s = [], [], []
    for m0 in range(k + 1):
        side = 1 << m0
        rows, cols = np.divmod(np.arange(side * side, dtype=np.int64), side)
        m0s.append(np.full(side * side, m0, dtype=np.int64))
        m1s.append(cols)
        m2s.append(rows)
    out = tuple(np.concatenate(a) for a in (m0s, m1s, m2s))
    for a in out:
        a.setflags(write=False)
    return out


def _check_rect(rect: Sequence[int], k: int) -> tuple[int, int, int, int]:
    c0, c1, r0, r1 = (int(v) for v in rect)
    side = 1 << k
    if not (0 <= c0 <= c1 < side and 0 <= r0 <= r1 < side):
        raise GridArgumentError(f"rectangle {tuple(rect)} not inside {side}x{side} grid")
    return c0, c1, r0, r1


def rect_cell_overlap(t: TileId, rect: Sequence[int], k: int) -> int:
    """Number of cells shared by tile ``t`` and inclusive rectangle ``(c0, c1, r0, r1)``."""
    c0, c1, r0, r1 = _check_rect(rect, k)
    tc0, tc1, tr0, tr1 = t.cell_range(k)
    w = min(c1, tc1) - max(c0, tc0) + 1
    h = min(r1, tr1) - max(r0, tr0) + 1
    return w * h if w > 0 and h > 0 else 0


@dataclass(frozen=True)
class GridSpec:
    """Grid depth plus the real-world box the 2^k x 2^k lattice covers."""

    k: int
    bounds: tuple[float, float, float, float]  # x_min, x_max, y_min, y_max

    def __post_init__(self):
        if not isinstance(self.k, (int, np.integer)) or self.k < 0:
            raise GridArgumentError(f"grid depth must be a non-negative integer, got {self.k!r}")
        x0, x1, y0, y1 = (float(v) for v in self.bounds)
        if not all(math.isfinite(v) for v in (x0, x1, y0, y1)):
            raise GridArgumentError(f"non-finite bounds {self.bounds}")
        if not (x0 < x1 and y0 < y1):
            raise GridArgumentError(f"degenerate bounds {self.bounds}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "bounds", (x0, x1, y0, y1))

    @property
    def side(self) -> int:
        return 1 << self.k

    @property
    def n(self) -> int:
        return 1 << (2 * self.k)

    @property
    def cell_width(self) -> float:
        return (self.bounds[1] - self.bounds[0]) / self.side

    @property
    def cell_height(self) -> float:
        return (self.bounds[3] - self.bounds[2]) / self.side

    @classmethod
    def covering(cls, points, k: int) -> GridSpec:
        """Smallest square box over the points' bounding box, padded on the max side."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        if len(pts) == 0:
            raise EmptyDataError("cannot derive bounds from zero points")
        x0, y0 = pts.min(axis=0)
        x1, y1 = pts.max(axis=0)
        width = max(x1 - x0, y1 - y0)
        if width <= 0:
            width = 1.0
        return cls(k, (x0, x0 + width, y0, y0 + width))

    def cells_of(self, xy) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized ``(col, row, inside)`` for an ``(m, 2)`` array of points.

        Cells are half-open except the last one on each axis, which is closed.
        """
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        x0, x1, y0, y1 = self.bounds
        fx = (xy[:, 0] - x0) / (x1 - x0) * self.side
        fy = (xy[:, 1] - y0) / (y1 - y0) * self.side
        inside = (xy[:, 0] >= x0) & (xy[:, 0] <= x1) & (xy[:, 1] >= y0) & (xy[:, 1] <= y1)
        col = np.clip(np.floor(np.where(inside, fx, 0.0)), 0, self.side - 1).astype(np.int64)
        row = np.clip(np.floor(np.where(inside, fy, 0.0)), 0, self.side - 1).astype(np.int64)
        return col, row, inside

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        col, row, inside = self.cells_of([[x, y]])
        if not inside[0]:
            raise GridArgumentError(f"point ({x}, {y}) outside bounds {self.bounds}")
        return int(col[0]), int(row[0])

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """x and y of every cell midpoint, each of length n in cell order."""
        idx = np.arange(self.n)
        row, col = np.divmod(idx, self.side)
        return (self.bounds[0] + (col + 0.5) * self.cell_width,
                self.bounds[2] + (row + 0.5) * self.cell_height)

    def tile_box(self, t: TileId) -> tuple[float, float, float, float]:
        """Data-unit ``(x_min, x_max, y_min, y_max)`` of a tile."""
        _check_zoom(t.m0, self.k)
        x0, x1, y0, y1 = self.bounds
        tw = (x1 - x0) / (1 << t.m0)
        th = (y1 - y0) / (1 << t.m0)
        return (x0 + t.m1 * tw, x0 + (t.m1 + 1) * tw, y0 + t.m2 * th, y0 + (t.m2 + 1) * th)


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Dense probability mass per cell, length ``4**k``, row-major."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.spec.n,):
            raise GridArgumentError(f"expected {self.spec.n} values, got shape {v.shape}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def image(self) -> np.ndarray:
        """Values as a ``(side, side)`` array indexed ``[row, col]``."""
        return self.values.reshape(self.spec.side, self.spec.side)

    def total(self) -> float:
        return float(self.values.sum())


def embed_points(points, spec: GridSpec) -> GridDensity:
    """Normalized histogram of the points over the grid cells.

    Points outside ``spec.bounds`` are dropped (and logged).
    """
    col, row, inside = spec.cells_of(points)
    dropped = int((~inside).sum())
    kept = len(inside) - dropped
    if kept == 0:
        raise EmptyDataError(f"none of {len(inside)} points fall inside {spec.bounds}")
    if dropped:
        log.info("dropped %d of %d points outside the grid bounds", dropped, len(inside))
    counts = np.bincount(row[inside] * spec.side + col[inside], minlength=spec.n)
    return GridDensity(spec, counts / kept)


_COLUMN_PAIRS = (("x", "y"), ("lon", "lat"))


def read_points_csv(path: str | Path) -> np.ndarray:
    """Read an ``(m, 2)`` array of points from a CSV with ``x,y`` or ``lon,lat`` columns."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PointsFormatError("empty file", line=1) from None
        names = [h.strip().lower() for h in header]
        for xname, yname in _COLUMN_PAIRS:
            if xname in names and yname in names:
                xi, yi = names.index(xname), names.index(yname)
                break
        else:
            raise PointsFormatError(
                f"header must contain x,y or lon,lat columns, got {header}", line=1
            )
        rows: list[tuple[float, float]] = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            try:
                x, y = float(rec[xi]), float(rec[yi])
            except (IndexError, ValueError):
                raise PointsFormatError(f"malformed row {rec!r}", line=lineno) from None
            if not (math.isfinite(x) and math.isfinite(y)):
                raise PointsFormatError(f"non-finite coordinate in {rec!r}", line=lineno)
            rows.append((x, y))
    return np.array(rows, dtype=float).reshape(-1, 2)


def iter_cells(k: int) -> Iterable[tuple[int, int]]:
    side = 1 << k
    for row in range(side):
        for col in range(side):
            yield col, row
