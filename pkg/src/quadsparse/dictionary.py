"""The weighted tile-membership operator, applied without materializing it.

Column ``j`` of the operator is the indicator of tile ``j`` scaled by
``|tile|**-alpha``.  At ``alpha = 0`` the columns are plain indicators; at
``alpha = 1`` each column is the uniform density over its tile, so the grid
mass of ``matvec(b)`` equals ``sum(b)``.

Coefficient vectors are dense float arrays of length ``dictionary_size(k)`` in
global tile order, or mappings ``TileId -> weight``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import GridArgumentError
from .grid import TileId, dictionary_size, level_offset, tile_arrays, tile_index

__all__ = [
    "DictionarySpec",
    "column_weight",
    "column_weights",
    "column_sq_norm",
    "column_sq_norms",
    "level_weight",
    "coeffs_to_array",
    "array_to_coeffs",
    "matvec",
    "transpose_matvec",
    "tile_sums",
]


@dataclass(frozen=True)
class DictionarySpec:
    k: int
    alpha: float

    def __post_init__(self):
        if self.k < 0:
            raise GridArgumentError(f"grid depth must be >= 0, got {self.k}")
        if not 0.0 <= self.alpha <= 1.0:
            raise GridArgumentError(f"alpha must lie in [0, 1], got {self.alpha}")

    @property
    def size(self) -> int:
        return dictionary_size(self.k)


def level_weight(m0: int, alpha: float, k: int) -> float:
    """``|tile|**-alpha`` for a tile at zoom ``m0``."""
    return 4.0 ** (-alpha * (k - m0))


def column_weight(t: TileId, alpha: float, k: int) -> float:
    if t.m0 > k:
        raise GridArgumentError(f"zoom {t.m0} deeper than grid depth {k}")
    return level_weight(t.m0, alpha, k)


def column_sq_norm(t: TileId, alpha: float, k: int) -> float:
    """Squared norm of a column: ``|tile|**(1 - 2 alpha)``."""
    if t.m0 > k:
        raise GridArgumentError(f"zoom {t.m0} deeper than grid depth {k}")
    return 4.0 ** ((1.0 - 2.0 * alpha) * (k - t.m0))


def column_weights(k: int, alpha: float) -> np.ndarray:
    m0 = tile_arrays(k)[0]
    per_level = np.array([level_weight(m, alpha, k) for m in range(k + 1)])
    return per_level[m0]


def column_sq_norms(k: int, alpha: float) -> np.ndarray:
    m0 = tile_arrays(k)[0]
    per_level = np.array([4.0 ** ((1.0 - 2.0 * alpha) * (k - m)) for m in range(k + 1)])
    return per_level[m0]


def coeffs_to_array(coeffs: Mapping[TileId, float], k: int) -> np.ndarray:
    b = np.zeros(dictionary_size(k))
    for t, v in coeffs.items():
        if t.m0 > k:
            raise GridArgumentError(f"tile {t} deeper than grid depth {k}")
        b[tile_index(t)] = v
    return b


def array_to_coeffs(b: np.ndarray, k: int) -> dict[TileId, float]:
    m0, m1, m2 = tile_arrays(k)
    nz = np.flatnonzero(b)
    return {TileId(int(m0[j]), int(m1[j]), int(m2[j])): float(b[j]) for j in nz}


def _as_array(b, k: int) -> np.ndarray:
    if isinstance(b, Mapping):
        return coeffs_to_array(b, k)
    b = np.asarray(b, dtype=float)
    if b.shape != (dictionary_size(k),):
        raise GridArgumentError(f"expected {dictionary_size(k)} coefficients, got {b.shape}")
    return b


def matvec(b, alpha: float, k: int) -> np.ndarray:
    """Grid vector ``D b``: each cell sums the weighted coefficients of its k+1 ancestors.

    Levels are accumulated root first.
    """
    b = _as_array(b, k)
    side = 1 << k
    out = np.zeros((side, side))
    for m0 in range(k + 1):
        s, h = 1 << m0, 1 << (k - m0)
        off = level_offset(m0)
        block = b[off:off + s * s].reshape(s, s) * level_weight(m0, alpha, k)
        if not block.any():
            continue
        out.reshape(s, h, s, h)[...] += block[:, None, :, None]
    return out.ravel()


def tile_sums(r: np.ndarray, k: int) -> np.ndarray:
    """Sum of a grid vector over every tile, aggregated bottom-up from the leaves."""
    side = 1 << k
    r = np.asarray(r, dtype=float)
    if r.shape != (side * side,):
        raise GridArgumentError(f"expected a grid vector of length {side * side}, got {r.shape}")
    levels = [r.reshape(side, side)]
    for m0 in range(k - 1, -1, -1):
        s = 1 << m0
        levels.append(levels[-1].reshape(s, 2, s, 2).sum(axis=(1, 3)))
    return np.concatenate([lvl.ravel() for lvl in reversed(levels)])


def transpose_matvec(r: np.ndarray, alpha: float, k: int) -> np.ndarray:
    """``D^T r`` for every tile, in global tile order."""
    return tile_sums(r, k) * column_weights(k, alpha)
