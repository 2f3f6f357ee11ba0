"""Sparse tile-coefficient densities and the coefficient-vector post-processing steps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping

import numpy as np

from .errors import DegenerateDensityError, GridArgumentError
from .dictionary import matvec
from .grid import GridSpec, TileId, dictionary_size, tile_index

__all__ = ["SparseDensity", "hard_threshold", "normalize"]


@dataclass(frozen=True, eq=False)
class SparseDensity:
    """A density ``D^(1) b`` stored as its nonzero tile coefficients.

    ``coeffs`` is kept in canonical ``(m0, m2, m1)`` order.  ``metadata``
    carries fit parameters (alpha, delta, lambda_star, ...) and is optional.
    """

    spec: GridSpec
    coeffs: Mapping[TileId, float]
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        k = self.spec.k
        items = []
        for t, v in self.coeffs.items():
            if not isinstance(t, TileId):
                raise GridArgumentError(f"coefficient key {t!r} is not a TileId")
            if t.m0 > k:
                raise GridArgumentError(f"tile {t} deeper than grid depth {k}")
            v = float(v)
            if not math.isfinite(v):
                raise GridArgumentError(f"non-finite weight {v} for tile {t}")
            if v != 0.0:
                items.append((t, v))
        items.sort(key=lambda tv: tv[0].sort_key)
        object.__setattr__(self, "coeffs", MappingProxyType(dict(items)))
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))
        object.__setattr__(self, "_idx", np.array([tile_index(t) for t, _ in items], dtype=np.int64))
        object.__setattr__(self, "_w", np.array([v for _, v in items], dtype=float))

    @property
    def k(self) -> int:
        return self.spec.k

    @property
    def nnz(self) -> int:
        return len(self.coeffs)

    @property
    def tile_indices(self) -> np.ndarray:
        """Global tile indices of the nonzero coefficients, ascending."""
        return self._idx

    @property
    def weights(self) -> np.ndarray:
        return self._w

    def total(self) -> float:
        return float(self._w.sum())

    def to_array(self) -> np.ndarray:
        b = np.zeros(dictionary_size(self.k))
        b[self._idx] = self._w
        return b

    def grid_values(self) -> np.ndarray:
        """Dense cell values; O(n k), intended for export, testing and TV."""
        return matvec(self.to_array(), 1.0, self.k)

    def with_metadata(self, **extra) -> SparseDensity:
        return SparseDensity(self.spec, self.coeffs, {**self.metadata, **extra})

    def __eq__(self, other):
        if not isinstance(other, SparseDensity):
            return NotImplemented
        return (self.spec == other.spec and dict(self.coeffs) == dict(other.coeffs)
                and dict(self.metadata) == dict(other.metadata))

    __hash__ = None

    def __repr__(self):
        return f"SparseDensity(k={self.k}, nnz={self.nnz}, bounds={self.spec.bounds})"


def hard_threshold(b: Mapping[TileId, float], delta: float) -> dict[TileId, float]:
    """Zero every coefficient whose magnitude is at most ``delta * ||b||_1``."""
    if not 0.0 <= delta < 1.0:
        raise GridArgumentError(f"delta must lie in [0, 1), got {delta}")
    cut = delta * sum(abs(v) for v in b.values())
    return {t: v for t, v in b.items() if abs(v) > cut}


def normalize(b: Mapping[TileId, float]) -> dict[TileId, float]:
    """Divide by the coefficient sum, which is the total grid mass under ``D^(1)``."""
    total = math.fsum(b.values())
    if not b or not total > 0.0:
        raise DegenerateDensityError(f"cannot normalize coefficients with total mass {total!r}")
    return {t: v / total for t, v in b.items()}
