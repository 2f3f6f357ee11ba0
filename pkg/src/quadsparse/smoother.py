"""Initial dense estimate: Gaussian kernel smoothing of a cell histogram."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ContractError, GridArgumentError
from .grid import GridDensity, GridSpec

__all__ = ["KdeConfig", "gaussian_kde", "auto_bandwidth", "point_spread", "resolve_bandwidth"]

TRUNCATE = 4.0
MIN_BANDWIDTH = 0.5


@dataclass(frozen=True)
class KdeConfig:
    """Kernel standard deviations in cell units; ``None`` means choose automatically."""

    bandwidth_x: float | None = None
    bandwidth_y: float | None = None

    def __post_init__(self):
        for bw in (self.bandwidth_x, self.bandwidth_y):
            if bw is not None and not bw >= 0:
                raise GridArgumentError(f"bandwidth must be >= 0, got {bw}")

    @property
    def is_auto(self) -> bool:
        return self.bandwidth_x is None or self.bandwidth_y is None


def auto_bandwidth(count: int, spread_x: float, spread_y: float) -> tuple[float, float]:
    """Silverman-style bandwidth per axis, clamped below at half a cell."""
    if count < 2:
        raise GridArgumentError(f"need at least 2 points for a bandwidth, got {count}")
    factor = 1.06 * count ** -0.2
    return (max(MIN_BANDWIDTH, factor * spread_x), max(MIN_BANDWIDTH, factor * spread_y))


def gaussian_weights(bw: float) -> np.ndarray:
    """Symmetric Gaussian weights at integer offsets ``|d| <= 4 * bw``."""
    radius = int(math.floor(TRUNCATE * bw))
    d = np.arange(-radius, radius + 1)
    return np.exp(-0.5 * (d / bw) ** 2)


def _blur_axis(img: np.ndarray, bw: float, axis: int) -> np.ndarray:
    w = gaussian_weights(bw)
    num = ndimage.correlate1d(img, w, axis=axis, mode="constant", cval=0.0)
    den = ndimage.correlate1d(np.ones(img.shape[axis]), w, mode="constant", cval=0.0)
    shape = [1, 1]
    shape[axis] = -1
    return num / den.reshape(shape)


def gaussian_kde(y: GridDensity, cfg: KdeConfig) -> GridDensity:
    """Separable truncated-Gaussian blur of a normalized histogram.

    Each output cell averages its in-grid neighbours with weights renormalized
    over the part of the kernel that lies inside the grid, so a constant input
    stays constant.  The result is rescaled to total mass 1.
    """
    if cfg.is_auto:
        raise ContractError("gaussian_kde needs explicit bandwidths; resolve them with resolve_bandwidth")
    if abs(y.total() - 1.0) > 1e-9 or (y.values < 0).any():
        raise ContractError(f"input density must be non-negative with mass 1, got {y.total()!r}")
    img = y.image()
    # rows of the image run along y, columns along x
    if cfg.bandwidth_x > 0:
        img = _blur_axis(img, cfg.bandwidth_x, axis=1)
    if cfg.bandwidth_y > 0:
        img = _blur_axis(img, cfg.bandwidth_y, axis=0)
    img = np.maximum(img, 0.0)
    return GridDensity(y.spec, (img / img.sum()).ravel())


def point_spread(points, spec: GridSpec) -> tuple[float, float]:
    """Sample standard deviation of the points per axis, in cell units."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    sx = float(np.std(pts[:, 0], ddof=1)) / spec.cell_width if len(pts) > 1 else 0.0
    sy = float(np.std(pts[:, 1], ddof=1)) / spec.cell_height if len(pts) > 1 else 0.0
    return (sx if math.isfinite(sx) else 0.0, sy if math.isfinite(sy) else 0.0)


def resolve_bandwidth(points, spec: GridSpec, cfg: KdeConfig) -> KdeConfig:
    if not cfg.is_auto:
        return cfg
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    bx, by = auto_bandwidth(len(pts), *point_spread(pts, spec))
    return KdeConfig(cfg.bandwidth_x if cfg.bandwidth_x is not None else bx,
                     cfg.bandwidth_y if cfg.bandwidth_y is not None else by)
