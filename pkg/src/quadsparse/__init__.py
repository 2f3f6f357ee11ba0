"""Sparse quadtree-tile representations of 2-D spatial densities.

A density on a ``2^k x 2^k`` grid is stored as a few weighted tiles of a
quadtree; each tile contributes a uniform density over its cells.  Fitting
runs a smoothed histogram through an l1 path, a non-negative refit, a hard
threshold and a normalization.  Queries and set operations work on the
tile coefficients directly.
"""

from .algebra import OpStats, eval_point, eval_xy, intersect, region_sum, tv_distance, union, unique_values
from .density import SparseDensity, hard_threshold, normalize
from .errors import (
    ContractError,
    DegenerateDensityError,
    DocumentParseError,
    EmptyDataError,
    GridArgumentError,
    PointsFormatError,
    QuadsparseError,
    SolverError,
)
from .fit import FitConfig, cv_select, fit_density, lasso_path, nnls_refit
from .grid import GridDensity, GridSpec, TileId, embed_points
from .persistence import load, save
from .smoother import KdeConfig, gaussian_kde

__version__ = "0.1.0"

__all__ = [
    "ContractError", "DegenerateDensityError", "DocumentParseError", "EmptyDataError",
    "FitConfig", "GridArgumentError", "GridDensity", "GridSpec", "KdeConfig", "OpStats",
    "PointsFormatError", "QuadsparseError", "SolverError", "SparseDensity", "TileId",
    "cv_select", "embed_points", "eval_point", "eval_xy", "fit_density", "gaussian_kde",
    "hard_threshold", "intersect", "lasso_path", "load", "nnls_refit", "normalize",
    "region_sum", "save", "tv_distance", "union", "unique_values",
]
