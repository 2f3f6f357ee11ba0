"""Sparse density estimation over the quadtree dictionary.

The pipeline is: histogram -> Gaussian smoothing (z) -> l1 regularization path
with cross-validated one-standard-error selection -> non-negative least squares
refit on the selected support with uniform-density columns -> hard threshold ->
normalization.

The l1 stage minimizes ``0.5 * ||z - D b||^2 + lam * ||b||_1`` (the half
scaling puts ``lam_max = max_j |<D_j, z>|``).  Signs are unconstrained there;
non-negativity enters at the refit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .density import SparseDensity, hard_threshold, normalize
from .dictionary import array_to_coeffs, column_weights, matvec, tile_sums
from .errors import ContractError, DegenerateDensityError, GridArgumentError, SolverError
from .grid import GridDensity, GridSpec, TileId, dictionary_size, embed_points, tile_arrays, tile_index
from .smoother import KdeConfig, gaussian_kde, resolve_bandwidth

log = logging.getLogger(__name__)

__all__ = [
    "FitConfig",
    "PathPoint",
    "PathResult",
    "lasso_path",
    "cv_select",
    "nnls_refit",
    "hard_threshold",
    "normalize",
    "fit_density",
    "kkt_violation",
    "nnls_stationarity",
    "lasso_objective",
]

NNLS_TOL = 1e-10
SNAP = 1e-13


@dataclass(frozen=True)
class FitConfig:
    alpha: float = 0.5
    delta: float = 0.001
    n_lambda: int = 100
    lambda_min_ratio: float = 1e-4
    cv_folds: int = 5
    tol: float = 1e-7  # KKT residual, relative to lambda
    max_iter: int = 100_000  # sweeps per lambda
    seed: int = 0
    kde: KdeConfig = field(default_factory=KdeConfig)
    refit_holdout: float = 0.0  # fraction of points reserved for the NNLS refit

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise GridArgumentError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 < self.delta < 1.0:
            raise GridArgumentError(f"delta must lie in (0, 1), got {self.delta}")
        if self.cv_folds < 2:
            raise GridArgumentError(f"need at least 2 CV folds, got {self.cv_folds}")
        if self.n_lambda < 1:
            raise GridArgumentError("n_lambda must be positive")
        if not 0.0 < self.lambda_min_ratio <= 1.0:
            raise GridArgumentError("lambda_min_ratio must lie in (0, 1]")
        if not 0.0 <= self.refit_holdout < 1.0:
            raise GridArgumentError("refit_holdout must lie in [0, 1)")


@dataclass
class PathPoint:
    lam: float
    indices: np.ndarray  # global tile indices of nonzero coefficients
    values: np.ndarray
    sweeps: int = 0
    cv_mean: float = math.nan
    cv_se: float = math.nan

    @property
    def nnz(self) -> int:
        return len(self.indices)


@dataclass
class PathResult:
    k: int
    alpha: float
    points: list[PathPoint]
    selected_index: int | None = None

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.points])

    def coef_array(self, i: int) -> np.ndarray:
        b = np.zeros(dictionary_size(self.k))
        p = self.points[i]
        b[p.indices] = p.values
        return b

    def coeffs(self, i: int) -> dict[TileId, float]:
        return array_to_coeffs(self.coef_array(i), self.k)

    @property
    def selected(self) -> PathPoint:
        if self.selected_index is None:
            raise ContractError("no lambda has been selected on this path")
        return self.points[self.selected_index]


def _check_z(z: GridDensity) -> None:
    if abs(z.total() - 1.0) > 1e-9:
        raise ContractError(f"z must be normalized, total mass is {z.total()!r}")


def kkt_violation(g: np.ndarray, b: np.ndarray, lam: float, nonneg: bool = False) -> float:
    """Largest KKT residual of ``0.5 ||r||^2 + lam ||b||_1`` given ``g = D^T r``."""
    if g.size == 0:
        return 0.0
    zero = b == 0
    if nonneg:
        v_zero = np.maximum(g[zero] - lam, 0.0)
        v_nz = np.abs(g[~zero] - lam)
    else:
        v_zero = np.maximum(np.abs(g[zero]) - lam, 0.0)
        v_nz = np.abs(g[~zero] - lam * np.sign(b[~zero]))
    return float(max(v_zero.max(initial=0.0), v_nz.max(initial=0.0)))


class _TileDescent:
    """Coordinate descent on ``0.5 * ||mask * (z - D b)||^2 + lam ||b||_1``.

    ``support`` restricts the free coordinates; the rest stay at zero.
    """

    def __init__(self, z: np.ndarray, k: int, alpha: float, mask=None, support=None,
                 nonneg: bool = False):
        self.k, self.alpha, self.nonneg = k, alpha, nonneg
        n = 1 << (2 * k)
        self.mask = np.ones(n) if mask is None else np.asarray(mask, dtype=float)
        self.z = np.asarray(z, dtype=float) * self.mask
        self.w = column_weights(k, alpha)
        self.colsq = self.w ** 2 * tile_sums(self.mask, k)
        if support is None:
            order = np.arange(dictionary_size(k), dtype=np.int64)
        else:
            order = np.unique(np.asarray(support, dtype=np.int64))
        self.order = order[self.colsq[order] > 0]
        self.geom = tile_arrays(k)
        self.colnorm_max = float(np.sqrt(self.colsq[self.order].max())) if self.order.size else 1.0
        # rounding scale of the correlations <D_j, r>
        self.snap = SNAP * float(np.abs(self.gradient(self.z)).max(initial=0.0))

    def residual(self, b: np.ndarray) -> np.ndarray:
        return (self.z - matvec(b, self.alpha, self.k)) * self.mask

    def gradient(self, resid: np.ndarray) -> np.ndarray:
        return tile_sums(resid, self.k) * self.w

    def violation(self, b: np.ndarray, lam: float) -> float:
        g = self.gradient(self.residual(b))
        return kkt_violation(g[self.order], b[self.order], lam, self.nonneg)

    def solve(self, b: np.ndarray, lam: float, tol_abs: float, max_iter: int) -> int:
        """Iterate in place until the KKT residual is at most ``tol_abs``; returns sweeps."""
        m0s, m1s, m2s = self.geom
        inner_tol = 0.1 * tol_abs / self.colnorm_max
        resid = self.residual(b)
        sweeps = 0
        while sweeps < max_iter:
            _kernels.cd_sweep(self.order, b, resid, self.mask, self.w, self.colsq, lam,
                              m0s, m1s, m2s, self.k, self.nonneg, self.snap)
            sweeps += 1
            active = self.order[b[self.order] != 0]
            while sweeps < max_iter and active.size:
                step = _kernels.cd_sweep(active, b, resid, self.mask, self.w, self.colsq, lam,
                                         m0s, m1s, m2s, self.k, self.nonneg, self.snap)
                sweeps += 1
                if step <= inner_tol:
                    break
            resid = self.residual(b)
            g = self.gradient(resid)
            if kkt_violation(g[self.order], b[self.order], lam, self.nonneg) <= tol_abs:
                return sweeps
        raise SolverError(f"coordinate descent did not converge in {max_iter} sweeps", lam=lam)


def _lambda_grid(lam_max: float, cfg: FitConfig) -> np.ndarray:
    if cfg.n_lambda == 1:
        return np.array([lam_max])
    return lam_max * np.logspace(0.0, math.log10(cfg.lambda_min_ratio), cfg.n_lambda)


def _run_path(solver: _TileDescent, lambdas: np.ndarray, cfg: FitConfig) -> list[PathPoint]:
    b = np.zeros(dictionary_size(solver.k))
    out = []
    for lam in lambdas:
        sweeps = solver.solve(b, float(lam), cfg.tol * float(lam), cfg.max_iter)
        nz = np.flatnonzero(b)
        out.append(PathPoint(float(lam), nz, b[nz].copy(), sweeps))
    return out


def lasso_path(z: GridDensity, alpha: float, cfg: FitConfig, lambdas=None) -> PathResult:
    """Warm-started l1 path over a log-spaced lambda grid starting at ``lam_max``."""
    _check_z(z)
    k = z.spec.k
    solver = _TileDescent(z.values, k, alpha)
    if lambdas is None:
        lam_max = float(np.abs(solver.gradient(solver.z)).max())
        lambdas = _lambda_grid(lam_max, cfg)
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(np.diff(lambdas) >= 0):
        raise ContractError("lambdas must be strictly decreasing")
    return PathResult(k, alpha, _run_path(solver, lambdas, cfg))


def cell_folds(n: int, folds: int, seed: int) -> np.ndarray:
    """Fold label of every grid cell, balanced and seeded."""
    rng = np.random.default_rng(seed)
    labels = np.empty(n, dtype=np.int64)
    labels[rng.permutation(n)] = np.arange(n) % folds
    return labels


def cv_select(z: GridDensity, alpha: float, cfg: FitConfig) -> tuple[float, PathResult]:
    """Cross-validate the path over grid cells and apply the one-standard-error rule.

    Each fold is fit on the complementary cells with lambdas scaled by the
    training fraction, so the per-cell penalty matches the full fit.
    """
    _check_z(z)
    k, n = z.spec.k, z.spec.n
    if n < cfg.cv_folds:
        raise ContractError(f"{n} cells cannot be split into {cfg.cv_folds} folds")
    path = lasso_path(z, alpha, cfg)
    lambdas = path.lambdas
    labels = cell_folds(n, cfg.cv_folds, cfg.seed)
    errors = np.empty((cfg.cv_folds, len(lambdas)))
    for f in range(cfg.cv_folds):
        held = labels == f
        mask = (~held).astype(float)
        solver = _TileDescent(z.values, k, alpha, mask=mask)
        scale = mask.sum() / n
        fold_path = _run_path(solver, lambdas * scale, cfg)
        for i, p in enumerate(fold_path):
            b = np.zeros(dictionary_size(k))
            b[p.indices] = p.values
            pred = matvec(b, alpha, k)
            errors[f, i] = np.mean((z.values[held] - pred[held]) ** 2)
    mean = errors.mean(axis=0)
    se = errors.std(axis=0, ddof=1) / math.sqrt(cfg.cv_folds)
    for p, m, s in zip(path.points, mean, se):
        p.cv_mean, p.cv_se = float(m), float(s)
    best = int(np.argmin(mean))
    within = np.flatnonzero(mean <= mean[best] + se[best])
    path.selected_index = int(within[0])
    lam_star = float(lambdas[path.selected_index])
    log.info("cv: min error %.4g at lambda %.4g, selected lambda %.4g (nnz %d)",
             mean[best], lambdas[best], lam_star, path.selected.nnz)
    return lam_star, path


def nnls_stationarity(z: GridDensity, b: dict[TileId, float], support) -> float:
    """Largest violation of the non-negative least squares optimality conditions."""
    k = z.spec.k
    idx = np.array(sorted(tile_index(t) for t in support), dtype=np.int64)
    barr = np.zeros(dictionary_size(k))
    for t, v in b.items():
        barr[tile_index(t)] = v
    g = transpose_residual(z.values, barr, 1.0, k)
    return kkt_violation(g[idx], barr[idx], 0.0, nonneg=True)


def transpose_residual(z: np.ndarray, b: np.ndarray, alpha: float, k: int) -> np.ndarray:
    return tile_sums(z - matvec(b, alpha, k), k) * column_weights(k, alpha)


def nnls_refit(z: GridDensity, support, start=None, tol: float = NNLS_TOL,
               max_iter: int = 1_000_000) -> dict[TileId, float]:
    """Non-negative least squares of z on the uniform-density columns of ``support``.

    Solved by projected coordinate descent until every support coordinate is
    stationary to within ``tol``.
    """
    support = list(support)
    if not support:
        raise DegenerateDensityError("NNLS refit needs a non-empty support")
    k = z.spec.k
    idx = np.array([tile_index(t) for t in support], dtype=np.int64)
    solver = _TileDescent(z.values, k, 1.0, support=idx, nonneg=True)
    b = np.zeros(dictionary_size(k))
    if start is not None:
        b[solver.order] = np.maximum(np.asarray(start, dtype=float)[solver.order], 0.0)
    solver.solve(b, 0.0, tol, max_iter)
    return array_to_coeffs(b, k)


def lasso_objective(z: np.ndarray, b: np.ndarray, alpha: float, k: int, lam: float) -> float:
    r = z - matvec(b, alpha, k)
    return 0.5 * float(r @ r) + lam * float(np.abs(b).sum())


def _alpha_to_uniform(b: np.ndarray, alpha: float, k: int) -> np.ndarray:
    """Rescale coefficients so ``D^(1) b'`` equals ``D^(alpha) b``."""
    return b * column_weights(k, alpha) / column_weights(k, 1.0)


def fit_density(data, spec: GridSpec | None = None, cfg: FitConfig | None = None) -> SparseDensity:
    """Fit a sparse density from raw points or from a ready-made smooth estimate.

    ``data`` is either an ``(m, 2)`` array of points (``spec`` then fixes the
    grid; defaults to the covering square at depth 5) or a normalized
    ``GridDensity`` used directly as z.
    """
    cfg = cfg or FitConfig()
    meta: dict = {"alpha": cfg.alpha, "delta": cfg.delta}
    if isinstance(data, GridDensity):
        z = z_refit = data
    else:
        pts = np.asarray(data, dtype=float).reshape(-1, 2)
        if spec is None:
            spec = GridSpec.covering(pts, 5)
        refit_pts = None
        if cfg.refit_holdout > 0:
            rng = np.random.default_rng(cfg.seed)
            held = rng.random(len(pts)) < cfg.refit_holdout
            pts, refit_pts = pts[~held], pts[held]
        z = _smooth(pts, spec, cfg, meta)
        z_refit = _smooth(refit_pts, spec, cfg, {}) if refit_pts is not None else z
        meta["n_points"] = int(len(pts))
    _check_z(z)
    k = z.spec.k
    lam_star, path = cv_select(z, cfg.alpha, cfg)
    sel = path.selected
    meta.update(lambda_star=lam_star, cv_error=sel.cv_mean, cv_se=sel.cv_se, lasso_nnz=sel.nnz)
    if sel.nnz == 0:
        raise DegenerateDensityError(
            f"selected lambda {lam_star:.4g} gives an empty support (alpha={cfg.alpha})")
    support = [TileId(*map(int, t)) for t in zip(*(a[sel.indices] for a in tile_arrays(k)))]
    start = _alpha_to_uniform(path.coef_array(path.selected_index), cfg.alpha, k)
    b2 = nnls_refit(z_refit, support, start=start)
    b3 = hard_threshold(b2, cfg.delta)
    b = normalize(b3)
    meta["nnz"] = len(b)
    return SparseDensity(z.spec, b, meta)


def _smooth(pts: np.ndarray, spec: GridSpec, cfg: FitConfig, meta: dict) -> GridDensity:
    y = embed_points(pts, spec)
    kcfg = resolve_bandwidth(pts, spec, cfg.kde)
    meta.update(bandwidth_x=kcfg.bandwidth_x, bandwidth_y=kcfg.bandwidth_y)
    return gaussian_kde(y, kcfg)
