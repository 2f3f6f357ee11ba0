import math

import numpy as np
import pytest

from quadsparse.algebra import tv_distance
from quadsparse.errors import GridArgumentError
from quadsparse.fit import FitConfig
from quadsparse.grid import GridSpec, embed_points
from quadsparse.simulation import (
    GMM6,
    ExperimentRow,
    GmmSpec,
    Mode,
    alpha_heuristic,
    format_table,
    run_experiment,
    sample_gmm,
    time_sliced,
    true_grid_density,
)


class TestSampling:
    def test_single_mode_mean(self):
        spec = GmmSpec((Mode(0.3, 0.6, 0.05, 0.1, 0.0, 1.0),))
        n = 1_000_000
        pts = sample_gmm(spec, n, seed=4)
        assert abs(pts[:, 0].mean() - 0.3) <= 5 * 0.05 / math.sqrt(n)
        assert abs(pts[:, 1].mean() - 0.6) <= 5 * 0.1 / math.sqrt(n)

    def test_seeded(self):
        np.testing.assert_array_equal(sample_gmm(GMM6, 1000), sample_gmm(GMM6, 1000))
        assert not np.array_equal(sample_gmm(GMM6, 1000, seed=1), sample_gmm(GMM6, 1000, seed=2))

    def test_mode_counts(self):
        n = 200_000
        _, labels = sample_gmm(GMM6, n, return_labels=True)
        counts = np.bincount(labels, minlength=6)
        for c, w in zip(counts, GMM6.weights):
            assert abs(c - n * w) <= 4 * math.sqrt(n * w * (1 - w))

    def test_correlation(self):
        spec = GmmSpec((Mode(0.0, 0.0, 1.0, 2.0, -0.6, 1.0),))
        pts = sample_gmm(spec, 200_000, seed=1)
        assert abs(np.corrcoef(pts.T)[0, 1] + 0.6) < 0.01

    def test_invalid_spec(self):
        with pytest.raises(GridArgumentError):
            GmmSpec((Mode(0, 0, 1, 1, 0, 0.5),))
        with pytest.raises(GridArgumentError):
            GmmSpec((Mode(0, 0, 0, 1, 0, 1.0),))
        with pytest.raises(GridArgumentError):
            GmmSpec((Mode(0, 0, 1, 1, 1.0, 1.0),))
        with pytest.raises(GridArgumentError):
            sample_gmm(GMM6, 0)


class TestTruth:
    def test_centered_mode_peak(self):
        # the exact center is a cell corner on a 2^k grid (a four-way tie), so
        # nudge the mode into cell (8, 8)
        spec = GmmSpec((Mode(0.53, 0.53, 0.1, 0.1, 0.0, 1.0),))
        p = true_grid_density(spec, GridSpec(4, spec.bounds))
        assert int(np.argmax(p.values)) == 8 * 16 + 8

    def test_mass(self):
        for k in (2, 5, 7):
            p = true_grid_density(GMM6, GridSpec(k, GMM6.bounds))
            assert abs(p.values.sum() - 1.0) <= 1e-12

    def test_mirror_symmetry(self):
        spec = GmmSpec((Mode(0.25, 0.5, 0.1, 0.05, 0.3, 0.5), Mode(0.75, 0.5, 0.1, 0.05, -0.3, 0.5)))
        img = true_grid_density(spec, GridSpec(5, spec.bounds)).image()
        np.testing.assert_allclose(img, img[:, ::-1], rtol=0, atol=1e-12)

    def test_pdf_integrates_to_one(self):
        g = GridSpec(8, (-1.0, 2.0, -1.0, 2.0))
        cx, cy = g.cell_centers()
        total = GMM6.pdf(cx, cy).sum() * g.cell_width * g.cell_height
        assert abs(total - 1.0) < 1e-4


class TestExperiment:
    def test_shape_and_determinism(self):
        cfg = FitConfig(n_lambda=20)
        rows = run_experiment(GMM6, [2, 3], [0.0, 0.5, 1.0], cfg, n=5000)
        assert [(r.k, r.alpha) for r in rows] == [(k, a) for k in (2, 3) for a in (0.0, 0.5, 1.0)]
        again = run_experiment(GMM6, [2, 3], [0.0, 0.5, 1.0], cfg, n=5000)
        assert format_table(rows) == format_table(again)
        for r in rows:
            assert r.nnz == 0 and math.isnan(r.tv) or 0.0 <= r.tv <= 1.0

    def test_parallel_matches_serial(self):
        cfg = FitConfig(n_lambda=15)
        serial = run_experiment(GMM6, [2, 3], [0.5], cfg, n=3000)
        parallel = run_experiment(GMM6, [2, 3], [0.5], cfg, n=3000, jobs=2)
        assert format_table(serial) == format_table(parallel)

    def test_table_format(self):
        rows = [ExperimentRow(4, 0.5, 0.2, 17, 0.05), ExperimentRow(6, 1.0, math.nan, 0, 0.1)]
        lines = format_table(rows).splitlines()
        assert lines == ["k,alpha,tv,nnz,tv_hist", "4,0.5,0.2,17,0.05", "6,1.0,nan,0,0.1"]

    def test_histogram_tv_grows_with_depth(self):
        pts = sample_gmm(GMM6, 200_000)
        tvs = []
        for k in (4, 5, 6, 7):
            g = GridSpec(k, GMM6.bounds)
            tvs.append(tv_distance(embed_points(pts, g), true_grid_density(GMM6, g)))
        inversions = sum(b < a for a, b in zip(tvs, tvs[1:]))
        assert inversions <= 1
        assert tvs[-1] > tvs[0]

    @pytest.mark.xfail(strict=True, reason=(
        "sampling noise caps histogram TV near 0.5*sqrt(2/(pi*n))*sum(sqrt(p)) <= 0.029 "
        "for 200k points on 1024 cells; a value near 0.178 needs a different truth or "
        "far fewer points"))
    def test_histogram_tv_k5_band(self):
        pts = sample_gmm(GMM6, 200_000)
        g = GridSpec(5, GMM6.bounds)
        tv = tv_distance(embed_points(pts, g), true_grid_density(GMM6, g))
        assert 0.10 <= tv <= 0.28

    def test_histogram_noise_bound(self):
        # the analytic ceiling behind the expected failure above
        n = 200_000
        g = GridSpec(5, GMM6.bounds)
        p = true_grid_density(GMM6, g).values
        bound = 0.5 * math.sqrt(2 / (math.pi * n)) * np.sqrt(p).sum()
        tv = tv_distance(embed_points(sample_gmm(GMM6, n), g), true_grid_density(GMM6, g))
        assert bound < 0.1
        assert tv < 1.5 * bound


class TestAlphaHeuristic:
    def test_largest_model(self):
        rows = [ExperimentRow(7, a, 0.1, n, 0.2) for a, n in [(0.0, 120), (0.5, 199), (1.0, 6)]]
        assert alpha_heuristic(rows) == {7: 0.5}

    def test_single_alpha(self):
        assert alpha_heuristic([ExperimentRow(3, 0.25, 0.1, 4, 0.2)]) == {3: 0.25}

    def test_tie_goes_to_smaller(self):
        rows = [ExperimentRow(5, 0.66, 0.1, 40, 0.2), ExperimentRow(5, 0.5, 0.1, 40, 0.2)]
        assert alpha_heuristic(rows) == {5: 0.5}


class TestTimeSliced:
    def test_variants(self):
        variants = time_sliced(GMM6)
        assert len(variants) == 12
        for v in variants:
            assert abs(math.fsum(v.weights) - 1.0) <= 1e-12
            assert (v.weights > 0).all()
            assert [(m.mean_x, m.mean_y) for m in v.modes] == [(m.mean_x, m.mean_y) for m in GMM6.modes]
        assert len({v.seed for v in variants}) == 12
        assert not np.allclose(variants[0].weights, variants[6].weights)
