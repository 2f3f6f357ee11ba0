import json
import math

import numpy as np
import pytest

from oracles import tiles_in_order
from quadsparse.density import SparseDensity
from quadsparse.errors import DocumentParseError
from quadsparse.grid import ROOT, GridSpec, TileId
from quadsparse.persistence import export_grid, export_tiles, load, save

UNIT = (0.0, 1.0, 0.0, 1.0)


def random_density(rng, meta=True):
    k = int(rng.integers(0, 7))
    tiles = tiles_in_order(k)
    nnz = int(rng.integers(1, min(len(tiles), 60) + 1))
    pick = rng.choice(len(tiles), size=nnz, replace=False)
    w = rng.normal(size=nnz) * 10.0 ** rng.integers(-12, 3, size=nnz)
    lo, hi = sorted(rng.normal(size=2) * 100)
    spec = GridSpec(k, (lo, hi + 1e-3, -50.0, float(rng.random()) * 10))
    md = {"alpha": float(rng.random()), "delta": 1e-3, "lambda_star": float(rng.random()) * 1e-5} if meta else {}
    return SparseDensity(spec, {TileId(*tiles[j]): float(v) for j, v in zip(pick, w)}, md)


def doc(tiles, k=2, **extra):
    body = {"format_version": 1, "k": k, "bounds": [0, 1, 0, 1], "alpha": None,
            "delta": None, "lambda_star": None, "tiles": tiles}
    body.update(extra)
    return json.dumps(body)


class TestSave:
    def test_root_document(self):
        text = save(SparseDensity(GridSpec(2, UNIT), {ROOT: 1.0}))
        parsed = json.loads(text)
        assert parsed["tiles"] == [[0, 0, 0, 1]]
        assert parsed["k"] == 2
        assert text.count("\n    [") == 1

    def test_idempotent_bytes(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            d = random_density(rng)
            text = save(d)
            assert save(load(text)) == text
            assert save(d) == text

    def test_canonical_order(self):
        d = SparseDensity(GridSpec(2, UNIT), {TileId(2, 1, 0): 0.25, TileId(1, 0, 1): 0.25,
                                              TileId(1, 1, 0): 0.25, ROOT: 0.25})
        rows = json.loads(save(d))["tiles"]
        assert [r[:3] for r in rows] == [[0, 0, 0], [1, 1, 0], [1, 0, 1], [2, 1, 0]]


class TestLoad:
    def test_round_trip_exact(self):
        rng = np.random.default_rng(1)
        for i in range(100):
            d = random_density(rng, meta=bool(i % 2))
            back = load(save(d))
            assert back == d
            assert all(a == b for a, b in zip(back.weights, d.weights))

    def test_one_tile(self):
        d = load(doc([[0, 0, 0, 1]]))
        assert dict(d.coeffs) == {ROOT: 1.0}
        assert dict(d.metadata) == {}

    def test_duplicate(self):
        text = save(SparseDensity(GridSpec(2, UNIT), {ROOT: 0.5, TileId(1, 0, 0): 0.5}))
        dup = text.replace("[1, 0, 0, 0.5]", "[0, 0, 0, 0.5]")
        with pytest.raises(DocumentParseError, match="duplicate") as exc:
            load(dup)
        assert exc.value.line == 10

    def test_shuffled(self):
        with pytest.raises(DocumentParseError, match="order"):
            load(doc([[1, 0, 0, 0.5], [0, 0, 0, 0.5]]))

    @pytest.mark.parametrize("tiles,msg", [
        ([[3, 0, 0, 1.0]], "zoom"),
        ([[1, 2, 0, 1.0]], "index"),
        ([[0, 0, 0, 0]], "nonzero"),
        ([[0, 0, 0, "1"]], "weight"),
        ([[0, 0.5, 0, 1.0]], "integers"),
        ([[0, 0, 0]], "expected"),
    ])
    def test_bad_tiles(self, tiles, msg):
        with pytest.raises(DocumentParseError, match=msg):
            load(doc(tiles))

    def test_non_finite_weight(self):
        text = doc([[0, 0, 0, 1.0]]).replace("1.0]", "NaN]")
        with pytest.raises(DocumentParseError):
            load(text)

    @pytest.mark.parametrize("text,msg", [
        ("{not json", "line 1"),
        ("[]", "object"),
        (json.dumps({"k": 1}), "missing"),
        (doc([], format_version=2), "format_version"),
        (doc([], bounds=[0, 0, 0, 1]), "bounds"),
        (doc([], k=-1), "k must"),
        (doc([], alpha="x"), "alpha"),
    ])
    def test_bad_documents(self, text, msg):
        with pytest.raises(DocumentParseError, match=msg):
            load(text)


class TestExports:
    def test_grid_root_k1(self):
        d = SparseDensity(GridSpec(1, UNIT), {ROOT: 1.0})
        lines = export_grid(d).splitlines()
        assert lines[0] == "col,row,value"
        assert lines[1:] == ["0,0,0.25", "1,0,0.25", "0,1,0.25", "1,1,0.25"]

    def test_grid_mass(self):
        rng = np.random.default_rng(2)
        w = rng.random(10)
        tiles = [TileId(*t) for t in tiles_in_order(3)[:10]]
        d = SparseDensity(GridSpec(3, UNIT), dict(zip(tiles, w / w.sum())))
        values = [float(line.split(",")[2]) for line in export_grid(d).splitlines()[1:]]
        assert len(values) == 64
        assert abs(math.fsum(values) - 1.0) <= 1e-8

    def test_tiles(self):
        d = SparseDensity(GridSpec(3, (0.0, 8.0, 0.0, 8.0)), {ROOT: 0.5, TileId(1, 1, 0): 0.5})
        fc = json.loads(export_tiles(d))
        assert fc["type"] == "FeatureCollection"
        assert len(fc["features"]) == d.nnz
        f = fc["features"][1]
        ring = f["geometry"]["coordinates"][0]
        xs, ys = [p[0] for p in ring], [p[1] for p in ring]
        assert (min(xs), max(xs), min(ys), max(ys)) == (4.0, 8.0, 0.0, 4.0)
        assert f["properties"] == {"m0": 1, "m1": 1, "m2": 0, "weight": 0.5, "value": 0.5 / 16}
