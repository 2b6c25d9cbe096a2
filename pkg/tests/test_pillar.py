import numpy as np
import pytest

from pillarsot.core import PointCloud
from pillarsot.errors import DuplicateIndexError, IndexOutOfGridError
from pillarsot.pillar import (
    GridSpec,
    augment_points,
    dump_pseudo_image,
    load_pseudo_image,
    pillarize,
    pool_pillar_vectors,
    scatter,
)

GRID = GridSpec()  # +/-3.2 m, 0.05 m pillars -> 128x128


def cloud(pts):
    return PointCloud(np.asarray(pts, dtype=float))


class TestPillarize:
    def test_center_point_index(self):
        ps = pillarize(cloud([[0, 0, 0, 0.5]]), GRID)
        assert GRID.shape == (128, 128)
        assert ps.num_pillars == 1
        assert tuple(ps.indices[0]) == (64, 64)

    def test_out_of_range_dropped(self):
        ps = pillarize(cloud([[3.3, 0, 0, 0.5]]), GRID)
        assert ps.num_pillars == 0

    def test_mean_offset_antisymmetry(self):
        ps = augment_points(pillarize(cloud([[0.01, 0, 0, 0.1], [0.03, 0, 0, 0.2]]), GRID))
        assert ps.num_pillars == 1
        xm = ps.features[0, :2, 4]
        np.testing.assert_allclose(sorted(xm), [-0.01, 0.01], atol=1e-12)

    def test_truncation_keeps_first_points(self):
        grid = GridSpec(max_points_per_pillar=2)
        pts = [[0.01 + 1e-4 * i, 0, 0, i / 10] for i in range(5)]
        ps = pillarize(cloud(pts), grid)
        assert ps.mask[0].sum() == 2
        np.testing.assert_allclose(ps.raw_points[0, :2, 3], [0.0, 0.1])

    def test_max_pillars_drops_emptiest_first(self):
        grid = GridSpec(max_pillars=2)
        pts = (
            [[0.01, 0.01, 0, 0]] * 3       # pillar (64, 64): 3 points
            + [[0.06, 0.01, 0, 0]] * 2     # pillar (65, 64): 2 points
            + [[0.11, 0.01, 0, 0]]         # pillar (66, 64): 1 point -> dropped
        )
        ps = pillarize(cloud(pts), grid)
        kept = {tuple(idx) for idx in ps.indices}
        assert kept == {(64, 64), (65, 64)}

    def test_determinism(self):
        rng = np.random.default_rng(5)
        pts = rng.uniform(-3, 3, size=(500, 4))
        a = pillarize(PointCloud(pts), GRID, rng_seed=1)
        b = pillarize(PointCloud(pts), GRID, rng_seed=1)
        np.testing.assert_array_equal(a.indices, b.indices)
        np.testing.assert_array_equal(a.raw_points, b.raw_points)
        np.testing.assert_array_equal(a.mask, b.mask)

    def test_no_resampling_multiset(self):
        # within capacity, stored points == cropped input exactly
        rng = np.random.default_rng(11)
        pts = rng.uniform(-3.1, 3.1, size=(400, 4))
        pts[:, 2] = rng.uniform(-2.9, 0.9, size=400)
        ps = pillarize(PointCloud(pts), GRID)
        stored = ps.raw_points[ps.mask]
        key = lambda arr: np.sort(arr.view([("", arr.dtype)] * 4), axis=0)
        np.testing.assert_array_equal(key(np.ascontiguousarray(stored)),
                                      key(np.ascontiguousarray(pts)))


class TestAugmentPoints:
    def test_single_point_mean_offset_zero(self):
        ps = augment_points(pillarize(cloud([[0.51, -0.52, 0.3, 0.9]]), GRID))
        np.testing.assert_allclose(ps.features[0, 0, 4:7], [0, 0, 0], atol=1e-12)

    def test_point_at_cell_center(self):
        # cell (64, 64) center is (0.025, 0.025); z midpoint of [-3, 1] is -1
        ps = augment_points(pillarize(cloud([[0.025, 0.025, -1.0, 0.0]]), GRID))
        np.testing.assert_allclose(ps.features[0, 0, 7:10], [0, 0, 0], atol=1e-12)

    def test_padded_rows_zero(self):
        ps = augment_points(pillarize(cloud([[0, 0, 0, 0.5]]), GRID))
        assert np.all(ps.features[0, 1:] == 0)

    def test_center_offset_bounds_property(self):
        rng = np.random.default_rng(13)
        pts = rng.uniform(-3.2, 3.2, size=(10_000, 4))
        pts[:, 2] = rng.uniform(-3, 1, size=10_000)
        ps = augment_points(pillarize(PointCloud(pts), GRID))
        rows = ps.valid_rows()
        sx, sy = GRID.pillar_size
        assert np.all(np.abs(rows[:, 7]) <= sx / 2 + 1e-12)
        assert np.all(np.abs(rows[:, 8]) <= sy / 2 + 1e-12)

    def test_mean_of_offsets_is_zero(self):
        rng = np.random.default_rng(17)
        pts = rng.uniform(-0.5, 0.5, size=(50, 4))
        ps = augment_points(pillarize(PointCloud(pts), GRID))
        for i in range(ps.num_pillars):
            valid = ps.features[i][ps.mask[i]]
            np.testing.assert_allclose(valid[:, 4:7].mean(axis=0), [0, 0, 0], atol=1e-12)


class TestScatter:
    def test_single_vector(self):
        img = scatter([((0, 0), np.arange(4.0))], GRID)
        assert img.shape == (4, 128, 128)
        np.testing.assert_array_equal(img.data[:, 0, 0], np.arange(4.0))
        assert img.data.sum() == np.arange(4.0).sum()

    def test_empty_list(self):
        img = scatter([], GRID, channels=3)
        assert img.shape == (3, 128, 128)
        assert np.all(img.data == 0)

    def test_per_channel_conservation(self):
        rng = np.random.default_rng(3)
        vectors = [((i, 2 * i), rng.normal(size=6)) for i in range(10)]
        img = scatter(vectors, GRID)
        total = sum(v for _, v in vectors)
        np.testing.assert_allclose(img.data.sum(axis=(1, 2)), total, atol=1e-12)

    def test_duplicate_index(self):
        with pytest.raises(DuplicateIndexError):
            scatter([((1, 1), np.ones(2)), ((1, 1), np.ones(2))], GRID)

    def test_out_of_grid(self):
        with pytest.raises(IndexOutOfGridError):
            scatter([((128, 0), np.ones(2))], GRID)


class TestPoolAndDump:
    def test_pool_modes(self):
        ps = augment_points(pillarize(cloud([[0.01, 0, 0, 0.2], [0.02, 0, 0, 0.4]]), GRID))
        (_, vmax), = pool_pillar_vectors(ps, mode="max")
        (_, vmean), = pool_pillar_vectors(ps, mode="mean")
        assert vmax[3] == pytest.approx(0.4)
        assert vmean[3] == pytest.approx(0.3)

    def test_pseudo_image_round_trip(self, tmp_path):
        img = scatter([((5, 6), np.array([1.0, -2.0]))], GRID)
        path = tmp_path / "img.bin"
        dump_pseudo_image(img, path)
        back = load_pseudo_image(path)
        np.testing.assert_array_equal(back.data, img.data)
