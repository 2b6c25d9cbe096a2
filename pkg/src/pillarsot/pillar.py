"""Pillar bucketing of a local-frame cloud and scatter to a dense BEV map.

A pillar is one (x, y) cell of the BEV grid holding every point above it;
there is no z discretization. Each retained point gets the 10-channel
augmentation [x, y, z, r, x_m, y_m, z_m, x_c, y_c, z_c]: the raw values, the
offset from the per-pillar mean, and the offset from the pillar center (cell
center in x/y, z-range midpoint in z). No resampling happens anywhere: when
a pillar exceeds its point budget the first points in input order win, and
when the pillar budget overflows the emptiest pillars are dropped first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import PointCloud
from .errors import DuplicateIndexError, IndexOutOfGridError

AUGMENTED_CHANNELS = 10


@dataclass(frozen=True)
class GridSpec:
    """BEV grid geometry and pillar capacity bounds."""

    x_range: tuple[float, float] = (-3.2, 3.2)
    y_range: tuple[float, float] = (-3.2, 3.2)
    z_range: tuple[float, float] = (-3.0, 1.0)
    pillar_size: tuple[float, float] = (0.05, 0.05)
    max_points_per_pillar: int = 32
    max_pillars: int = 16384

    def __post_init__(self):
        if self.max_points_per_pillar < 1:
            raise ValueError("max_points_per_pillar must be >= 1")
        if self.max_pillars < 1:
            raise ValueError("max_pillars must be >= 1")
        for (lo, hi) in (self.x_range, self.y_range, self.z_range):
            if not lo < hi:
                raise ValueError("grid ranges must have min < max")
        h = (self.x_range[1] - self.x_range[0]) / self.pillar_size[0]
        w = (self.y_range[1] - self.y_range[0]) / self.pillar_size[1]
        if abs(h - round(h)) > 1e-9 or abs(w - round(w)) > 1e-9:
            raise ValueError("grid extents must be integer multiples of pillar size")

    @property
    def shape(self) -> tuple[int, int]:
        """(H, W): number of cells along x (rows) and y (cols)."""
        h = round((self.x_range[1] - self.x_range[0]) / self.pillar_size[0])
        w = round((self.y_range[1] - self.y_range[0]) / self.pillar_size[1])
        return int(h), int(w)

    @property
    def z_center(self) -> float:
        return 0.5 * (self.z_range[0] + self.z_range[1])


@dataclass(frozen=True)
class PillarSet:
    """Sparse pillar buckets with padded per-point features.

    ``indices`` is (P, 2) int (row, col); ``raw_points`` is (P, N_v, 4) raw
    [x, y, z, r] zero-padded; ``mask`` is (P, N_v) validity; ``features`` is
    (P, N_v, 10) after :func:`augment_points`, else None.
    """

    grid: GridSpec
    indices: np.ndarray
    raw_points: np.ndarray
    mask: np.ndarray
    features: np.ndarray | None = None

    @property
    def num_pillars(self) -> int:
        return self.indices.shape[0]

    def valid_rows(self, features: np.ndarray | None = None) -> np.ndarray:
        """Flatten (P, N_v, C) to the (sum(mask), C) valid rows."""
        feats = self.features if features is None else features
        if feats is None:
            raise ValueError("features not computed; call augment_points first")
        return feats[self.mask]


@dataclass(frozen=True)
class PseudoImage:
    """Dense C x H x W scatter result; empty cells are exactly zero."""

    data: np.ndarray

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


def pillarize(cloud: PointCloud, grid: GridSpec, rng_seed: int = 0) -> PillarSet:
    """Bucket a local-frame cloud into pillars, deterministically.

    Points outside the grid ranges are dropped. A pillar keeps at most N_v
    points (first N_v in input order). If more than ``max_pillars`` pillars
    are occupied, pillars are dropped lowest-point-count first, ties broken
    by (row, col) order. ``rng_seed`` is accepted for interface stability but
    unused: every policy here is deterministic.
    """
    del rng_seed
    h_cells, w_cells = grid.shape
    pts = cloud.points
    if pts.shape[0] == 0:
        return _empty_pillar_set(grid)

    # half-open binning [lo, hi): index by floor((v - lo) / size)
    ix = np.floor((pts[:, 0] - grid.x_range[0]) / grid.pillar_size[0]).astype(np.int64)
    iy = np.floor((pts[:, 1] - grid.y_range[0]) / grid.pillar_size[1]).astype(np.int64)
    in_grid = (
        (ix >= 0) & (ix < h_cells) & (iy >= 0) & (iy < w_cells)
        & (pts[:, 2] >= grid.z_range[0]) & (pts[:, 2] <= grid.z_range[1])
    )
    pts = pts[in_grid]
    if pts.shape[0] == 0:
        return _empty_pillar_set(grid)
    flat = ix[in_grid] * w_cells + iy[in_grid]

    # stable sort keeps input order within each pillar
    order = np.argsort(flat, kind="stable")
    flat_sorted = flat[order]
    pts_sorted = pts[order]
    uniq, starts, counts = np.unique(flat_sorted, return_index=True, return_counts=True)

    # truncate each pillar to the first N_v points in input order
    n_v = grid.max_points_per_pillar
    rank = np.arange(flat_sorted.shape[0]) - np.repeat(starts, counts)
    keep = rank < n_v
    kept_counts = np.minimum(counts, n_v)

    # drop overflow pillars: lowest count first, ties by (row, col)
    if uniq.shape[0] > grid.max_pillars:
        drop_order = np.lexsort((uniq, kept_counts))
        survivors = np.sort(drop_order[uniq.shape[0] - grid.max_pillars:])
        pillar_alive = np.zeros(uniq.shape[0], dtype=bool)
        pillar_alive[survivors] = True
        keep &= np.repeat(pillar_alive, counts)
        uniq = uniq[survivors]
        kept_counts = kept_counts[survivors]

    pts_kept = pts_sorted[keep]
    p = uniq.shape[0]
    raw = np.zeros((p, n_v, 4))
    mask = np.zeros((p, n_v), dtype=bool)
    row_idx = np.repeat(np.arange(p), kept_counts)
    col_idx = rank[keep].astype(np.int64)
    raw[row_idx, col_idx] = pts_kept
    mask[row_idx, col_idx] = True
    indices = np.column_stack([uniq // w_cells, uniq % w_cells]).astype(np.int64)
    return PillarSet(grid=grid, indices=indices, raw_points=raw, mask=mask)


def _empty_pillar_set(grid: GridSpec) -> PillarSet:
    n_v = grid.max_points_per_pillar
    return PillarSet(
        grid=grid,
        indices=np.zeros((0, 2), dtype=np.int64),
        raw_points=np.zeros((0, n_v, 4)),
        mask=np.zeros((0, n_v), dtype=bool),
    )


def augment_points(pillar_set: PillarSet) -> PillarSet:
    """Fill the 10-dim per-point features; padded rows stay all-zero.

    Channels 0-3: raw (x, y, z, r). Channels 4-6: offset from the mean of
    the pillar's valid points. Channels 7-9: offset from the pillar center
    (x/y cell center, z-range midpoint).
    """
    grid = pillar_set.grid
    raw, mask = pillar_set.raw_points, pillar_set.mask
    p, n_v, _ = raw.shape
    feats = np.zeros((p, n_v, AUGMENTED_CHANNELS))
    if p == 0:
        return PillarSet(grid=grid, indices=pillar_set.indices, raw_points=raw,
                         mask=mask, features=feats)

    counts = mask.sum(axis=1, keepdims=True)  # (P, 1); every pillar has >= 1
    masked_xyz = raw[:, :, :3] * mask[:, :, None]
    means = masked_xyz.sum(axis=1, keepdims=True) / counts[:, :, None]

    centers = np.empty((p, 1, 3))
    centers[:, 0, 0] = grid.x_range[0] + (pillar_set.indices[:, 0] + 0.5) * grid.pillar_size[0]
    centers[:, 0, 1] = grid.y_range[0] + (pillar_set.indices[:, 1] + 0.5) * grid.pillar_size[1]
    centers[:, 0, 2] = grid.z_center

    feats[:, :, :4] = raw
    feats[:, :, 4:7] = raw[:, :, :3] - means
    feats[:, :, 7:10] = raw[:, :, :3] - centers
    feats *= mask[:, :, None]
    return PillarSet(grid=grid, indices=pillar_set.indices, raw_points=raw,
                     mask=mask, features=feats)


def pool_pillar_vectors(pillar_set: PillarSet, features: np.ndarray | None = None,
                        mode: str = "max") -> list[tuple[tuple[int, int], np.ndarray]]:
    """Reduce per-point features to one vector per pillar (max or mean over
    valid points), ready for :func:`scatter`."""
    feats = pillar_set.features if features is None else features
    if feats is None:
        raise ValueError("features not computed; call augment_points first")
    mask = pillar_set.mask
    out = []
    for i in range(pillar_set.num_pillars):
        rows = feats[i][mask[i]]
        vec = rows.max(axis=0) if mode == "max" else rows.mean(axis=0)
        out.append(((int(pillar_set.indices[i, 0]), int(pillar_set.indices[i, 1])), vec))
    return out


def scatter(pillar_vectors, grid: GridSpec, channels: int | None = None) -> PseudoImage:
    """Place per-pillar vectors into a dense C x H x W map, zeros elsewhere."""
    h_cells, w_cells = grid.shape
    if channels is None:
        if not pillar_vectors:
            raise ValueError("cannot infer channel count from an empty pillar list")
        channels = len(pillar_vectors[0][1])
    data = np.zeros((channels, h_cells, w_cells))
    seen = set()
    for (row, col), vec in pillar_vectors:
        if not (0 <= row < h_cells and 0 <= col < w_cells):
            raise IndexOutOfGridError(f"index ({row}, {col}) outside {h_cells}x{w_cells}")
        if (row, col) in seen:
            raise DuplicateIndexError(f"duplicate pillar index ({row}, {col})")
        seen.add((row, col))
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (channels,):
            raise ValueError(f"vector at ({row}, {col}) has width {vec.shape}, expected {channels}")
        data[:, row, col] = vec
    return PseudoImage(data=data)


def dump_pseudo_image(image: PseudoImage, path) -> None:
    """Debug dump: flat float64 binary plus a JSON shape header."""
    path = Path(path)
    path.write_bytes(image.data.astype("<f8").tobytes())
    header = {"channels": image.shape[0], "height": image.shape[1],
              "width": image.shape[2], "dtype": "<f8"}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(header))


def load_pseudo_image(path) -> PseudoImage:
    path = Path(path)
    header = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    data = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(
        header["channels"], header["height"], header["width"]).copy()
    return PseudoImage(data=data)
