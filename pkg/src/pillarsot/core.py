"""Domain types, rigid/scale transforms, and dataset ingestion.

Point clouds are (N, 4) float64 arrays of [x, y, z, reflectance]. Boxes are
7-DOF oriented boxes [cx, cy, cz, h, w, l, theta] with the heading applied
about the vertical axis; l spans the local x axis, w the local y axis and
h the z axis. The canonical on-disk formats are headerless packed float32
`.bin` clouds (KITTI velodyne convention) and a JSON-Lines sequence
manifest with one frame per line.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateRegionError,
    EmptyInputError,
    MalformedLineError,
    MissingCloudFileError,
    NonFiniteValueError,
    TruncatedRecordError,
)

POINT_RECORD_BYTES = 16  # 4 little-endian float32 per point


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


def rotation_2d(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class PointCloud:
    """LiDAR returns as an (N, 4) array of [x, y, z, reflectance]."""

    points: np.ndarray
    frame_id: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.size == 0:
            pts = pts.reshape(0, 4)
        if pts.ndim != 2 or pts.shape[1] != 4:
            raise ValueError(f"expected (N, 4) points, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise NonFiniteValueError("point cloud contains NaN/Inf")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def xyz(self) -> np.ndarray:
        return self.points[:, :3]

    @property
    def reflectance(self) -> np.ndarray:
        return self.points[:, 3]


@dataclass(frozen=True)
class Box7:
    """Oriented 3D box: center (cx, cy, cz), size (h, w, l), heading theta."""

    cx: float
    cy: float
    cz: float
    h: float
    w: float
    l: float
    theta: float

    def __post_init__(self):
        vals = (self.cx, self.cy, self.cz, self.h, self.w, self.l, self.theta)
        if not all(math.isfinite(v) for v in vals):
            raise NonFiniteValueError("box fields must be finite")
        if self.h <= 0 or self.w <= 0 or self.l <= 0:
            raise ValueError("box sizes must be positive")
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    @property
    def center(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.cz])

    @property
    def size(self) -> np.ndarray:
        """(h, w, l)."""
        return np.array([self.h, self.w, self.l])

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.cz, self.h, self.w, self.l, self.theta])

    @classmethod
    def from_array(cls, arr) -> "Box7":
        cx, cy, cz, h, w, l, theta = (float(v) for v in arr)
        return cls(cx, cy, cz, h, w, l, theta)


@dataclass(frozen=True)
class RigidScaleTransform:
    """Yaw rotation + translation + uniform scale, applied about a pivot."""

    yaw: float = 0.0
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    scale: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.yaw):
            raise NonFiniteValueError("yaw must be finite")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError("scale must be positive and finite")

    def inverse(self, pivot=(0.0, 0.0, 0.0)) -> "RigidScaleTransform":
        """Inverse transform about the same pivot.

        Only valid when paired with an explicit pivot: applying the result
        with that pivot undoes the original transform.
        """
        inv_scale = 1.0 / self.scale
        rot = rotation_2d(-self.yaw)
        t = np.asarray(self.translation, dtype=float)
        inv_t = np.empty(3)
        inv_t[:2] = -inv_scale * (rot @ t[:2])
        inv_t[2] = -inv_scale * t[2]
        return RigidScaleTransform(yaw=-self.yaw, translation=tuple(inv_t), scale=inv_scale)


@dataclass(frozen=True)
class Frame:
    cloud: PointCloud
    gt_box: Box7


@dataclass(frozen=True)
class Sequence:
    frames: tuple[Frame, ...]
    category: str = "Car"
    sequence_id: str = "seq"

    def __post_init__(self):
        frames = tuple(self.frames)
        if len(frames) == 0:
            raise EmptyInputError("a sequence needs at least one frame")
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)


# --- binary point cloud IO ---

def load_point_cloud_bin(path, reflectance_max: float = 1.0, frame_id: int = 0) -> PointCloud:
    """Read packed little-endian float32 [x, y, z, r] records.

    Reflectance is divided by ``reflectance_max`` (KITTI raw is already in
    [0, 1]; some sensors emit 0..255).
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) % POINT_RECORD_BYTES != 0:
        raise TruncatedRecordError(
            f"{path}: {len(raw)} bytes is not a multiple of {POINT_RECORD_BYTES}"
        )
    pts = np.frombuffer(raw, dtype="<f4").reshape(-1, 4).astype(np.float64)
    if not np.all(np.isfinite(pts)):
        raise NonFiniteValueError(f"{path}: non-finite point values")
    pts[:, 3] /= float(reflectance_max)
    return PointCloud(pts, frame_id=frame_id)


def write_point_cloud_bin(cloud: PointCloud, path) -> None:
    """Inverse of :func:`load_point_cloud_bin` (reflectance written as-is)."""
    Path(path).write_bytes(cloud.points.astype("<f4").tobytes())


# --- geometry ---

def transform_cloud(cloud: PointCloud, t: RigidScaleTransform, pivot=None) -> PointCloud:
    """Apply ``p -> pivot + scale * R(yaw) @ (p - pivot) + translation``.

    The pivot defaults to the cloud centroid; reflectance passes through.
    """
    if len(cloud) == 0:
        return cloud
    if pivot is None:
        pivot = cloud.xyz.mean(axis=0)
    pivot = np.asarray(pivot, dtype=float)
    if not np.all(np.isfinite(pivot)):
        raise NonFiniteValueError("pivot must be finite")
    rel = cloud.xyz - pivot
    out = np.empty_like(rel)
    out[:, :2] = rel[:, :2] @ rotation_2d(t.yaw).T
    out[:, 2] = rel[:, 2]
    out = pivot + t.scale * out + np.asarray(t.translation, dtype=float)
    pts = np.column_stack([out, cloud.reflectance])
    return PointCloud(pts, frame_id=cloud.frame_id)


def cloud_to_local(cloud: PointCloud, center: Box7) -> PointCloud:
    """Express a cloud in a box's local frame (translate, de-rotate by theta)."""
    if len(cloud) == 0:
        return cloud
    rel = cloud.xyz - center.center
    local = np.empty_like(rel)
    local[:, :2] = rel[:, :2] @ rotation_2d(-center.theta).T
    local[:, 2] = rel[:, 2]
    return PointCloud(np.column_stack([local, cloud.reflectance]), frame_id=cloud.frame_id)


def crop_to_region(cloud: PointCloud, region, center: Box7 | None = None) -> PointCloud:
    """Keep points inside an axis-aligned region around ``center``.

    ``region`` is (xmin, ymin, zmin, xmax, ymax, zmax). Coordinates are first
    expressed relative to the center box (translated to its center, rotated by
    -theta); the returned cloud is in that local frame. Bounds are inclusive.
    """
    region = np.asarray(region, dtype=float)
    lo, hi = region[:3], region[3:]
    if np.any(lo >= hi):
        raise DegenerateRegionError(f"region min >= max: {region.tolist()}")
    local = cloud if center is None else cloud_to_local(cloud, center)
    if len(local) == 0:
        return local
    xyz = local.xyz
    keep = np.all((xyz >= lo) & (xyz <= hi), axis=1)
    return PointCloud(local.points[keep], frame_id=cloud.frame_id)


def box_corners(b: Box7) -> np.ndarray:
    """8 ordered corners: bottom face CCW starting at (+l/2, +w/2), then top.

    Yaw is applied about the vertical axis through (cx, cy).
    """
    dx, dy, dz = b.l / 2.0, b.w / 2.0, b.h / 2.0
    local = np.array([
        [dx, dy], [-dx, dy], [-dx, -dy], [dx, -dy],
    ])
    rotated = local @ rotation_2d(b.theta).T + np.array([b.cx, b.cy])
    corners = np.empty((8, 3))
    corners[:4, :2] = rotated
    corners[:4, 2] = b.cz - dz
    corners[4:, :2] = rotated
    corners[4:, 2] = b.cz + dz
    return corners


# --- sequence manifest ---

def ingest_sequence(manifest_path, reflectance_max: float = 1.0) -> Sequence:
    """Load a JSON-Lines manifest: one frame per line.

    Each line is ``{"cloud": <relative .bin path>, "box": [cx,cy,cz,h,w,l,theta],
    "category": <label>}``; boxes are in the LiDAR frame. Cloud paths resolve
    relative to the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    frames: list[Frame] = []
    category = None
    with open(manifest_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLineError(lineno, f"invalid JSON: {exc}") from exc
            if not isinstance(rec, dict) or "cloud" not in rec or "box" not in rec:
                raise MalformedLineError(lineno, "missing 'cloud' or 'box' field")
            box = rec["box"]
            if not isinstance(box, (list, tuple)) or len(box) != 7:
                raise MalformedLineError(lineno, "'box' must have 7 entries")
            cloud_path = base / rec["cloud"]
            if not cloud_path.exists():
                raise MissingCloudFileError(str(cloud_path))
            try:
                gt_box = Box7.from_array(box)
            except (ValueError, TypeError, NonFiniteValueError) as exc:
                raise MalformedLineError(lineno, f"bad box: {exc}") from exc
            cloud = load_point_cloud_bin(cloud_path, reflectance_max, frame_id=len(frames))
            frames.append(Frame(cloud=cloud, gt_box=gt_box))
            if category is None:
                category = rec.get("category", "Car")
    if not frames:
        raise EmptyInputError(f"{manifest_path}: manifest has no frames")
    return Sequence(frames=tuple(frames), category=category or "Car",
                    sequence_id=manifest_path.stem)


def write_sequence(seq: Sequence, out_dir) -> Path:
    """Write a sequence as .bin clouds plus a manifest; returns manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / f"{seq.sequence_id}.jsonl"
    with open(manifest, "w", encoding="utf-8") as fh:
        for i, frame in enumerate(seq.frames):
            name = f"{seq.sequence_id}_{i:06d}.bin"
            write_point_cloud_bin(frame.cloud, out_dir / name)
            rec = {
                "cloud": name,
                "box": [round(v, 9) for v in frame.gt_box.as_array().tolist()],
                "category": seq.category,
            }
            fh.write(json.dumps(rec) + "\n")
    return manifest
