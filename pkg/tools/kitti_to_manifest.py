#!/usr/bin/env python3
"""Convert KITTI tracking labels + calibration into a sequence manifest.

Standalone offline tool: reads a KITTI tracking label file (one object row
per frame, camera-frame boxes) and the matching calib file, selects one track
id, moves the boxes into the LiDAR frame, and writes the JSON-Lines manifest
the library ingests. The velodyne .bin files are referenced, not copied.

KITTI label columns (tracking flavor):
    frame track_id type truncated occluded alpha bbox(4) h w l x y z ry
Camera frame: x right, y down, z forward; (x, y, z) is the bottom-face
center; ry is the yaw around the camera y axis. The LiDAR-frame conversion
lifts the center by h/2 and maps the heading to yaw around +z.

Usage:
    python tools/kitti_to_manifest.py \
        --labels 0000.txt --calib 0000_calib.txt --track-id 1 \
        --velodyne-dir velodyne/0000 --out car_track1.jsonl
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np


def read_calib(path):
    """Return the 4x4 velodyne->camera transform from a KITTI calib file."""
    for line in Path(path).read_text().splitlines():
        if ":" in line:
            key, _, rest = line.partition(":")
        else:
            key, _, rest = line.partition(" ")
        if key.strip() in ("Tr_velo_to_cam", "Tr_velo_cam", "Tr"):
            vals = np.array([float(v) for v in rest.split()], dtype=float)
            tr = np.eye(4)
            tr[:3, :4] = vals.reshape(3, 4)
            return tr
    raise ValueError(f"{path}: no Tr_velo_to_cam entry found")


def camera_box_to_lidar(x, y, z, h, w, l, ry, cam_from_velo):
    """Map a camera-frame KITTI box to (cx, cy, cz, h, w, l, theta) in LiDAR."""
    velo_from_cam = np.linalg.inv(cam_from_velo)
    center_cam = np.array([x, y - h / 2.0, z, 1.0])  # lift bottom center
    cx, cy, cz, _ = velo_from_cam @ center_cam
    # camera yaw ry (about y, measured from the camera x axis) maps to
    # LiDAR yaw about +z measured from the LiDAR x axis
    theta = -ry - np.pi / 2.0
    theta = np.arctan2(np.sin(theta), np.cos(theta))
    return [cx, cy, cz, h, w, l, float(theta)]


def parse_labels(path, track_id):
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) < 17:
            raise ValueError(f"{path}:{lineno}: expected >= 17 columns, got {len(parts)}")
        frame, tid = int(parts[0]), int(parts[1])
        if tid != track_id or parts[2] == "DontCare":
            continue
        h, w, l = (float(v) for v in parts[10:13])
        x, y, z = (float(v) for v in parts[13:16])
        ry = float(parts[16])
        rows.append((frame, parts[2], h, w, l, x, y, z, ry))
    rows.sort()
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--labels", required=True, help="KITTI tracking label file")
    parser.add_argument("--calib", required=True, help="calib file with Tr_velo_to_cam")
    parser.add_argument("--track-id", type=int, required=True)
    parser.add_argument("--velodyne-dir", required=True,
                        help="directory of per-frame velodyne .bin files")
    parser.add_argument("--out", required=True, help="output manifest (.jsonl)")
    args = parser.parse_args(argv)

    cam_from_velo = read_calib(args.calib)
    rows = parse_labels(args.labels, args.track_id)
    if not rows:
        print(f"no rows for track id {args.track_id}", file=sys.stderr)
        return 2

    out_path = Path(args.out)
    velo_dir = Path(args.velodyne_dir)
    missing = 0
    with open(out_path, "w", encoding="utf-8") as fh:
        for frame, category, h, w, l, x, y, z, ry in rows:
            cloud = velo_dir / f"{frame:06d}.bin"
            if not cloud.exists():
                missing += 1
                continue
            rel = Path(cloud).resolve().relative_to(out_path.resolve().parent) \
                if cloud.resolve().is_relative_to(out_path.resolve().parent) \
                else cloud.resolve()
            box = camera_box_to_lidar(x, y, z, h, w, l, ry, cam_from_velo)
            fh.write(json.dumps({
                "cloud": str(rel),
                "box": [round(float(v), 9) for v in box],
                "category": category,
            }) + "\n")
    written = len(rows) - missing
    print(f"wrote {written} frames to {out_path}"
          + (f" ({missing} skipped: missing .bin)" if missing else ""))
    return 0 if written else 2


if __name__ == "__main__":
    sys.exit(main())
