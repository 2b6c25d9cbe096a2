"""Rotated 3D IoU, center error, and one-pass-evaluation aggregation.

IoU intersects the two yawed BEV rectangles by Sutherland-Hodgman polygon
clipping and multiplies by the vertical overlap. Success is 100x the AUC of
the fraction-of-frames-above-IoU-threshold curve over 101 thresholds on
[0, 1]; Precision is 100x the AUC of the fraction-below-center-error curve
over 101 thresholds on [0, 2] m. Thresholds are inclusive except at the
degenerate endpoint (IoU threshold 0 and the maximum distance threshold stay
strict) so that a perfect tracker scores exactly 100 and a total miss exactly
0. Reports aggregate per category with both unweighted (mean-by-class) and
frame-count-weighted (mean-by-frame) means.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, asdict

import numpy as np

from .core import Box7, box_corners
from .errors import EmptyInputError

AREA_EPS = 1e-9
_trapezoid = getattr(np, "trapezoid", np.trapz)
SUCCESS_THRESHOLDS = np.linspace(0.0, 1.0, 101)
PRECISION_THRESHOLDS = np.linspace(0.0, 2.0, 101)


@dataclass(frozen=True)
class FrameResult:
    iou: float
    center_dist: float
    category: str = "Car"
    sequence_id: str = "seq"
    frame: int = 0


@dataclass(frozen=True)
class CategoryScore:
    category: str
    frames: int
    success: float
    precision: float


@dataclass(frozen=True)
class OpeSummary:
    per_category: tuple[CategoryScore, ...]
    mean_by_class: tuple[float, float]   # (success, precision), unweighted
    mean_by_frame: tuple[float, float]   # frame-count weighted


def _bev_rect(b: Box7) -> np.ndarray:
    """BEV footprint as a CCW 4-gon (first four box corners)."""
    return box_corners(b)[:4, :2]


def _shoelace_area(poly: np.ndarray) -> float:
    if poly.shape[0] < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _clip_polygon(subject: np.ndarray, clip_rect: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon by a CCW rectangle."""
    output = [tuple(p) for p in subject]
    n = clip_rect.shape[0]
    for i in range(n):
        a = clip_rect[i]
        b = clip_rect[(i + 1) % n]
        edge = b - a
        if not output:
            return np.zeros((0, 2))
        inputs = output
        output = []
        prev = inputs[-1]
        prev_inside = edge[0] * (prev[1] - a[1]) - edge[1] * (prev[0] - a[0]) >= -AREA_EPS
        for cur in inputs:
            cur_inside = edge[0] * (cur[1] - a[1]) - edge[1] * (cur[0] - a[0]) >= -AREA_EPS
            if cur_inside != prev_inside:
                output.append(_edge_intersection(prev, cur, a, b))
            if cur_inside:
                output.append(cur)
            prev, prev_inside = cur, cur_inside
    return np.array(output) if output else np.zeros((0, 2))


def _edge_intersection(p1, p2, a, b):
    d1 = (p2[0] - p1[0], p2[1] - p1[1])
    d2 = (b[0] - a[0], b[1] - a[1])
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(denom) < 1e-15:
        return p2
    t = ((a[0] - p1[0]) * d2[1] - (a[1] - p1[1]) * d2[0]) / denom
    return (p1[0] + t * d1[0], p1[1] + t * d1[1])


def iou3d(a: Box7, b: Box7) -> float:
    """Rotated 3D IoU: BEV polygon intersection times vertical overlap."""
    inter_poly = _clip_polygon(_bev_rect(a), _bev_rect(b))
    inter_area = _shoelace_area(inter_poly)
    if inter_area < AREA_EPS:
        return 0.0
    z_top = min(a.cz + a.h / 2, b.cz + b.h / 2)
    z_bot = max(a.cz - a.h / 2, b.cz - b.h / 2)
    z_overlap = max(0.0, z_top - z_bot)
    inter = inter_area * z_overlap
    vol_a = a.h * a.w * a.l
    vol_b = b.h * b.w * b.l
    union = vol_a + vol_b - inter
    if union <= 0:
        return 0.0
    return float(min(max(inter / union, 0.0), 1.0))


def center_distance(a: Box7, b: Box7) -> float:
    """Euclidean distance between the 3D box centers."""
    return float(np.linalg.norm(a.center - b.center))


def success_score(ious) -> float:
    """100 x AUC of t -> fraction(iou above t) over 101 thresholds on [0, 1]."""
    arr = np.asarray(list(ious), dtype=float)
    if arr.size == 0:
        raise EmptyInputError("success_score needs at least one IoU")
    t = SUCCESS_THRESHOLDS
    curve = (arr[None, :] >= t[:, None]).mean(axis=1)
    curve[0] = np.mean(arr > 0.0)  # zero overlap is never a success
    return float(100.0 * _trapezoid(curve, t) / (t[-1] - t[0]))


def precision_score(dists) -> float:
    """100 x AUC of t -> fraction(error below t) over 101 thresholds on [0, 2] m."""
    arr = np.asarray(list(dists), dtype=float)
    if arr.size == 0:
        raise EmptyInputError("precision_score needs at least one distance")
    t = PRECISION_THRESHOLDS
    curve = (arr[None, :] <= t[:, None]).mean(axis=1)
    curve[-1] = np.mean(arr < t[-1])  # an error at/over the range is a miss
    return float(100.0 * _trapezoid(curve, t) / (t[-1] - t[0]))


def ope_report(frame_results) -> OpeSummary:
    """Group frame results by category and aggregate both ways."""
    results = list(frame_results)
    if not results:
        raise EmptyInputError("ope_report needs at least one frame result")
    by_cat: dict[str, list[FrameResult]] = {}
    for r in results:
        by_cat.setdefault(r.category, []).append(r)
    scores = []
    for cat in sorted(by_cat):
        rows = by_cat[cat]
        scores.append(CategoryScore(
            category=cat,
            frames=len(rows),
            success=success_score([r.iou for r in rows]),
            precision=precision_score([r.center_dist for r in rows]),
        ))
    succ = np.array([s.success for s in scores])
    prec = np.array([s.precision for s in scores])
    weights = np.array([s.frames for s in scores], dtype=float)
    weights /= weights.sum()
    return OpeSummary(
        per_category=tuple(scores),
        mean_by_class=(float(succ.mean()), float(prec.mean())),
        mean_by_frame=(float(succ @ weights), float(prec @ weights)),
    )


# --- report emission ---

def summary_to_csv(summary: OpeSummary) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["category", "frames", "success", "precision"])
    total_frames = sum(s.frames for s in summary.per_category)
    for s in summary.per_category:
        writer.writerow([s.category, s.frames, f"{s.success:.2f}", f"{s.precision:.2f}"])
    writer.writerow(["mean_by_class", total_frames,
                     f"{summary.mean_by_class[0]:.2f}", f"{summary.mean_by_class[1]:.2f}"])
    writer.writerow(["mean_by_frame", total_frames,
                     f"{summary.mean_by_frame[0]:.2f}", f"{summary.mean_by_frame[1]:.2f}"])
    return buf.getvalue()


def summary_to_json(summary: OpeSummary) -> str:
    return json.dumps({
        "per_category": [asdict(s) for s in summary.per_category],
        "mean_by_class": {"success": summary.mean_by_class[0],
                          "precision": summary.mean_by_class[1]},
        "mean_by_frame": {"success": summary.mean_by_frame[0],
                          "precision": summary.mean_by_frame[1]},
    }, indent=2)


def frame_results_to_csv(results) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["sequence_id", "category", "frame", "iou", "center_dist"])
    for r in results:
        writer.writerow([r.sequence_id, r.category, r.frame,
                         f"{r.iou:.6f}", f"{r.center_dist:.6f}"])
    return buf.getvalue()


def frame_results_from_csv(text: str) -> list[FrameResult]:
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for row in reader:
        out.append(FrameResult(
            iou=float(row["iou"]), center_dist=float(row["center_dist"]),
            category=row["category"], sequence_id=row["sequence_id"],
            frame=int(row["frame"])))
    if not out:
        raise EmptyInputError("results CSV has no rows")
    return out
