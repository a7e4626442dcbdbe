"""Distances between closed polylines, used for accuracy checks."""

from __future__ import annotations

import numpy as np

__all__ = [
    "point_to_polyline",
    "directed_distance",
    "hausdorff_distance",
    "mean_contour_distance",
]


def point_to_polyline(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Distance from each point to a closed polyline (exact segment distance)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    v = np.asarray(poly, dtype=np.float64)
    a = v
    b = np.roll(v, -1, axis=0)
    e = b - a                                          # (N, 2)
    ll = np.maximum(np.einsum("ij,ij->i", e, e), 1e-30)
    # (M, N) projections of every point on every segment
    diff = pts[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("mnj,nj->mn", diff, e) / ll[None, :], 0.0, 1.0)
    proj = a[None, :, :] + t[:, :, None] * e[None, :, :]
    d = np.hypot(*(pts[:, None, :] - proj).transpose(2, 0, 1))
    return d.min(axis=1)


def directed_distance(src: np.ndarray, dst: np.ndarray) -> float:
    """max over src vertices of distance to the dst polyline."""
    return float(point_to_polyline(src, dst).max())


def hausdorff_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two closed polylines."""
    return max(directed_distance(a, b), directed_distance(b, a))


def mean_contour_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric mean vertex-to-polyline distance."""
    da = point_to_polyline(a, b).mean()
    db = point_to_polyline(b, a).mean()
    return float((da + db) / 2.0)
