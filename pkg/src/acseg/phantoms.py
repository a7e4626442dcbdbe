"""Synthetic test scenes with analytic ground truth.

Shapes are antialiased over a one-pixel transition band so gradient edge
maps behave like those of real rasters.  Every phantom records the exact
boundary polylines it was built from; noise is additive uniform and must
be driven by a caller-provided seeded generator to stay reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .image_core import GrayImage

__all__ = ["PHANTOM_KINDS", "PhantomSpec", "Phantom", "generate_phantom", "circle_polyline"]

PHANTOM_KINDS = ("two-circle", "three-circle", "gap-circle", "t-tube", "n-blob-plate")

_MARGIN = 4.0


@dataclass
class PhantomSpec:
    kind: str
    size: int = 256
    noise: float = 0.0
    fg: float = 0.1          # shape intensity
    bg: float = 0.9          # background intensity
    invert: bool = False
    gap_deg: float = 40.0    # gap-circle only
    stroke: float = 3.0      # gap-circle ring width
    blobs: int = 7           # n-blob-plate only

    def __post_init__(self):
        if self.kind not in PHANTOM_KINDS:
            raise ValueError(f"unknown phantom kind {self.kind!r}")
        if self.size < 32:
            raise ValueError("size too small")
        if not 0.0 <= self.noise < 1.0:
            raise ValueError("noise amplitude must lie in [0, 1)")
        if self.blobs < 1:
            raise ValueError("need at least one blob")


@dataclass
class Phantom:
    image: GrayImage
    truths: list          # ground-truth boundary polylines, (N, 2) arrays
    meta: dict = field(default_factory=dict)


def circle_polyline(cx: float, cy: float, r: float, n: int = 720) -> np.ndarray:
    t = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    return np.stack([cx + r * np.cos(t), cy + r * np.sin(t)], axis=1)


def _grid(size: int):
    ys, xs = np.mgrid[0:size, 0:size]
    return xs.astype(np.float64), ys.astype(np.float64)


def _cov_disk(xs, ys, cx, cy, r):
    """Antialiased coverage of a filled disk (1 inside, 0 outside)."""
    sd = np.hypot(xs - cx, ys - cy) - r
    return np.clip(0.5 - sd, 0.0, 1.0)


def _cov_outside_disk(xs, ys, cx, cy, r):
    sd = np.hypot(xs - cx, ys - cy) - r
    return np.clip(0.5 + sd, 0.0, 1.0)


def _cov_rect(xs, ys, x0, y0, x1, y1):
    covx = np.clip(np.minimum(xs - x0, x1 - xs) + 0.5, 0.0, 1.0)
    covy = np.clip(np.minimum(ys - y0, y1 - ys) + 0.5, 0.0, 1.0)
    return covx * covy


def _check_fits(size: int, cx: float, cy: float, r: float):
    if min(cx - r, cy - r) < _MARGIN or max(cx + r, cy + r) > size - 1 - _MARGIN:
        raise ValueError("shape does not fit inside the image margin")


def _two_circle(spec: PhantomSpec):
    s = spec.size
    xs, ys = _grid(s)
    c = (s - 1) / 2.0
    r_shell = 0.3125 * s          # 80 at size 256
    inner_c = (c + 0.09 * s, c - 0.07 * s)
    r_inner = 0.0586 * s          # 15 at size 256
    _check_fits(s, c, c, r_shell)
    cov = np.maximum(
        _cov_outside_disk(xs, ys, c, c, r_shell),
        _cov_disk(xs, ys, inner_c[0], inner_c[1], r_inner),
    )
    truths = [
        circle_polyline(c, c, r_shell),
        circle_polyline(inner_c[0], inner_c[1], r_inner),
    ]
    meta = {"center": (c, c), "shell_radius": r_shell,
            "inner_center": inner_c, "inner_radius": r_inner}
    return cov, truths, meta


def _three_circle(spec: PhantomSpec):
    s = spec.size
    xs, ys = _grid(s)
    r = 0.109 * s  # 28 at size 256
    centers = [
        (0.30 * s, 0.36 * s),
        (0.70 * s, 0.33 * s),
        (0.50 * s, 0.74 * s),
    ]
    cov = np.zeros((s, s))
    truths = []
    for cx, cy in centers:
        _check_fits(s, cx, cy, r)
        cov = np.maximum(cov, _cov_disk(xs, ys, cx, cy, r))
        truths.append(circle_polyline(cx, cy, r))
    return cov, truths, {"centers": centers, "radius": r}


def _gap_circle(spec: PhantomSpec):
    s = spec.size
    xs, ys = _grid(s)
    c = (s - 1) / 2.0
    r = 0.15625 * s  # 40 at size 256
    _check_fits(s, c, c, r + spec.stroke)
    sd = np.abs(np.hypot(xs - c, ys - c) - r)
    cov = np.clip(spec.stroke / 2.0 + 0.5 - sd, 0.0, 1.0)
    # erase the gap sector, centered on the +x axis
    ang = np.degrees(np.arctan2(ys - c, xs - c))
    half = spec.gap_deg / 2.0
    cov[np.abs(ang) < half] = 0.0
    truths = [circle_polyline(c, c, r)]
    return cov, truths, {"center": (c, c), "radius": r, "gap_deg": spec.gap_deg}


def _t_tube(spec: PhantomSpec):
    s = spec.size
    xs, ys = _grid(s)
    bx0, bx1 = 0.1875 * s, 0.8125 * s
    by0, by1 = 0.1875 * s, 0.328 * s
    sx0, sx1 = 0.4375 * s, 0.5625 * s
    sy1 = 0.8125 * s
    cov_tube = np.maximum(
        _cov_rect(xs, ys, bx0, by0, bx1, by1),
        _cov_rect(xs, ys, sx0, by0, sx1, sy1),
    )
    cov = 1.0 - cov_tube  # dark outside the tube
    outline = np.array([
        (bx0, by0), (bx1, by0), (bx1, by1), (sx1, by1),
        (sx1, sy1), (sx0, sy1), (sx0, by1), (bx0, by1),
    ])
    area = (bx1 - bx0) * (by1 - by0) + (sx1 - sx0) * (sy1 - by1)
    meta = {"outline": outline, "interior_area": area,
            "stem_seed": ((sx0 + sx1) / 2.0, sy1 - 0.09 * s)}
    return cov, [outline], meta


def _blob_layout(s: int, n: int):
    """Deterministic, well-separated blob centers and radii."""
    c = (s - 1) / 2.0
    ring_r = 0.30 * s
    centers = [(c, c)]
    for i in range(max(n - 1, 0)):
        a = 2.0 * math.pi * i / max(n - 1, 1) + 0.35
        centers.append((c + ring_r * math.cos(a), c + ring_r * math.sin(a)))
    radii = [0.055 * s * (1.0 + 0.25 * math.sin(3.1 * i + 1.0)) for i in range(n)]
    return centers[:n], radii


def _n_blob_plate(spec: PhantomSpec):
    s = spec.size
    xs, ys = _grid(s)
    centers, radii = _blob_layout(s, spec.blobs)
    cov = np.zeros((s, s))
    truths = []
    for (cx, cy), r in zip(centers, radii):
        _check_fits(s, cx, cy, r)
        cov = np.maximum(cov, _cov_disk(xs, ys, cx, cy, r))
        truths.append(circle_polyline(cx, cy, r))
    return cov, truths, {"centers": centers, "radii": radii}


_BUILDERS = {
    "two-circle": _two_circle,
    "three-circle": _three_circle,
    "gap-circle": _gap_circle,
    "t-tube": _t_tube,
    "n-blob-plate": _n_blob_plate,
}


def generate_phantom(spec: PhantomSpec, rng: np.random.Generator | None = None) -> Phantom:
    """Render the phantom and return it with its ground-truth polylines."""
    cov, truths, meta = _BUILDERS[spec.kind](spec)
    values = spec.bg + (spec.fg - spec.bg) * cov
    if spec.invert:
        values = 1.0 - values
    if spec.noise > 0.0:
        if rng is None:
            rng = np.random.default_rng(0)
        values = values + rng.uniform(-spec.noise, spec.noise, values.shape)
    values = np.clip(values, 0.0, 1.0)
    return Phantom(GrayImage(values), truths, meta)
