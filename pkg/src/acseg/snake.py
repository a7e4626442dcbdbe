"""Parametric closed-contour evolution: tension + image force + balloon.

The contour is an ordered closed polyline in continuous pixel coordinates
(x right, y down).  "Clockwise" means clockwise as displayed on screen in
that frame; for a clockwise contour the balloon normal

    n = (dy, -dx) / |(dx, dy)|

points outward, so a positive balloon weight inflates.  The signed area
reported here uses the right-handed (y-up) convention, hence clockwise
contours have negative signed area.

The update contains exactly three terms (tension, image force, balloon);
there is deliberately no fourth-order rigidity term.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ContourVanished
from .force_field import VectorField, sample_force

__all__ = [
    "SnakeContour",
    "SnakeParams",
    "circle_contour",
    "signed_area",
    "tension",
    "balloon_normal",
    "step",
    "resample",
    "has_converged",
    "contour_to_csv",
    "contour_from_csv",
]

_MIN_VERTICES = 4


@dataclass
class SnakeContour:
    """Closed polyline with a per-vertex frozen flag.

    vertices: (N, 2) float array of (x, y); the segment from the last to
    the first vertex closes the curve.  Frozen vertices are never moved
    by ``step``.
    """

    vertices: np.ndarray
    frozen: np.ndarray = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 2)
        if len(self.vertices) < _MIN_VERTICES:
            raise ContourVanished(
                f"contour needs >= {_MIN_VERTICES} vertices, got {len(self.vertices)}"
            )
        if self.frozen is None:
            self.frozen = np.zeros(len(self.vertices), dtype=bool)
        else:
            self.frozen = np.asarray(self.frozen, dtype=bool).reshape(-1)
        if len(self.frozen) != len(self.vertices):
            raise ValueError("frozen flags must match vertex count")

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def orientation(self) -> str:
        return "clockwise" if signed_area(self) < 0 else "counterclockwise"

    def copy(self) -> "SnakeContour":
        return SnakeContour(self.vertices.copy(), self.frozen.copy())


@dataclass
class SnakeParams:
    alpha: float = 0.2       # tension weight
    gamma: float = 3.0       # image-force weight
    lam: float = 1.0         # balloon weight; negative deflates
    dt: float = 0.4
    d_min: float = 1.0
    d_max: float = 2.0
    conv_eps: float = 0.05   # pixels of per-step displacement
    conv_window: int = 10

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if not 0 < self.d_min < self.d_max:
            raise ValueError("need 0 < d_min < d_max")
        if self.conv_eps <= 0 or self.conv_window < 1:
            raise ValueError("invalid convergence controls")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        # the balloon must not tunnel a burn gap within one step
        if self.dt * abs(self.lam) >= self.d_min:
            raise ValueError("dt*|lam| must stay below d_min")


def circle_contour(
    cx: float, cy: float, radius: float, n: int = 64, clockwise: bool = True
) -> SnakeContour:
    """Regular n-gon approximating a circle, screen-clockwise by default."""
    t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    if not clockwise:
        t = t[::-1]
    verts = np.stack([cx + radius * np.cos(t), cy + radius * np.sin(t)], axis=1)
    return SnakeContour(verts)


def signed_area(contour: SnakeContour) -> float:
    """Signed polygon area, negative for screen-clockwise contours."""
    v = contour.vertices
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return -0.5 * float(np.sum(x * yn - xn * y))


def tension(contour: SnakeContour) -> np.ndarray:
    """Cyclic second difference v[i-1] - 2 v[i] + v[i+1] per vertex."""
    v = contour.vertices
    return np.roll(v, 1, axis=0) - 2.0 * v + np.roll(v, -1, axis=0)


def balloon_normal(contour: SnakeContour) -> np.ndarray:
    """Unit normals (dy, -dx)/|d| from central-difference tangents.

    Outward for clockwise contours.  A degenerate tangent (|d| < 1e-12)
    reuses the previous vertex's normal.
    """
    v = contour.vertices
    d = np.roll(v, -1, axis=0) - np.roll(v, 1, axis=0)
    length = np.hypot(d[:, 0], d[:, 1])
    ok = length >= 1e-12
    n = np.zeros_like(v)
    n[ok, 0] = d[ok, 1] / length[ok]
    n[ok, 1] = -d[ok, 0] / length[ok]
    if not ok.all():
        if not ok.any():
            raise ContourVanished("all tangents degenerate")
        # fall back on the nearest preceding valid normal, cyclically
        idx = np.where(ok, np.arange(len(v)), -1)
        for i in range(len(v)):
            if idx[i] < 0:
                idx[i] = idx[i - 1]
        for i in range(len(v)):  # second pass covers a leading run
            if idx[i] < 0:
                idx[i] = idx[i - 1]
        n = n[idx]
    return n


def step(contour: SnakeContour, force: VectorField, params: SnakeParams) -> SnakeContour:
    """One explicit Euler update; frozen vertices stay put.

    All new positions are computed from old positions (Jacobi update) and
    clamped to the force-field bounds.
    """
    v = contour.vertices
    move = params.alpha * tension(contour)
    if params.gamma != 0.0:
        move = move + params.gamma * sample_force(force, v)
    if params.lam != 0.0:
        move = move + params.lam * balloon_normal(contour)
    new = v + params.dt * move
    new[contour.frozen] = v[contour.frozen]
    new[:, 0] = np.clip(new[:, 0], 0.0, force.width - 1.0)
    new[:, 1] = np.clip(new[:, 1], 0.0, force.height - 1.0)
    return SnakeContour(new, contour.frozen.copy())


def resample(contour: SnakeContour, params: SnakeParams) -> SnakeContour:
    """Arc-length resampling into the [d_min, d_max] spacing band.

    Long segments gain midpoints; vertices closer than d_min to their
    successor merge.  A vertex produced from any frozen parent is frozen;
    merging keeps a frozen parent's position so freezes never drift.
    """
    verts = list(map(tuple, contour.vertices))
    frozen = list(contour.frozen)

    # split pass: midpoint insertion until every segment <= d_max
    i = 0
    while i < len(verts):
        j = (i + 1) % len(verts)
        a = np.array(verts[i])
        b = np.array(verts[j])
        if np.hypot(*(b - a)) > params.d_max:
            verts.insert(i + 1, tuple((a + b) / 2.0))
            frozen.insert(i + 1, frozen[i] or frozen[j])
        else:
            i += 1

    # merge pass: collapse near-coincident neighbours
    out_v: list[tuple] = []
    out_f: list[bool] = []
    i = 0
    n = len(verts)
    while i < n:
        j = (i + 1) % n
        a, b = np.array(verts[i]), np.array(verts[j])
        if j != 0 and np.hypot(*(b - a)) < params.d_min:
            fa, fb = frozen[i], frozen[j]
            if fa and not fb:
                keep = verts[i]
            elif fb and not fa:
                keep = verts[j]
            elif fa and fb:
                keep = verts[i]
            else:
                keep = tuple((a + b) / 2.0)
            out_v.append(keep)
            out_f.append(fa or fb)
            i += 2
        else:
            out_v.append(verts[i])
            out_f.append(frozen[i])
            i += 1

    # wrap-around pair
    if len(out_v) > _MIN_VERTICES:
        a, b = np.array(out_v[-1]), np.array(out_v[0])
        if np.hypot(*(b - a)) < params.d_min:
            if out_f[-1] and not out_f[0]:
                out_v[0] = out_v[-1]
            elif not (out_f[-1] or out_f[0]):
                out_v[0] = tuple((a + b) / 2.0)
            out_f[0] = out_f[0] or out_f[-1]
            out_v.pop()
            out_f.pop()

    if len(out_v) < _MIN_VERTICES:
        raise ContourVanished("contour collapsed during resampling")
    return SnakeContour(np.array(out_v), np.array(out_f))


def has_converged(history, eps: float, window: int) -> bool:
    """True iff the last ``window`` per-step displacements are all < eps."""
    if len(history) < window:
        return False
    return all(d < eps for d in list(history)[-window:])


def contour_to_csv(contour: SnakeContour) -> str:
    buf = io.StringIO()
    buf.write("x,y,frozen\n")
    for (x, y), fz in zip(contour.vertices, contour.frozen):
        buf.write(f"{x:.6f},{y:.6f},{int(fz)}\n")
    return buf.getvalue()


def contour_from_csv(text: str) -> SnakeContour:
    rows = [line.split(",") for line in text.strip().splitlines()[1:]]
    verts = np.array([[float(r[0]), float(r[1])] for r in rows])
    frozen = np.array([bool(int(r[2])) for r in rows])
    return SnakeContour(verts, frozen)
