"""Narrow-band level-set geometric active contour, two-stage scheme.

Stage 1 runs propagation (edge-stopped, Godunov upwind) plus curvature
smoothing; stage 2 freezes propagation and advects the front with the
image force at constant speed (the force enters only through its
direction unless ``advection_mode="raw"``), which pins the front on the
potential ridge and bridges edge gaps.  A cross-border initialization gets
an extra advection stage before stage 1.

The signed-distance function is rebuilt by stamping a precomputed circle
stencil along the sub-pixel zero crossings and keeping the minimum
distance per pixel; pixels the stamps never reach fall back to signed
sentinel values one pixel beyond the band radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import CflViolation, ContourVanished
from .snake import has_converged
from .force_field import (
    ForceFieldParams,
    PotentialField,
    VectorField,
    compute_force,
    compute_potential,
)
from .image_core import EdgeMap, GrayImage, grad_xy, gradient_magnitude, threshold_edges

__all__ = [
    "LevelSetGrid",
    "GacParams",
    "GacConfig",
    "GacResult",
    "CircleStencil",
    "build_circle_stencil",
    "build_square_stencil",
    "speed_kl",
    "step_stage1",
    "step_stage2",
    "step_attract",
    "reinit_sdf",
    "zero_crossings",
    "extract_zero_level",
    "sdf_disk",
    "sdf_rect",
    "sdf_polygon",
    "grid_from_sdf",
    "segment_gac",
]

SDF_SHAPES = ("r", "k_times_r", "r_squared")
ADVECTION_MODES = ("unit_normalized", "raw")

_GRAD_GUARD = 1e-8


@dataclass
class LevelSetGrid:
    """Signed-distance-like grid: negative inside, positive outside.

    Values are live only on ``band`` pixels; everything else holds the
    signed sentinel (band_radius + 1 pushed through the SDF shape map).
    """

    phi: np.ndarray
    band: np.ndarray
    band_radius: float
    sentinel: float = None

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=np.float64)
        self.band = np.asarray(self.band, dtype=bool)
        if self.phi.shape != self.band.shape:
            raise ValueError("phi and band shapes differ")
        if self.band_radius <= 0:
            raise ValueError("band_radius must be positive")
        if self.sentinel is None:
            self.sentinel = self.band_radius + 1.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.phi.shape

    def copy(self) -> "LevelSetGrid":
        return LevelSetGrid(self.phi.copy(), self.band.copy(), self.band_radius, self.sentinel)

    def inside_mask(self) -> np.ndarray:
        return self.phi < 0


@dataclass
class GacParams:
    lambda_w: float = 1.0      # propagation; positive grows the inside region
    eps_w: float = 0.1         # curvature smoothing
    gamma_w: float = 1.0       # advection by image force
    m: float = 4.0             # exponent in the edge-stopping factor
    dt: float = 0.4
    band_radius: float = 6.0
    reinit_every: int = 5
    # px, on nearest-neighbour matched zero-level points; must sit above the
    # ~0.1 px jolt each reinitialization applies and below dt*speed travel
    conv_eps: float = 0.15
    conv_window: int = 8
    run_attract: bool = False  # extra advection stage for cross-border seeds
    advection_mode: str = "unit_normalized"
    sdf_shape: str = "r"
    sdf_k: float = 1.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.m <= 0:
            raise ValueError("m must be > 0")
        if self.band_radius <= 1:
            raise ValueError("band_radius must exceed 1 pixel")
        if self.reinit_every < 1:
            raise ValueError("reinit_every must be >= 1")
        if self.conv_eps <= 0 or self.conv_window < 1:
            raise ValueError("invalid convergence controls")
        if self.advection_mode not in ADVECTION_MODES:
            raise ValueError(f"unknown advection_mode {self.advection_mode!r}")
        if self.sdf_shape not in SDF_SHAPES:
            raise ValueError(f"unknown sdf_shape {self.sdf_shape!r}")
        if self.sdf_k <= 0:
            raise ValueError("sdf_k must be > 0")


# ---------------------------------------------------------------------------
# stencils


@dataclass
class CircleStencil:
    """Disk of integer offsets with exact center distances, sorted by distance."""

    offsets: np.ndarray   # (K, 2) int, (dx, dy)
    dists: np.ndarray     # (K,) float
    metric: str = "euclidean"


def build_circle_stencil(band_radius: float) -> CircleStencil:
    r = int(math.floor(band_radius))
    d = np.arange(-r, r + 1)
    dx, dy = np.meshgrid(d, d)
    dist = np.hypot(dx, dy)
    keep = dist <= band_radius
    offsets = np.stack([dx[keep], dy[keep]], axis=1)
    dists = dist[keep]
    order = np.lexsort((offsets[:, 1], offsets[:, 0], dists))
    return CircleStencil(offsets[order], dists[order], "euclidean")


def build_square_stencil(band_radius: float) -> CircleStencil:
    """Square stencil carrying ring-index (Chebyshev) distances.

    Kept for comparison: its corner distances under-estimate the true
    Euclidean distance by up to a factor sqrt(2), which is exactly the
    error the circle stencil removes.
    """
    r = int(math.floor(band_radius))
    d = np.arange(-r, r + 1)
    dx, dy = np.meshgrid(d, d)
    dist = np.maximum(np.abs(dx), np.abs(dy)).astype(np.float64)
    offsets = np.stack([dx.ravel(), dy.ravel()], axis=1)
    dists = dist.ravel()
    order = np.lexsort((offsets[:, 1], offsets[:, 0], dists))
    return CircleStencil(offsets[order], dists[order], "chebyshev")


# ---------------------------------------------------------------------------
# finite differences


def _one_sided(phi: np.ndarray):
    """Backward/forward differences with edge replication (zero at borders)."""
    p = np.pad(phi, 1, mode="edge")
    dmx = phi - p[1:-1, :-2]
    dpx = p[1:-1, 2:] - phi
    dmy = phi - p[:-2, 1:-1]
    dpy = p[2:, 1:-1] - phi
    return dmx, dpx, dmy, dpy


def _curvature_term(phi: np.ndarray) -> np.ndarray:
    """kappa * |grad phi| with central differences, guarded and clamped."""
    gx, gy = grad_xy(phi)
    p = np.pad(phi, 1, mode="edge")
    pxx = p[1:-1, 2:] - 2 * phi + p[1:-1, :-2]
    pyy = p[2:, 1:-1] - 2 * phi + p[:-2, 1:-1]
    pxy = (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2]) / 4.0
    g2 = gx * gx + gy * gy
    mag = np.sqrt(g2)
    num = pxx * gy * gy - 2.0 * gx * gy * pxy + pyy * gx * gx
    kappa = np.where(mag >= _GRAD_GUARD, num / np.maximum(g2 * mag, _GRAD_GUARD**3), 0.0)
    kappa = np.clip(kappa, -1.0, 1.0)  # curvature beyond 1/px is a grid artifact
    return kappa * mag


def speed_kl(pot: PotentialField, m: float) -> np.ndarray:
    """Edge-stopping speed 1 / (1 + |grad P|^m), in (0, 1]."""
    if m <= 0:
        raise ValueError("m must be > 0")
    gx, gy = grad_xy(pot.values)
    return 1.0 / (1.0 + np.hypot(gx, gy) ** m)


# ---------------------------------------------------------------------------
# steps


def _check_cfl(dt: float, max_speed: float) -> None:
    if dt * max_speed > 0.5 + 1e-12:
        raise CflViolation(dt, max_speed)


def step_stage1(grid: LevelSetGrid, kl: np.ndarray, params: GacParams) -> LevelSetGrid:
    """Propagation + smoothing: d(phi)/dt = -lambda*kl*|grad phi| + eps*kappa*|grad phi|.

    The propagation gradient magnitude is the Godunov upwind selection for
    the local front speed; only band pixels change.
    """
    phi = grid.phi
    speed = params.lambda_w * kl
    _check_cfl(params.dt, float(np.abs(speed[grid.band]).max()) if grid.band.any() else 0.0)

    dmx, dpx, dmy, dpy = _one_sided(phi)
    grad_plus = np.sqrt(
        np.maximum(dmx, 0) ** 2 + np.minimum(dpx, 0) ** 2
        + np.maximum(dmy, 0) ** 2 + np.minimum(dpy, 0) ** 2
    )
    grad_minus = np.sqrt(
        np.maximum(dpx, 0) ** 2 + np.minimum(dmx, 0) ** 2
        + np.maximum(dpy, 0) ** 2 + np.minimum(dmy, 0) ** 2
    )
    # phi_t + speed*|grad phi| = 0, upwind branch picked by the speed sign
    dphi = -(np.maximum(speed, 0) * grad_plus + np.minimum(speed, 0) * grad_minus)
    if params.eps_w != 0.0:
        dphi = dphi + params.eps_w * _curvature_term(phi)

    out = grid.copy()
    out.phi[grid.band] = phi[grid.band] + params.dt * dphi[grid.band]
    np.clip(out.phi, -grid.sentinel, grid.sentinel, out=out.phi)
    return out


def _advection_field(force: VectorField, params: GacParams):
    fx, fy = force.fx, force.fy
    if params.advection_mode == "unit_normalized":
        mag = np.hypot(fx, fy)
        scale = np.where(mag > _GRAD_GUARD, 1.0 / np.maximum(mag, _GRAD_GUARD), 0.0)
        return fx * scale, fy * scale, 1.0
    return fx, fy, float(np.hypot(fx, fy).max())


def step_stage2(grid: LevelSetGrid, force: VectorField, params: GacParams) -> LevelSetGrid:
    """Isotropic image-force advection + smoothing.

    The advection term is the upwind sum
    max(Fx,0)*Dx- + min(Fx,0)*Dx+ + max(Fy,0)*Dy- + min(Fy,0)*Dy+,
    i.e. transport along the force direction; with unit-normalized force
    the front moves at constant speed gamma wherever a force exists.
    """
    fx, fy, fmax = _advection_field(force, params)
    _check_cfl(params.dt, abs(params.gamma_w) * fmax)

    phi = grid.phi
    dmx, dpx, dmy, dpy = _one_sided(phi)
    adv = (
        np.maximum(fx, 0) * dmx + np.minimum(fx, 0) * dpx
        + np.maximum(fy, 0) * dmy + np.minimum(fy, 0) * dpy
    )
    dphi = -params.gamma_w * adv
    if params.eps_w != 0.0:
        dphi = dphi + params.eps_w * _curvature_term(phi)

    out = grid.copy()
    out.phi[grid.band] = phi[grid.band] + params.dt * dphi[grid.band]
    np.clip(out.phi, -grid.sentinel, grid.sentinel, out=out.phi)
    return out


def step_attract(grid: LevelSetGrid, force: VectorField, params: GacParams) -> LevelSetGrid:
    """Pre-stage for cross-border seeds; identical dynamics to stage 2."""
    return step_stage2(grid, force, params)


# ---------------------------------------------------------------------------
# zero level and reinitialization


def zero_crossings(phi: np.ndarray) -> np.ndarray:
    """Sub-pixel zero crossings along grid edges as (M, 2) (x, y) points."""
    inside = phi < 0
    pts = []
    # horizontal edges
    cross = inside[:, :-1] != inside[:, 1:]
    ys, xs = np.nonzero(cross)
    if len(xs):
        a = phi[ys, xs]
        b = phi[ys, xs + 1]
        t = a / (a - b)
        pts.append(np.stack([xs + t, ys.astype(np.float64)], axis=1))
    # vertical edges
    cross = inside[:-1, :] != inside[1:, :]
    ys, xs = np.nonzero(cross)
    if len(xs):
        a = phi[ys, xs]
        b = phi[ys + 1, xs]
        t = a / (a - b)
        pts.append(np.stack([xs.astype(np.float64), ys + t], axis=1))
    if not pts:
        return np.zeros((0, 2))
    return np.concatenate(pts, axis=0)


def _shape_transform(d: np.ndarray | float, shape: str, k: float):
    if shape == "r":
        return d
    if shape == "k_times_r":
        return k * d
    return np.square(d)


def reinit_sdf(
    grid: LevelSetGrid, stencil: CircleStencil, shape: str = "r", k: float = 1.0
) -> LevelSetGrid:
    """Rebuild the signed distance by stamping the stencil on the zero level.

    Every pixel covered by a stamp takes the minimum stencil distance,
    corrected by the crossing's sub-pixel offset; the sign is inherited
    from the current phi.  Pixels no stamp reaches become sentinels, and
    the band is rebuilt from the reached set.
    """
    pts = zero_crossings(grid.phi)
    if len(pts) == 0:
        raise ContourVanished("zero level set is empty")
    h, w = grid.shape
    base = np.rint(pts).astype(int)
    delta = pts - base

    n_off = len(stencil.offsets)
    px = (base[:, 0][None, :] + stencil.offsets[:, 0][:, None]).ravel()
    py = (base[:, 1][None, :] + stencil.offsets[:, 1][:, None]).ravel()
    ddx = stencil.offsets[:, 0][:, None] - delta[:, 0][None, :]
    ddy = stencil.offsets[:, 1][:, None] - delta[:, 1][None, :]
    if stencil.metric == "euclidean":
        cand = np.hypot(ddx, ddy).ravel()
    else:
        cand = np.maximum(np.abs(ddx), np.abs(ddy)).ravel()

    ok = (px >= 0) & (px < w) & (py >= 0) & (py < h)
    flat = py[ok] * w + px[ok]
    cand = cand[ok]

    order = np.argsort(flat, kind="stable")
    flat = flat[order]
    cand = cand[order]
    starts = np.flatnonzero(np.concatenate(([True], flat[1:] != flat[:-1])))
    mins = np.minimum.reduceat(cand, starts)

    dist = np.full(h * w, np.inf)
    dist[flat[starts]] = mins
    dist = dist.reshape(h, w)

    band = dist <= grid.band_radius
    sign = np.where(grid.phi < 0, -1.0, 1.0)
    sentinel = float(_shape_transform(grid.band_radius + 1.0, shape, k))
    phi = np.where(band, sign * _shape_transform(np.where(band, dist, 0.0), shape, k),
                   sign * sentinel)
    return LevelSetGrid(phi, band, grid.band_radius, sentinel)


# ---------------------------------------------------------------------------
# marching squares

# segment tables keyed by the 4-bit inside configuration
# corners: TL=1, TR=2, BR=4, BL=8; edges named top/right/bottom/left
_SEGTABLE = {
    1: [("left", "top")],
    2: [("top", "right")],
    4: [("right", "bottom")],
    8: [("bottom", "left")],
    3: [("left", "right")],
    6: [("top", "bottom")],
    12: [("left", "right")],
    9: [("top", "bottom")],
    7: [("left", "bottom")],
    11: [("right", "bottom")],
    13: [("top", "right")],
    14: [("left", "top")],
}


def _ms_segments(phi: np.ndarray):
    """Yield marching-squares segments as pairs of (edge_id, point)."""
    h, w = phi.shape
    inside = (phi < 0).astype(np.int8)
    config = (
        inside[:-1, :-1] + 2 * inside[:-1, 1:] + 4 * inside[1:, 1:] + 8 * inside[1:, :-1]
    )
    ys, xs = np.nonzero((config != 0) & (config != 15))

    def edge_point(kind: str, r: int, c: int):
        if kind == "top":
            a, b = phi[r, c], phi[r, c + 1]
            t = a / (a - b)
            return ("h", r, c), (c + t, float(r))
        if kind == "bottom":
            a, b = phi[r + 1, c], phi[r + 1, c + 1]
            t = a / (a - b)
            return ("h", r + 1, c), (c + t, float(r + 1))
        if kind == "left":
            a, b = phi[r, c], phi[r + 1, c]
            t = a / (a - b)
            return ("v", r, c), (float(c), r + t)
        a, b = phi[r, c + 1], phi[r + 1, c + 1]
        t = a / (a - b)
        return ("v", r, c + 1), (float(c + 1), r + t)

    for r, c in zip(ys.tolist(), xs.tolist()):
        cfg = int(config[r, c])
        if cfg in (5, 10):
            center = (phi[r, c] + phi[r, c + 1] + phi[r + 1, c] + phi[r + 1, c + 1]) / 4.0
            if cfg == 5:
                pairs = (
                    [("top", "right"), ("bottom", "left")]
                    if center < 0
                    else [("left", "top"), ("right", "bottom")]
                )
            else:
                pairs = (
                    [("left", "top"), ("right", "bottom")]
                    if center < 0
                    else [("top", "right"), ("bottom", "left")]
                )
        else:
            pairs = _SEGTABLE[cfg]
        for e1, e2 in pairs:
            yield edge_point(e1, r, c), edge_point(e2, r, c)


def _chain_segments(segments):
    """Stitch cell segments into polylines; closed loops where possible."""
    adj: dict = {}
    points: dict = {}
    for (id1, p1), (id2, p2) in segments:
        points[id1] = p1
        points[id2] = p2
        adj.setdefault(id1, []).append(id2)
        adj.setdefault(id2, []).append(id1)

    visited = set()
    loops = []
    # open chains first (edges of degree 1), then cycles
    starts = sorted((e for e, nb in adj.items() if len(nb) == 1)) + sorted(adj)
    for start in starts:
        if start in visited or start not in adj:
            continue
        chain = [start]
        visited.add(start)
        prev = None
        cur = start
        while True:
            nxt = None
            for cand in adj[cur]:
                if cand != prev and cand not in visited:
                    nxt = cand
                    break
            if nxt is None:
                break
            chain.append(nxt)
            visited.add(nxt)
            prev, cur = cur, nxt
        loops.append(np.array([points[e] for e in chain]))
    return loops


def extract_zero_level(grid: LevelSetGrid) -> list[np.ndarray]:
    """Closed sub-pixel polylines of the zero level (marching squares).

    Saddle cells are resolved with the cell-average rule.  If the front
    crosses the grid border, the field is padded with a positive rim so
    every contour still closes (coordinates are clamped back to the grid).
    """
    phi = grid.phi
    border = np.concatenate([phi[0, :], phi[-1, :], phi[:, 0], phi[:, -1]])
    neg = border < 0
    # rim-pad only when the front actually crosses the border; an entirely
    # negative border means the front left the domain and owes no loop
    pad = bool(neg.any() and not neg.all())
    h, w = grid.shape
    if pad:
        phi = np.pad(phi, 1, constant_values=grid.sentinel)
    loops = _chain_segments(_ms_segments(phi))
    out = []
    for loop in loops:
        if len(loop) < 3:
            continue
        if pad:
            loop = loop - 1.0
            loop[:, 0] = np.clip(loop[:, 0], 0, w - 1)
            loop[:, 1] = np.clip(loop[:, 1], 0, h - 1)
        out.append(loop)
    return out


# ---------------------------------------------------------------------------
# seed SDFs


def _grid_xy(shape: tuple[int, int]):
    h, w = shape
    ys, xs = np.mgrid[0:h, 0:w]
    return xs.astype(np.float64), ys.astype(np.float64)


def sdf_disk(shape: tuple[int, int], cx: float, cy: float, r: float) -> np.ndarray:
    xs, ys = _grid_xy(shape)
    return np.hypot(xs - cx, ys - cy) - r


def sdf_rect(shape: tuple[int, int], x0: float, y0: float, x1: float, y1: float) -> np.ndarray:
    xs, ys = _grid_xy(shape)
    cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
    hx, hy = (x1 - x0) / 2.0, (y1 - y0) / 2.0
    qx = np.abs(xs - cx) - hx
    qy = np.abs(ys - cy) - hy
    outside = np.hypot(np.maximum(qx, 0), np.maximum(qy, 0))
    inside = np.minimum(np.maximum(qx, qy), 0)
    return outside + inside


def sdf_polygon(shape: tuple[int, int], vertices: np.ndarray) -> np.ndarray:
    """Brute-force signed distance to a closed polygon (even-odd inside)."""
    v = np.asarray(vertices, dtype=np.float64)
    xs, ys = _grid_xy(shape)
    px, py = xs.ravel(), ys.ravel()
    dist = np.full(px.shape, np.inf)
    inside = np.zeros(px.shape, dtype=bool)
    n = len(v)
    for i in range(n):
        ax, ay = v[i]
        bx, by = v[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        ll = ex * ex + ey * ey
        t = np.clip(((px - ax) * ex + (py - ay) * ey) / max(ll, 1e-30), 0.0, 1.0)
        dx = px - (ax + t * ex)
        dy = py - (ay + t * ey)
        dist = np.minimum(dist, np.hypot(dx, dy))
        crosses = (ay <= py) != (by <= py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = ax + (py - ay) * ex / np.where(ey == 0, np.inf, ey)
        inside ^= crosses & (px < xint)
    sd = np.where(inside, -dist, dist)
    return sd.reshape(shape)


def grid_from_sdf(sdf: np.ndarray, params: GacParams) -> LevelSetGrid:
    """Band-limit an exact SDF into a LevelSetGrid (default shape only)."""
    band = np.abs(sdf) <= params.band_radius
    sentinel = params.band_radius + 1.0
    phi = np.where(band, sdf, np.sign(sdf) * sentinel)
    phi[sdf == 0] = 0.0
    return LevelSetGrid(phi, band, params.band_radius, sentinel)


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class GacConfig:
    gac: GacParams = field(default_factory=GacParams)
    force: ForceFieldParams = field(
        default_factory=lambda: ForceFieldParams(kind="inverse_power", k=1.0, p=1.0)
    )
    edge_threshold: float = 0.0
    kl_grad_target: float | None = 25.0  # rescale |grad P| peak for the stopping factor
    # the attract stage is a budget: it only needs to pull crossing segments
    # onto their edges, the remaining travel belongs to stage 1
    attract_cap: int = 120
    stage1_cap: int = 1500
    stage2_cap: int = 500
    charge_source: str = "edge"


@dataclass
class GacResult:
    contours: list
    mask: np.ndarray
    stage_log: dict


def _displacement(prev_pts: np.ndarray, pts: np.ndarray) -> float:
    if len(prev_pts) == 0 and len(pts) == 0:
        return 0.0
    if len(prev_pts) == 0 or len(pts) == 0:
        return float("inf")
    d, _ = cKDTree(prev_pts).query(pts, k=1)
    return float(d.max())


def _run_stage(grid, stepper, params, stencil, cap, observer=None, name=""):
    """Iterate one stage until the zero level stops moving."""
    history: list[float] = []
    prev_pts = zero_crossings(grid.phi)
    vanished = False
    steps = 0
    converged = False
    for i in range(cap):
        grid = stepper(grid)
        if (i + 1) % params.reinit_every == 0:
            try:
                grid = reinit_sdf(grid, stencil, params.sdf_shape, params.sdf_k)
            except ContourVanished:
                vanished = True
                steps = i + 1
                break
        pts = zero_crossings(grid.phi)
        history.append(_displacement(prev_pts, pts))
        prev_pts = pts
        steps = i + 1
        if observer is not None:
            observer(name, i, grid)
        if len(pts) == 0:
            vanished = True
            break
        if has_converged(history, params.conv_eps, params.conv_window):
            converged = True
            break
    return grid, steps, converged, vanished


def segment_gac(
    image: GrayImage,
    init_sdf: np.ndarray,
    cfg: GacConfig | None = None,
    observer=None,
) -> GacResult:
    """Full two-stage GAC run from an exact seed SDF.

    Pipeline: edge map -> potential/force -> band-limited seed SDF ->
    optional attract stage -> stage 1 until converged -> stage 2 until
    converged -> zero-level contours and inside mask.
    """
    cfg = cfg or GacConfig()
    params = cfg.gac

    if cfg.charge_source == "intensity":
        charges = EdgeMap(image.values.copy())
    else:
        charges = gradient_magnitude(image)
    charges = threshold_edges(charges, cfg.edge_threshold)
    pot = compute_potential(charges, cfg.force)

    force = compute_force(pot)
    kl_pot = pot
    if cfg.kl_grad_target is not None:
        gx, gy = grad_xy(pot.values)
        peak = float(np.hypot(gx, gy).max())
        if peak > 0:
            kl_pot = PotentialField(pot.values * (cfg.kl_grad_target / peak))
    kl = speed_kl(kl_pot, params.m)

    stencil = build_circle_stencil(params.band_radius)
    grid = grid_from_sdf(init_sdf, params)
    if params.sdf_shape != "r":
        grid = reinit_sdf(grid, stencil, params.sdf_shape, params.sdf_k)

    log: dict = {}
    vanished = False
    if params.run_attract:
        grid, steps, conv, vanished = _run_stage(
            grid,
            lambda g: step_attract(g, force, params),
            params, stencil, cfg.attract_cap, observer, "attract",
        )
        log["attract_steps"] = steps
        log["attract_converged"] = conv

    if not vanished:
        grid, steps, conv, vanished = _run_stage(
            grid,
            lambda g: step_stage1(g, kl, params),
            params, stencil, cfg.stage1_cap, observer, "stage1",
        )
        log["stage1_steps"] = steps
        log["stage1_converged"] = conv

    if not vanished:
        grid, steps, conv, vanished = _run_stage(
            grid,
            lambda g: step_stage2(g, force, params),
            params, stencil, cfg.stage2_cap, observer, "stage2",
        )
        log["stage2_steps"] = steps
        log["stage2_converged"] = conv

    log["front_vanished"] = vanished
    contours = extract_zero_level(grid)
    mask = grid.inside_mask()
    return GacResult(contours, mask, log)
