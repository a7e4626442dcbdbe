"""Balloon-snake topology handling via region burning.

Stage 1 inflates a parent snake while marking the area it sweeps as burned,
trailing the contour by a small gap; a vertex whose proposed position lands
on a burned pixel freezes, which is how opposing front pieces stop against
each other without explicit curve-intersection tests.  Stage 2 releases the
frozen contour, lets it push into the burned region for a few steps, then
burns out the leftover narrow bands so the burned region becomes one
4-connected area whose boundary loops are the child contours.

The burned raster only ever gains pixels (entropy condition).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from PIL import Image, ImageDraw
from scipy import ndimage

from . import snake as sn
from .errors import ContourVanished, ReleaseIncomplete
from .force_field import (
    ForceFieldParams,
    VectorField,
    compute_force,
    compute_potential,
)
from .image_core import GrayImage, gradient_magnitude, threshold_edges

__all__ = [
    "BurnGrid",
    "MultiSegConfig",
    "MultiSegResult",
    "new_burn_grid",
    "seed_burn",
    "sweep_mask",
    "update_burn",
    "collision_check",
    "stage_two_release",
    "extract_child_contours",
    "refine_children",
    "segment_multi",
    "fire_front",
    "trace_boundaries",
]

_FOUR = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass
class BurnGrid:
    """Per-pixel burn state plus the accumulated swept region.

    ``burned`` pixels are at least ``gap`` pixels behind the contour at the
    moment they burn and never revert.  ``swept`` accumulates everything the
    contour has covered, burned or not; the unburned part of it is the
    trailing band plus any collision bands.
    """

    burned: np.ndarray
    swept: np.ndarray
    gap: float
    min_burn_margin: float = float("inf")  # smallest contour distance at burn time

    @property
    def width(self) -> int:
        return self.burned.shape[1]

    @property
    def height(self) -> int:
        return self.burned.shape[0]


def new_burn_grid(shape: tuple[int, int], gap: float = 1.5) -> BurnGrid:
    if not 1.0 <= gap <= 2.0:
        raise ValueError(f"gap must lie in [1, 2] pixels, got {gap}")
    h, w = shape
    return BurnGrid(np.zeros((h, w), bool), np.zeros((h, w), bool), gap)


# ---------------------------------------------------------------------------
# rasterization helpers (pixel centers sit at integer coordinates)


def _blank(shape) -> Image.Image:
    h, w = shape
    return Image.new("1", (w, h), 0)


def _poly_points(vertices: np.ndarray) -> list[tuple[float, float]]:
    # +0.5 aligns our integer pixel centers with PIL's unit-square rasters
    return [(float(x) + 0.5, float(y) + 0.5) for x, y in vertices]


def polygon_mask(vertices: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Pixels covered by a filled closed polygon (boundary included)."""
    img = _blank(shape)
    ImageDraw.Draw(img).polygon(_poly_points(vertices), fill=1, outline=1)
    return np.array(img, dtype=bool)


def polyline_mask(vertices: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Pixels touched by a closed polyline."""
    img = _blank(shape)
    pts = _poly_points(vertices)
    pts.append(pts[0])
    ImageDraw.Draw(img).line(pts, fill=1, width=1)
    return np.array(img, dtype=bool)


def sweep_mask(old: np.ndarray, new: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Region covered by the contour's motion this step.

    Union of the quadrilaterals between old and new positions of each
    consecutive vertex pair; old and new must have equal length.
    """
    if len(old) != len(new):
        raise ValueError("old/new vertex counts differ")
    img = _blank(shape)
    draw = ImageDraw.Draw(img)
    n = len(old)
    for i in range(n):
        j = (i + 1) % n
        quad = [old[i], old[j], new[j], new[i]]
        draw.polygon(_poly_points(np.asarray(quad)), fill=1, outline=1)
    return np.array(img, dtype=bool)


def contour_distance(contour: sn.SnakeContour, shape: tuple[int, int]) -> np.ndarray:
    """Per-pixel distance to the rasterized contour polyline."""
    line = polyline_mask(contour.vertices, shape)
    return ndimage.distance_transform_edt(~line)


# ---------------------------------------------------------------------------
# burn bookkeeping


def _burn_behind(grid: BurnGrid, contour: sn.SnakeContour) -> None:
    dist = contour_distance(contour, grid.burned.shape)
    newly = grid.swept & (dist > grid.gap) & ~grid.burned
    if newly.any():
        grid.min_burn_margin = min(grid.min_burn_margin, float(dist[newly].min()))
        grid.burned |= newly


def seed_burn(grid: BurnGrid, contour: sn.SnakeContour) -> BurnGrid:
    """Mark the seed interior as swept and burn it beyond the gap band."""
    interior = polygon_mask(contour.vertices, grid.burned.shape)
    grid.swept |= interior
    _burn_behind(grid, contour)
    return grid


def update_burn(grid: BurnGrid, contour: sn.SnakeContour, swept: np.ndarray) -> BurnGrid:
    """Burn swept pixels that have fallen more than ``gap`` behind the contour.

    Every previously swept pixel is reconsidered, so the trailing band keeps
    burning as the contour moves on.  Burned pixels never revert.
    """
    grid.swept |= swept
    _burn_behind(grid, contour)
    return grid


def collision_check(proposed: np.ndarray, grid: BurnGrid) -> np.ndarray:
    """True per position iff the pixel containing it is burned.

    Accepts a single (x, y) or an (N, 2) array; positions are clamped to
    the grid before the lookup.
    """
    pts = np.atleast_2d(np.asarray(proposed, dtype=np.float64))
    px = np.clip(np.rint(pts[:, 0]).astype(int), 0, grid.width - 1)
    py = np.clip(np.rint(pts[:, 1]).astype(int), 0, grid.height - 1)
    hit = grid.burned[py, px]
    return bool(hit[0]) if np.asarray(proposed).ndim == 1 else hit


def fire_front(grid: BurnGrid) -> np.ndarray:
    """Burned pixels with an unburned 4-neighbour (the advancing border)."""
    if not grid.burned.any():
        return np.zeros_like(grid.burned)
    eroded = ndimage.binary_erosion(grid.burned, structure=_FOUR, border_value=1)
    return grid.burned & ~eroded


# ---------------------------------------------------------------------------
# stage 1 / stage 2 evolution


def _collide_and_freeze(
    contour: sn.SnakeContour, proposed: sn.SnakeContour, grid: BurnGrid
) -> tuple[sn.SnakeContour, float]:
    """Revert vertices whose proposed position collides; freeze them."""
    newv = proposed.vertices.copy()
    hits = collision_check(newv, grid) & ~contour.frozen
    newv[hits] = contour.vertices[hits]
    frozen = contour.frozen | hits
    disp = float(np.max(np.hypot(*(newv - contour.vertices).T)))
    return sn.SnakeContour(newv, frozen), disp


# once the front has globally slowed below this displacement, stage 1 drops
# to a quarter time step so edge-straddling vertices settle instead of
# flip-flopping across the force ridge
_ANNEAL_DISP = 0.3
_ANNEAL_FACTOR = 0.25
_ANNEAL_QUIET = 5


def _run_stage1(
    contour: sn.SnakeContour,
    grid: BurnGrid,
    force: VectorField,
    params: sn.SnakeParams,
    step_cap: int,
    observer=None,
) -> tuple[sn.SnakeContour, int, bool, int]:
    history: list[float] = []
    unburn_events = 0
    annealed = False
    for i in range(step_cap):
        burned_prev = grid.burned.copy()
        proposed = sn.step(contour, force, params)
        moved, disp = _collide_and_freeze(contour, proposed, grid)
        swept = sweep_mask(contour.vertices, moved.vertices, grid.burned.shape)
        update_burn(grid, moved, swept)
        if (burned_prev & ~grid.burned).any():
            unburn_events += 1
        contour = sn.resample(moved, params)
        history.append(disp)
        if observer is not None:
            observer("stage1", i, contour, grid)
        if contour.frozen.all() or sn.has_converged(history, params.conv_eps, params.conv_window):
            return contour, i + 1, True, unburn_events
        if (
            not annealed
            and len(history) >= _ANNEAL_QUIET
            and max(history[-_ANNEAL_QUIET:]) < _ANNEAL_DISP
        ):
            params = replace(params, dt=params.dt * _ANNEAL_FACTOR)
            annealed = True
    return contour, step_cap, False, unburn_events


def stage_two_release(
    contour: sn.SnakeContour,
    grid: BurnGrid,
    force: VectorField,
    params: sn.SnakeParams,
    extra_steps: int,
    observer=None,
) -> BurnGrid:
    """Release the frozen contour and burn out the leftover narrow bands.

    The contour evolves ``extra_steps`` ignoring collisions, then burning
    continues without the gap restriction (a 4-connected flood confined to
    the swept region) until the burned region stops growing.  With
    ``extra_steps`` = 0 nothing happens.
    """
    if extra_steps == 0:
        return grid
    contour = sn.SnakeContour(contour.vertices.copy(), np.zeros(len(contour), bool))
    for i in range(extra_steps):
        proposed = sn.step(contour, force, params)
        swept = sweep_mask(contour.vertices, proposed.vertices, grid.burned.shape)
        update_burn(grid, proposed, swept)
        contour = sn.resample(proposed, params)
        if observer is not None:
            observer("release", i, contour, grid)

    # gap-free burn-out: every swept component that already contains fire
    # burns completely, which merges across the former collision bands
    labels, _ = ndimage.label(grid.swept, structure=_FOUR)
    hot = np.unique(labels[grid.burned])
    hot = hot[hot != 0]
    grid.burned |= np.isin(labels, hot)

    _, ncomp = ndimage.label(grid.burned, structure=_FOUR)
    if ncomp > 1:
        raise ReleaseIncomplete(f"burned region has {ncomp} components after release")
    return grid


# ---------------------------------------------------------------------------
# boundary extraction

# clockwise Moore neighbourhood starting east, in screen coordinates (y down)
_MOORE = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]


def _moore_next(mask: np.ndarray, c: tuple[int, int], b: tuple[int, int]):
    h, w = mask.shape
    i0 = _MOORE.index((b[0] - c[0], b[1] - c[1]))
    prev = b
    for s in range(1, 9):
        off = _MOORE[(i0 + s) % 8]
        cand = (c[0] + off[0], c[1] + off[1])
        if 0 <= cand[0] < w and 0 <= cand[1] < h and mask[cand[1], cand[0]]:
            return cand, prev
        prev = cand
    return None


def _moore_trace(mask: np.ndarray, start: tuple[int, int], backtrack: tuple[int, int]):
    """Moore-neighbour boundary trace; stops on the repeated first move."""
    first = _moore_next(mask, start, backtrack)
    if first is None:
        return [start]
    path = [start]
    first_move = (start, first[0])
    c, b = first
    for _ in range(8 * mask.size):
        path.append(c)
        nxt = _moore_next(mask, c, b)
        if (c, nxt[0]) == first_move:
            break
        c, b = nxt
    if len(path) > 1 and path[-1] == path[0]:
        path.pop()
    return path


def trace_boundaries(mask: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Outer and hole boundary loops of a boolean raster.

    Foreground is taken 8-connected, background 4-connected (the standard
    complementary pairing).  Loops are (N, 2) arrays of pixel-center (x, y),
    holes traced along the foreground pixels that surround them.
    """
    mask = np.asarray(mask, dtype=bool)
    outer_loops: list[np.ndarray] = []
    hole_loops: list[np.ndarray] = []
    if not mask.any():
        return outer_loops, hole_loops

    fg_labels, n_fg = ndimage.label(mask, structure=_EIGHT)
    for lab in range(1, n_fg + 1):
        ys, xs = np.nonzero(fg_labels == lab)
        k = np.lexsort((xs, ys))[0]  # topmost, then leftmost pixel
        start = (int(xs[k]), int(ys[k]))
        backtrack = (start[0] - 1, start[1])  # west neighbour is background
        comp_mask = fg_labels == lab
        loop = _moore_trace(comp_mask, start, backtrack)
        outer_loops.append(np.array(loop, dtype=np.float64))

    bg_labels, n_bg = ndimage.label(~mask, structure=_FOUR)
    border = np.zeros_like(mask)
    border[0, :] = border[-1, :] = border[:, 0] = border[:, -1] = True
    border_labels = set(np.unique(bg_labels[border & ~mask]))
    for lab in range(1, n_bg + 1):
        if lab in border_labels:
            continue  # background reaching the frame is outside, not a hole
        ys, xs = np.nonzero(bg_labels == lab)
        k = np.lexsort((xs, ys))[0]
        hx, hy = int(xs[k]), int(ys[k])
        start = (hx, hy - 1)  # pixel above a topmost hole pixel is foreground
        loop = _moore_trace(mask, start, (hx, hy))
        hole_loops.append(np.array(loop, dtype=np.float64))

    return outer_loops, hole_loops


def _orient(loop: np.ndarray, clockwise: bool) -> np.ndarray:
    contour = sn.SnakeContour(loop)
    if (sn.signed_area(contour) < 0) != clockwise:
        return loop[::-1].copy()
    return loop


def _near_frame(loop: np.ndarray, shape: tuple[int, int], tol: float = 1.0) -> bool:
    h, w = shape
    d = np.minimum.reduce([loop[:, 0], loop[:, 1], w - 1 - loop[:, 0], h - 1 - loop[:, 1]])
    return bool(np.all(d <= tol))


def extract_child_contours(grid: BurnGrid) -> list[sn.SnakeContour]:
    """Boundary loops of the burned region as child contours.

    Outer loops are oriented clockwise (balloon normal outward, toward the
    unburned side); hole loops counterclockwise (normal into the hole).  A
    loop hugging the image frame within one pixel is dropped; so are
    slivers of fewer than four boundary pixels.
    """
    outer, holes = trace_boundaries(grid.burned)
    children: list[sn.SnakeContour] = []
    shape = grid.burned.shape
    for loop in outer:
        if len(loop) < 4:
            warnings.warn("dropping sliver outer loop", stacklevel=2)
            continue
        if _near_frame(loop, shape):
            continue
        children.append(sn.SnakeContour(_orient(loop, clockwise=True)))
    for loop in holes:
        if len(loop) < 4:
            warnings.warn("dropping sliver hole loop", stacklevel=2)
            continue
        children.append(sn.SnakeContour(_orient(loop, clockwise=False)))
    return children


def refine_children(
    children: list[sn.SnakeContour],
    force: VectorField,
    params: sn.SnakeParams,
    step_cap: int = 300,
    lam: float = 0.0,
) -> list[sn.SnakeContour]:
    """Evolve extracted children onto the edge maxima.

    Runs image force + tension only by default (no balloon) until the
    displacement-window test converges or the step cap hits.  A child that
    collapses below four vertices is dropped with a warning.
    """
    rp = replace(params, lam=lam)
    out: list[sn.SnakeContour] = []
    for child in children:
        try:
            cur = sn.resample(child, rp)
            history: list[float] = []
            for _ in range(step_cap):
                nxt = sn.step(cur, force, rp)
                disp = float(np.max(np.hypot(*(nxt.vertices - cur.vertices).T)))
                cur = sn.resample(nxt, rp)
                history.append(disp)
                if sn.has_converged(history, rp.conv_eps, rp.conv_window):
                    break
            out.append(cur)
        except ContourVanished:
            warnings.warn("dropping child that collapsed during refinement", stacklevel=2)
    return out


# ---------------------------------------------------------------------------
# full pipeline


@dataclass
class MultiSegConfig:
    snake: sn.SnakeParams = field(default_factory=sn.SnakeParams)
    force: ForceFieldParams = field(default_factory=ForceFieldParams)
    gap: float = 1.5
    extra_steps: int = 24
    stage1_cap: int = 2000
    refine_cap: int = 300
    refine_lam: float = 0.0
    edge_threshold: float = 0.0
    charge_source: str = "edge"  # "edge" (default) or "intensity"
    force_gain: float | None = None  # None: normalize peak |F| to 1


@dataclass
class MultiSegResult:
    children: list
    mask: np.ndarray
    stage_log: dict
    stage1_mask: np.ndarray
    stage1_contour: sn.SnakeContour


def build_force(image: GrayImage, cfg: MultiSegConfig) -> VectorField:
    """Edge map -> potential -> force, with the configured gain."""
    from .image_core import EdgeMap

    if cfg.charge_source == "intensity":
        charges = EdgeMap(image.values.copy())
    else:
        charges = gradient_magnitude(image)
    charges = threshold_edges(charges, cfg.edge_threshold)
    pot = compute_potential(charges, cfg.force)
    force = compute_force(pot)
    peak = float(force.magnitude().max())
    if cfg.force_gain is None:
        if peak > 0:
            force = VectorField(force.fx / peak, force.fy / peak)
    else:
        force = VectorField(force.fx * cfg.force_gain, force.fy * cfg.force_gain)
    return force


def segment_multi(
    image: GrayImage,
    seed: sn.SnakeContour,
    cfg: MultiSegConfig | None = None,
    observer=None,
) -> MultiSegResult:
    """Two-stage balloon segmentation of every object reachable from ``seed``.

    Pipeline: force field -> stage-1 inflation with burning and collision
    freezing -> release and band burn-out -> child extraction -> refinement.
    """
    cfg = cfg or MultiSegConfig()
    force = build_force(image, cfg)
    shape = image.values.shape

    grid = new_burn_grid(shape, cfg.gap)
    contour = sn.resample(seed, cfg.snake)
    seed_burn(grid, contour)

    contour, stage1_steps, converged, unburn_events = _run_stage1(
        contour, grid, force, cfg.snake, cfg.stage1_cap, observer
    )

    stage1_mask = grid.burned.copy()
    stage1_contour = contour.copy()

    try:
        grid = stage_two_release(contour, grid, force, cfg.snake, cfg.extra_steps, observer)
    except ReleaseIncomplete:
        grid = stage_two_release(
            contour, grid, force, cfg.snake, 2 * cfg.extra_steps + 8, observer
        )

    children = extract_child_contours(grid)
    refined = refine_children(children, force, cfg.snake, cfg.refine_cap, cfg.refine_lam)

    log = {
        "stage1_steps": stage1_steps,
        "stage1_converged": converged,
        "release_steps": cfg.extra_steps,
        "children_extracted": len(children),
        "children_refined": len(refined),
        "min_burn_margin": grid.min_burn_margin,
        "unburn_events": unburn_events,
    }
    return MultiSegResult(refined, grid.burned, log, stage1_mask, stage1_contour)
