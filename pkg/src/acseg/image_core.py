"""Grayscale image ingestion, edge maps and thresholding.

Conventions used throughout the package: grids are numpy float64 arrays of
shape (height, width), indexed [y, x] with y pointing down the image.
Intensities are normalized to [0, 1] at load time so all downstream weights
keep an image-independent meaning.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

__all__ = [
    "GrayImage",
    "EdgeMap",
    "load_image",
    "save_mask",
    "gradient_magnitude",
    "threshold_edges",
    "grad_xy",
]

_MIN_SIDE = 3  # every stencil needs a one-pixel margin


@dataclass
class GrayImage:
    """Intensity raster with values in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("GrayImage expects a 2-D grid")
        h, w = self.values.shape
        if h < _MIN_SIDE or w < _MIN_SIDE:
            raise ValueError(f"image must be at least {_MIN_SIDE}x{_MIN_SIDE}, got {w}x{h}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("image contains non-finite values")
        if self.values.min() < 0.0 or self.values.max() > 1.0:
            raise ValueError("image values must lie in [0, 1]")

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass
class EdgeMap:
    """Nonnegative edge-strength raster, same shape as its source image."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("EdgeMap expects a 2-D grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("edge map contains non-finite values")
        if self.values.min() < 0.0:
            raise ValueError("edge strengths must be nonnegative")

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def load_image(path: str | Path) -> GrayImage:
    """Load a single-channel raster (PGM, PNG, ...) normalized to [0, 1]."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:  # Pillow raises several unrelated types
        raise ValueError(f"cannot decode image {path}: {exc}") from exc
    if img.width == 0 or img.height == 0:
        raise ValueError(f"zero-sized image: {path}")
    if img.mode == "I;16":
        arr = np.asarray(img, dtype=np.float64) / 65535.0
    elif img.mode == "I":
        arr = np.asarray(img, dtype=np.float64)
        arr /= max(arr.max(), 1.0)
    elif img.mode == "F":
        arr = np.asarray(img, dtype=np.float64)
        arr = np.clip(arr, 0.0, 1.0)
    else:
        arr = np.asarray(img.convert("L"), dtype=np.float64) / 255.0
    return GrayImage(arr)


def save_mask(mask: np.ndarray, path: str | Path) -> None:
    """Write a boolean raster as an 8-bit 0/255 image (format from suffix)."""
    out = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(out, mode="L").save(path)


def grad_xy(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(d/dx, d/dy) with central differences interior, one-sided at borders."""
    gy, gx = np.gradient(np.asarray(values, dtype=np.float64))
    return gx, gy


def gradient_magnitude(img: GrayImage, smooth_sigma: float = 0.0) -> EdgeMap:
    """Edge map sqrt(Dx^2 + Dy^2) of the intensity grid.

    ``smooth_sigma`` > 0 applies a small Gaussian before differencing;
    default off.
    """
    values = img.values
    if smooth_sigma > 0.0:
        values = gaussian_filter(values, sigma=smooth_sigma, mode="nearest")
    gx, gy = grad_xy(values)
    return EdgeMap(np.hypot(gx, gy))


def threshold_edges(edges: EdgeMap, t: float) -> EdgeMap:
    """Suppress edge strengths below ``t``; values >= t pass unchanged."""
    if t < 0:
        raise ValueError(f"threshold must be >= 0, got {t}")
    out = edges.values.copy()
    out[out < t] = 0.0
    return EdgeMap(out)
