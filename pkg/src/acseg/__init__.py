"""Active-contour segmentation toolkit.

Three cooperating engines over one image-force model:

* :mod:`acseg.force_field` - template-plane potential and gradient force.
* :mod:`acseg.burning` - balloon snake with region burning for topology.
* :mod:`acseg.levelset` - two-stage narrow-band level-set active contour.

:mod:`acseg.cli` exposes the batch front end (``acseg`` entry point).
"""

from .errors import AcsegError, CflViolation, ConfigError, ContourVanished, ReleaseIncomplete
from .image_core import EdgeMap, GrayImage, gradient_magnitude, load_image, threshold_edges
from .force_field import (
    ForceFieldParams,
    PotentialField,
    VectorField,
    compute_force,
    compute_potential,
    sample_force,
    transfer,
)
from .snake import SnakeContour, SnakeParams, balloon_normal, circle_contour, resample, step, tension
from .burning import BurnGrid, MultiSegConfig, MultiSegResult, segment_multi
from .levelset import GacConfig, GacParams, GacResult, LevelSetGrid, segment_gac
from .phantoms import Phantom, PhantomSpec, generate_phantom

__version__ = "0.1.0"
