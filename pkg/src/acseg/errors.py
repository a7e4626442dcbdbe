"""Exceptions shared across the segmentation engines."""


class AcsegError(Exception):
    """Base class for all engine errors."""


class ContourVanished(AcsegError):
    """A contour collapsed below the minimum vertex count or the zero level
    set became empty."""


class CflViolation(AcsegError):
    """A level-set step would move the front more than half a pixel.

    Carries the largest admissible time step so callers can retry.
    """

    def __init__(self, dt: float, max_speed: float):
        self.required_dt = 0.5 / max_speed if max_speed > 0 else float("inf")
        super().__init__(
            f"dt={dt:g} violates CFL (max speed {max_speed:g}); "
            f"need dt <= {self.required_dt:g}"
        )


class ReleaseIncomplete(AcsegError):
    """The burned region is still disconnected after the release stage."""


class ConfigError(AcsegError):
    """Invalid run configuration or parameter value."""
