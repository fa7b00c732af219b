"""Exception types raised by the library.

Each module signals its failure modes with one of these so the CLI can map
them onto exit codes.
"""


class LoopSoupError(Exception):
    """Base class for every error raised by loopsoup."""


class ConfigError(LoopSoupError, ValueError):
    """Invalid configuration values (cutoffs, intensities, manifests)."""


class DomainError(LoopSoupError, ValueError):
    """A sub-domain is not contained in its parent, or a domain is unsuitable."""


class RangeError(LoopSoupError, ValueError):
    """A parameter lies outside the range where a formula is defined."""


class UndefinedDistanceError(LoopSoupError):
    """Fewer than two clusters, so no inter-cluster distance exists."""


class UndefinedDimensionError(LoopSoupError):
    """Box counting was asked to fit an empty set or too few scales."""


class BoundaryUndefinedError(LoopSoupError):
    """A cluster leaves no exterior component inside the raster frame."""


class DegenerateGeometryError(LoopSoupError):
    """The hull separates the right region from the right edge of the box."""


class StepFailureError(LoopSoupError):
    """SDE integration could not proceed after the maximum number of step halvings."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class BranchError(LoopSoupError):
    """A square-root branch choice failed during Loewner evolution."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step
