"""Bounded planar domains used as simulation boxes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from loopsoup.errors import ConfigError

KINDS = ("unit_square", "unit_disk", "rectangle", "half_plane_box")


@dataclass(frozen=True)
class Domain:
    """An open, bounded subset of the plane.

    ``unit_square`` is (0,1)^2 and ``unit_disk`` is the open unit disk at the
    origin. ``rectangle`` is the open box with lower-left corner ``origin``.
    ``half_plane_box`` is the truncated upper half plane
    ``{|Re z| < width/2, 0 < Im z < height}`` used for chordal experiments.
    """

    kind: str = "unit_square"
    width: float = 1.0
    height: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown domain kind {self.kind!r}")
        if self.kind == "unit_square":
            object.__setattr__(self, "width", 1.0)
            object.__setattr__(self, "height", 1.0)
            object.__setattr__(self, "origin", (0.0, 0.0))
        elif self.kind == "unit_disk":
            object.__setattr__(self, "width", 2.0)
            object.__setattr__(self, "height", 2.0)
            object.__setattr__(self, "origin", (0.0, 0.0))
        elif self.kind == "half_plane_box":
            object.__setattr__(self, "origin", (0.0, 0.0))
        if not (self.width > 0 and self.height > 0):
            raise ConfigError("domain width and height must be positive")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def unit_square(cls) -> Domain:
        return cls("unit_square")

    @classmethod
    def unit_disk(cls) -> Domain:
        return cls("unit_disk")

    @classmethod
    def rectangle(cls, width: float, height: float, origin=(0.0, 0.0)) -> Domain:
        return cls("rectangle", float(width), float(height), tuple(origin))

    @classmethod
    def half_plane_box(cls, width: float, height: float) -> Domain:
        return cls("half_plane_box", float(width), float(height))

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the closure."""
        if self.kind == "unit_disk":
            return (-1.0, -1.0, 1.0, 1.0)
        if self.kind == "half_plane_box":
            return (-self.width / 2, 0.0, self.width / 2, self.height)
        x0, y0 = self.origin
        return (x0, y0, x0 + self.width, y0 + self.height)

    @property
    def bbox_area(self) -> float:
        xmin, ymin, xmax, ymax = self.bbox
        return (xmax - xmin) * (ymax - ymin)

    @property
    def area(self) -> float:
        if self.kind == "unit_disk":
            return math.pi
        return self.bbox_area

    @property
    def is_rectangular(self) -> bool:
        return self.kind != "unit_disk"

    def contains(self, points) -> np.ndarray:
        """Vectorized membership for an (n, 2) array; returns a bool array."""
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        x, y = p[:, 0], p[:, 1]
        if self.kind == "unit_disk":
            return x * x + y * y < 1.0
        xmin, ymin, xmax, ymax = self.bbox
        return (x > xmin) & (x < xmax) & (y > ymin) & (y < ymax)

    def point_in(self, z) -> bool:
        return bool(self.contains(np.array([z[0], z[1]]))[0])

    def contains_all(self, points) -> bool:
        return bool(np.all(self.contains(points)))

    def contains_domain(self, other: Domain) -> bool:
        """Geometric containment of ``other`` in ``self`` (closures compared)."""
        if self.kind == "unit_disk":
            if other.kind == "unit_disk":
                return True
            xmin, ymin, xmax, ymax = other.bbox
            corners = np.array([[xmin, ymin], [xmin, ymax], [xmax, ymin], [xmax, ymax]])
            return bool(np.all(np.hypot(corners[:, 0], corners[:, 1]) <= 1.0 + 1e-15))
        sx0, sy0, sx1, sy1 = self.bbox
        ox0, oy0, ox1, oy1 = other.bbox
        return ox0 >= sx0 and oy0 >= sy0 and ox1 <= sx1 and oy1 <= sy1

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind in ("rectangle", "half_plane_box"):
            d["width"] = self.width
            d["height"] = self.height
        if self.kind == "rectangle" and self.origin != (0.0, 0.0):
            d["origin"] = list(self.origin)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> Domain:
        kind = d.get("kind", "unit_square")
        if kind in ("unit_square", "unit_disk"):
            return cls(kind)
        if "width" not in d or "height" not in d:
            raise ConfigError(f"domain kind {kind!r} needs width and height")
        return cls(kind, float(d["width"]), float(d["height"]), tuple(d.get("origin", (0.0, 0.0))))
