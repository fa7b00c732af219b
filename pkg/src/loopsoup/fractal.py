"""Intensity / SLE parameter conversions and box-counting dimension fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from loopsoup.errors import RangeError, UndefinedDimensionError

KAPPA_MIN = 8.0 / 3.0
KAPPA_MAX = 4.0


def c_of_kappa(kappa: float) -> float:
    """Soup intensity matched to SLE parameter ``kappa`` in (8/3, 4]."""
    if not KAPPA_MIN < kappa <= KAPPA_MAX:
        raise RangeError(f"kappa must lie in (8/3, 4], got {kappa}")
    return (3.0 * kappa - 8.0) * (6.0 - kappa) / (2.0 * kappa)


def kappa_of_c(c: float) -> float:
    """Inverse of :func:`c_of_kappa`: the root of 3k^2 + (2c - 26)k + 48 = 0 in (8/3, 4]."""
    if not 0.0 < c <= 1.0:
        raise RangeError(f"c must lie in (0, 1], got {c}")
    b = 26.0 - 2.0 * c
    disc = max(b * b - 576.0, 0.0)
    return (b - math.sqrt(disc)) / 6.0


def alpha_of_kappa(kappa: float) -> float:
    """One-sided restriction exponent (6 - kappa) / (2 kappa)."""
    if not kappa > 0:
        raise RangeError("kappa must be positive")
    return (6.0 - kappa) / (2.0 * kappa)


def alpha_of_kappa_rho(kappa: float, rho: float) -> float:
    if not kappa > 0:
        raise RangeError("kappa must be positive")
    return (rho + 2.0) * (rho + 6.0 - kappa) / (4.0 * kappa)


def rho_for_alpha(kappa: float, alpha: float) -> float:
    """The root rho > -2 of (rho + 2)(rho + 6 - kappa) = 4 kappa alpha."""
    if not kappa > 0:
        raise RangeError("kappa must be positive")
    b = 8.0 - kappa
    c0 = 12.0 - 2.0 * kappa - 4.0 * kappa * alpha
    disc = b * b - 4.0 * c0
    if disc < 0:
        raise RangeError(f"no real rho for kappa={kappa}, alpha={alpha}")
    sq = math.sqrt(disc)
    # larger root, written to avoid cancellation when b > 0
    rho = -2.0 * c0 / (b + sq) if b + sq > 0 else (-b + sq) / 2.0
    if not rho > -2.0:
        raise RangeError(f"no root rho > -2 for kappa={kappa}, alpha={alpha}")
    return rho


def dimension_of_kappa(kappa: float) -> float:
    """Hausdorff dimension 1 + kappa/8 of SLE_kappa curves, kappa <= 8."""
    return 1.0 + kappa / 8.0


def free_point_dimension(c: float) -> float:
    """Dimension 2 - c/5 of the set of free points, for c < 10."""
    return 2.0 - c / 5.0


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    stderr: float
    r2: float
    n: int


@dataclass(frozen=True)
class DimensionEstimate:
    """Box-counting fit; ``scales`` holds (box size, occupied boxes), sizes decreasing."""

    slope: float
    stderr: float
    scales: tuple[tuple[float, int], ...]
    r2: float
    trimmed: bool = False
    fits: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "stderr": self.stderr,
            "r2": self.r2,
            "trimmed": self.trimmed,
            "scales": [list(s) for s in self.scales],
            "fits": {k: vars(v) for k, v in self.fits.items()},
        }


def fit_line(x, y) -> LineFit:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = len(x)
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    sxy = float(((x - xm) * (y - ym)).sum())
    slope = sxy / sxx
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    sse = float((resid**2).sum())
    syy = float(((y - ym) ** 2).sum())
    r2 = 1.0 - sse / syy if syy > 0 else 1.0
    stderr = math.sqrt(sse / (n - 2) / sxx) if n > 2 else 0.0
    return LineFit(slope, intercept, stderr, r2, n)


def count_boxes(mask: np.ndarray, size: int) -> int:
    """Number of ``size x size`` cell blocks (anchored at cell 0) holding an occupied cell."""
    ny, nx = mask.shape
    py = -ny % size
    px = -nx % size
    m = np.pad(mask, ((0, py), (0, px))) if (py or px) else mask
    blocks = m.reshape(m.shape[0] // size, size, m.shape[1] // size, size)
    return int(blocks.any(axis=(1, 3)).sum())


def default_scales(shape, smallest: int = 1, coarsest_fraction: int = 8) -> list[int]:
    """Dyadic box sizes from ``smallest`` up to 1/``coarsest_fraction`` of the grid side."""
    side = min(shape)
    out = []
    s = smallest
    while s <= side // coarsest_fraction:
        out.append(s)
        s *= 2
    return out


def box_counting_dimension(mask: np.ndarray, cell_size: float = 1.0, scales=None) -> DimensionEstimate:
    """Slope of log(occupied boxes) against log(1/box size).

    ``scales`` are box sides in cells. When dropping the two smallest scales
    raises r^2 (and leaves at least four), the trimmed fit is the estimate;
    both fits are kept in ``fits``.
    """
    mask = np.asarray(mask, dtype=bool)
    if scales is None:
        scales = default_scales(mask.shape)
    sizes = sorted({int(s) for s in scales}, reverse=True)
    if len(sizes) < 4:
        raise UndefinedDimensionError("box counting needs at least 4 scales")
    if sizes[-1] < 1:
        raise UndefinedDimensionError("box sizes must be positive cell counts")
    if not mask.any():
        raise UndefinedDimensionError("empty set has no box-counting dimension")
    counts = [count_boxes(mask, s) for s in sizes]
    phys = [s * cell_size for s in sizes]
    x = [-math.log(p) for p in phys]
    y = [math.log(c) for c in counts]
    full = fit_line(x, y)
    fits = {"all": full}
    best, trimmed = full, False
    if len(sizes) >= 6:
        cut = fit_line(x[:-2], y[:-2])
        fits["trimmed"] = cut
        if cut.r2 > full.r2:
            best, trimmed = cut, True
    return DimensionEstimate(
        slope=best.slope,
        stderr=best.stderr,
        scales=tuple(zip(phys, counts)),
        r2=best.r2,
        trimmed=trimmed,
        fits=fits,
    )


def sierpinski_carpet(level: int) -> np.ndarray:
    """Boolean raster of the Sierpinski carpet, 3**level cells per side."""
    m = np.ones((1, 1), dtype=bool)
    for _ in range(level):
        z = np.zeros_like(m)
        m = np.block([[m, m, m], [m, z, m], [m, m, m]])
    return m
