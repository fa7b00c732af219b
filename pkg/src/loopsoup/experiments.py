"""Monte Carlo experiments built from the samplers: percolation sweep and dimension probes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from loopsoup import rng as rngmod
from loopsoup.clusters import build_clusters
from loopsoup.errors import BoundaryUndefinedError, DomainError
from loopsoup.fractal import DimensionEstimate, box_counting_dimension, default_scales
from loopsoup.raster import (
    RasterGrid,
    free_point_mask,
    hull_window,
    mask_crosses,
    outer_boundary_from_trace,
    rasterize_polyline,
    trace_outer_boundary,
)
from loopsoup.soup import SoupConfig, extend_cutoff, grow_soup, sample_brownian_bridge_loop, sample_soup

CONJECTURED_THRESHOLD = 1.0
DEFAULT_C_GRID = tuple(round(0.1 * k, 10) for k in range(1, 17))


@dataclass(frozen=True)
class SweepResult:
    c_values: list[float]
    crossing_probability: list[float]
    n_samples: int
    t_min: float
    t_max: float
    resolution: int
    side: str
    avoid: str
    crossed: np.ndarray  # (n_samples, n_c) booleans
    free_fraction: np.ndarray
    seeds: list[int] = field(default_factory=list)

    @property
    def midpoint(self) -> float | None:
        return crossing_midpoint(self.c_values, self.crossing_probability)

    def monotone_per_seed(self) -> bool:
        return bool(np.all(np.diff(self.crossed.astype(int), axis=1) <= 0))

    def rows(self) -> list[dict]:
        out = []
        for j, c in enumerate(self.c_values):
            for s, seed in enumerate(self.seeds):
                out.append(
                    {"c": c, "seed": seed, "crossed": int(self.crossed[s, j]), "free_fraction": float(self.free_fraction[s, j])}
                )
        return out

    def summary(self) -> dict:
        return {
            "c_values": list(self.c_values),
            "crossing_probability": list(self.crossing_probability),
            "n_samples": self.n_samples,
            "midpoint": self.midpoint,
            "conjectured_threshold": CONJECTURED_THRESHOLD,
            "monotone_per_seed": self.monotone_per_seed(),
            "t_min": self.t_min,
            "t_max": self.t_max,
            "resolution": self.resolution,
            "side": self.side,
            "avoid": self.avoid,
        }


def crossing_midpoint(c_values, probs) -> float | None:
    """First c where the probability drops through 1/2, by linear interpolation."""
    for k in range(1, len(c_values)):
        p0, p1 = probs[k - 1], probs[k]
        if p0 > 0.5 >= p1:
            return float(c_values[k - 1] + (p0 - 0.5) / (p0 - p1) * (c_values[k] - c_values[k - 1]))
    if probs and probs[0] <= 0.5:
        return float(c_values[0])
    return None


def _sweep_one(config: SoupConfig, c_values, resolution: int, side: str, avoid: str):
    grid = RasterGrid.for_domain(config.domain, resolution)
    inside = grid.inside_mask(config.domain)
    trace = np.zeros(grid.shape, dtype=bool)
    hull = np.zeros(grid.shape, dtype=bool)
    seen = 0
    crossed, free = [], []
    for soup in grow_soup(config, c_values):
        # coupled soups only ever append loops
        for lp in soup.loops[seen:]:
            rasterize_polyline(lp.points, grid, trace)
            win, sub = hull_window(lp, grid)
            hull[win] |= sub
        seen = len(soup.loops)
        open_ = inside & ~(hull if avoid == "hull" else trace)
        crossed.append(mask_crosses(open_, side))
        free.append(float((inside & ~hull).sum() / inside.sum()))
    return crossed, free


def percolation_sweep(c_grid, base: SoupConfig, resolution: int, n_samples: int, side: str = "left_right",
                      avoid: str = "trace", map_fn=map) -> SweepResult:
    """Crossing probability of the loop-free region for each c, soups coupled across c.

    Sample ``s`` uses seed ``derive_seed(base.seed, MISC, s)`` and grows one
    soup through the sorted grid, so every seed's crossing indicator is
    non-increasing in c.
    """
    if not base.domain.is_rectangular:
        raise DomainError("percolation sweeps need a rectangular domain")
    c_values = sorted(float(c) for c in c_grid)
    seeds = [rngmod.derive_seed(base.seed, rngmod.MISC, s) for s in range(n_samples)]
    jobs = [replace(base, seed=sd) for sd in seeds]
    results = list(map_fn(lambda cfg: _sweep_one(cfg, c_values, resolution, side, avoid), jobs))
    crossed = np.array([r[0] for r in results], dtype=bool).reshape(n_samples, len(c_values))
    free = np.array([r[1] for r in results], dtype=float).reshape(n_samples, len(c_values))
    probs = [float(p) for p in crossed.mean(axis=0)] if n_samples else [math.nan] * len(c_values)
    return SweepResult(c_values, probs, n_samples, base.t_min, base.t_max, resolution, side, avoid, crossed, free, seeds)


# dimension probes -------------------------------------------------------------

def free_point_dimension_estimate(soup, resolution: int, scales=None) -> DimensionEstimate:
    """Box-counting dimension of the free (unencircled) cells of a soup."""
    fpm = free_point_mask(soup, resolution)
    return box_counting_dimension(fpm.free, fpm.grid.cell_size, scales)


def free_point_trend(config: SoupConfig, t_min_fine: float, resolution: int, scales=None):
    """Estimates at ``config.t_min`` and at a smaller cutoff, the second soup extending the first."""
    coarse = sample_soup(config)
    fine = extend_cutoff(coarse, t_min_fine)
    return (
        free_point_dimension_estimate(coarse, resolution, scales),
        free_point_dimension_estimate(fine, resolution, scales),
    )


def fitted_grid(bbox, resolution: int, margin: int = 2) -> RasterGrid:
    """Square grid of ``resolution`` cells whose inner part (``margin`` cells spare per side) covers bbox."""
    x0, y0, x1, y1 = bbox
    side = max(x1 - x0, y1 - y0) * (1 + 1e-9)
    h = side / (resolution - 2 * margin)
    ox, oy = x0 - margin * h, y0 - margin * h
    return RasterGrid.for_box((ox, oy, ox + resolution * h, oy + resolution * h), resolution)


def frontier_dimension(polylines, resolution: int, scales=None) -> DimensionEstimate:
    """Dimension of the outer boundary of a union of polylines, on a grid fitted to them."""
    boxes = np.array([(p[:, 0].min(), p[:, 1].min(), p[:, 0].max(), p[:, 1].max()) for p in polylines])
    grid = fitted_grid((boxes[:, 0].min(), boxes[:, 1].min(), boxes[:, 2].max(), boxes[:, 3].max()), resolution)
    tr = np.zeros(grid.shape, dtype=bool)
    for p in polylines:
        rasterize_polyline(p, grid, tr)
    cells = outer_boundary_from_trace(tr)
    m = np.zeros(grid.shape, dtype=bool)
    ok = (cells[:, 0] >= 0) & (cells[:, 1] >= 0) & (cells[:, 0] < m.shape[0]) & (cells[:, 1] < m.shape[1])
    m[cells[ok, 0], cells[ok, 1]] = True
    return box_counting_dimension(m, grid.cell_size, scales or default_scales(m.shape))


def loop_frontier_dimension(duration: float, n_points: int, resolution: int, seed: int, scales=None) -> DimensionEstimate:
    """Dimension of the outer boundary of one Brownian loop."""
    g = rngmod.stream(seed, rngmod.MISC, 1)
    loop = sample_brownian_bridge_loop((0.0, 0.0), duration, n_points, g)
    return frontier_dimension([loop.points], resolution, scales)


def cluster_extent(clusters, soup, cid) -> float:
    boxes = np.array([soup.loops[i].bbox for i in clusters.members(cid)])
    return float(max(boxes[:, 2].max() - boxes[:, 0].min(), boxes[:, 3].max() - boxes[:, 1].min()))


def largest_clusters(soup, n: int, touch_distance: float = 0.0):
    clusters = build_clusters(soup, touch_distance)
    order = sorted(clusters.ids, key=lambda cid: (-cluster_extent(clusters, soup, cid), cid))
    return clusters, order[:n]


def cluster_boundary_dimensions(soup, resolution: int, n_largest: int = 10, scales=None,
                                fitted: bool = True) -> list[DimensionEstimate]:
    """Outer-boundary dimensions of the ``n_largest`` clusters by bounding-box extent.

    With ``fitted`` each cluster is rasterized on its own ``resolution``-cell
    grid, as for single loops; otherwise on the domain grid, where clusters
    too small for four dyadic scales are skipped.
    """
    clusters, ids = largest_clusters(soup, n_largest)
    dims = []
    for cid in ids:
        if fitted:
            dims.append(frontier_dimension([soup.loops[i].points for i in clusters.members(cid)], resolution, scales))
            continue
        try:
            b = trace_outer_boundary(cid, clusters, soup, resolution)
        except BoundaryUndefinedError:
            continue
        m = np.pad(b.cell_mask(), 1)
        sc = scales or default_scales(m.shape, coarsest_fraction=4)
        if len(sc) < 4:
            continue
        dims.append(box_counting_dimension(m, b.cell_size, sc))
    return dims
