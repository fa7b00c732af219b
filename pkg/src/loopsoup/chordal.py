"""Restriction curve plus attached loop-soup clusters, and the right boundary of their union.

The curve gamma is an SLE(8/3, rho) trace whose one-sided restriction
exponent is ``alpha``; an independent soup at intensity ``c(kappa)`` is
sampled in the same half-plane box, every cluster that gamma hits is glued
on, and the right frontier ``eta`` of the union is extracted on a raster.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage, stats

from loopsoup import rng as rngmod
from loopsoup import sle
from loopsoup.clusters import ClusterSet, build_clusters
from loopsoup.domain import Domain
from loopsoup.errors import ConfigError, DegenerateGeometryError
from loopsoup.fractal import (
    DimensionEstimate,
    alpha_of_kappa,
    box_counting_dimension,
    c_of_kappa,
    default_scales,
    kappa_of_c,
    rho_for_alpha,
)
from loopsoup.geometry import polylines_intersect, polylines_intersect_bruteforce
from loopsoup.raster import FOUR, RasterGrid, moore_trace, rasterize_polyline
from loopsoup.soup import LoopSoup, SoupConfig, sample_soup

RESTRICTION_KAPPA = 8.0 / 3.0
_TOL = 1e-9


@dataclass(frozen=True)
class ChordalSetup:
    kappa: float = 3.0
    alpha: float | None = None
    c: float | None = None
    box_width: float = 4.0
    box_height: float = 2.0
    t_min: float = 1e-3
    t_max: float = 1.0
    step_scale: float = 1e-4
    resolution: int = 1024
    horizon: float = 3.0
    dt: float = 1e-4
    touch_distance: float = 0.0
    seed: int = 0
    soup_seed: int | None = None

    def __post_init__(self):
        a = alpha_of_kappa(self.kappa)
        c = c_of_kappa(self.kappa)
        if self.alpha is None:
            object.__setattr__(self, "alpha", a)
        elif abs(self.alpha - a) > _TOL:
            raise ConfigError(f"alpha={self.alpha} does not match (6 - kappa)/(2 kappa) = {a}")
        if self.c is None:
            object.__setattr__(self, "c", c)
        elif abs(self.c - c) > _TOL:
            raise ConfigError(f"c={self.c} does not match c(kappa) = {c}")
        if self.soup_seed is None:
            object.__setattr__(self, "soup_seed", rngmod.derive_seed(self.seed, rngmod.SUBSOUP, 0))
        if not (self.horizon > 0 and self.dt > 0 and self.resolution >= 16):
            raise ConfigError("horizon, dt must be positive and resolution >= 16")

    @classmethod
    def from_alpha_c(cls, alpha: float, c: float, **kw) -> ChordalSetup:
        """Setup given (alpha, c) explicitly; kappa is read off c and alpha must agree."""
        return cls(kappa=kappa_of_c(c), alpha=alpha, c=c, **kw)

    @property
    def box(self) -> Domain:
        return Domain.half_plane_box(self.box_width, self.box_height)

    @property
    def rho(self) -> float:
        return rho_for_alpha(RESTRICTION_KAPPA, self.alpha)

    def soup_config(self) -> SoupConfig:
        return SoupConfig(self.box, self.c, self.t_min, self.t_max, self.step_scale, self.soup_seed)

    def grid(self) -> RasterGrid:
        return RasterGrid.for_domain(self.box, self.resolution)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class HullSample:
    gamma: np.ndarray
    attached_cluster_ids: list[int]
    attached_loops: tuple = ()
    exited: bool = True
    eta: np.ndarray | None = None
    eta_cells: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def clip_to_box(z: np.ndarray, box: Domain) -> tuple[np.ndarray, bool]:
    """Prefix of the curve up to and including its first vertex outside the box."""
    pts = np.column_stack([z.real, z.imag])
    xmin, _, xmax, ymax = box.bbox
    out = (pts[:, 0] <= xmin) | (pts[:, 0] >= xmax) | (pts[:, 1] >= ymax)
    out[0] = False
    hit = np.flatnonzero(out)
    if hit.size == 0:
        return pts, False
    return pts[: hit[0] + 1], True


def sample_restriction_curve(setup: ChordalSetup) -> tuple[np.ndarray, bool]:
    """SLE(8/3, rho) trace clipped at its first exit from the box.

    Returns the polyline and whether it left the box before the horizon.
    """
    rho = setup.rho
    drv = sle.sample_driving(RESTRICTION_KAPPA, rho if rho != 0.0 else None, setup.horizon, setup.dt,
                             rngmod.derive_seed(setup.seed, rngmod.CURVE, 0))
    tr = sle.loewner_trace(drv, setup.dt, stop_box=setup.box.bbox)
    return clip_to_box(tr.z, setup.box)


def _bbox(p):
    return (p[:, 0].min(), p[:, 1].min(), p[:, 0].max(), p[:, 1].max())


def _boxes_meet(a, b, touch):
    return not (a[0] - touch > b[2] or b[0] - touch > a[2] or a[1] - touch > b[3] or b[1] - touch > a[3])


def attach_clusters(gamma: np.ndarray, soup: LoopSoup, clusters: ClusterSet, touch_distance: float = 0.0) -> HullSample:
    """Ids of clusters owning at least one loop that meets gamma."""
    gb = _bbox(gamma)
    g = np.ascontiguousarray(gamma, dtype=np.float64)
    hit = set()
    for i, lp in enumerate(soup.loops):
        cid = int(clusters.labels[i])
        if cid in hit or not _boxes_meet(gb, lp.bbox, touch_distance):
            continue
        if polylines_intersect(lp.points, g, float(touch_distance)):
            hit.add(cid)
    ids = sorted(hit)
    loops = tuple(soup.loops[j].points for cid in ids for j in clusters.members(cid))
    return HullSample(gamma, ids, loops)


def attach_clusters_bruteforce(gamma, soup: LoopSoup, clusters: ClusterSet, touch_distance: float = 0.0) -> list[int]:
    g = np.ascontiguousarray(gamma, dtype=np.float64)
    hit = set()
    for i, lp in enumerate(soup.loops):
        if polylines_intersect_bruteforce(lp.points, g, float(touch_distance)):
            hit.add(int(clusters.labels[i]))
    return sorted(hit)


def hull_mask(hull: HullSample, grid: RasterGrid) -> np.ndarray:
    out = rasterize_polyline(hull.gamma, grid)
    for pts in hull.attached_loops:
        rasterize_polyline(pts, grid, out)
    return out


def right_region(hull: HullSample, grid: RasterGrid) -> np.ndarray:
    """Cells 4-connected, avoiding the hull, to the bottom-right corner of the box."""
    blocked = hull_mask(hull, grid)
    lab, _ = ndimage.label(~blocked, structure=FOUR)
    ny, nx = blocked.shape
    corner = lab[0, nx - 1]
    if corner == 0:
        raise DegenerateGeometryError("hull covers the bottom-right corner of the box")
    region = lab == corner
    return region


def _interface_path(region: np.ndarray) -> np.ndarray:
    ny, nx = region.shape
    bottom = np.flatnonzero(region[0])
    c0 = int(bottom[0])
    if c0 == 0:
        raise DegenerateGeometryError("right region wraps around the hull")
    rows, cols = moore_trace(region, 0, c0)
    frame = (rows == ny - 1) | (cols == 0) | (cols == nx - 1)
    frame[0] = False
    stop = np.flatnonzero(frame)
    if stop.size == 0:
        raise DegenerateGeometryError("right boundary never reaches the frame")
    k = int(stop[0])
    return np.column_stack([rows[: k + 1], cols[: k + 1]])


def right_boundary(hull: HullSample, resolution: int, box: Domain) -> np.ndarray:
    """Right frontier of gamma and its attached clusters, from the bottom edge to the frame.

    Cells of the right region touching the hull are followed by Moore tracing
    from the region's leftmost bottom-row cell (hull on the left when walking
    upward) until the path first meets the top or a side of the box.
    """
    grid = RasterGrid.for_domain(box, resolution)
    region = right_region(hull, grid)
    if not region[:, -1].any():
        raise DegenerateGeometryError("hull disconnects the right region from the right edge")
    cells = _interface_path(region)
    hull.eta_cells = cells
    hull.eta = grid.centers(cells[:, 0], cells[:, 1])
    return hull.eta


def eta_dimension(eta_cells: np.ndarray, shape, cell_size: float, scales=None) -> DimensionEstimate:
    m = np.zeros(shape, dtype=bool)
    m[eta_cells[:, 0], eta_cells[:, 1]] = True
    if scales is None:
        scales = default_scales(shape)
    return box_counting_dimension(m, cell_size, scales)


# reversibility ----------------------------------------------------------------

def first_crossing(points: np.ndarray, level: float = 1.0) -> float | None:
    """Abscissa where the polyline first reaches height ``level`` (linear interpolation)."""
    y = points[:, 1]
    idx = np.flatnonzero(y >= level)
    if idx.size == 0:
        return None
    k = int(idx[0])
    if k == 0:
        return float(points[0, 0])
    y0, y1 = y[k - 1], y[k]
    s = (level - y0) / (y1 - y0)
    return float(points[k - 1, 0] + s * (points[k, 0] - points[k - 1, 0]))


def inversion(points: np.ndarray) -> np.ndarray:
    """Image under z -> -1/z, traversed in reverse so it again runs from 0 outward."""
    z = points[:, 0] + 1j * points[:, 1]
    w = (-1.0 / z)[::-1]
    return np.column_stack([w.real, w.imag])


@dataclass(frozen=True)
class ReversibilityReport:
    x_forward: np.ndarray
    x_inverted: np.ndarray
    dropped: int
    ks_statistic: float
    p_value: float

    def to_dict(self) -> dict:
        return {
            "n_used": int(len(self.x_forward)),
            "dropped": self.dropped,
            "ks_statistic": self.ks_statistic,
            "p_value": self.p_value,
        }


def reversibility_statistic(etas, level: float = 1.0) -> ReversibilityReport:
    """Two-sample KS test between the height-``level`` crossing abscissa of eta and of -1/eta."""
    fwd, inv = [], []
    dropped = 0
    for eta in etas:
        a = first_crossing(np.asarray(eta, float), level)
        b = first_crossing(inversion(np.asarray(eta, float)), level)
        if a is None or b is None:
            dropped += 1
            continue
        fwd.append(a)
        inv.append(b)
    fwd = np.array(fwd)
    inv = np.array(inv)
    if len(fwd) == 0:
        return ReversibilityReport(fwd, inv, dropped, math.nan, math.nan)
    res = stats.ks_2samp(fwd, inv)
    return ReversibilityReport(fwd, inv, dropped, float(res.statistic), float(res.pvalue))


# pipeline ---------------------------------------------------------------------

def run_chordal(setup: ChordalSetup, soup: LoopSoup | None = None) -> HullSample:
    """One sample: gamma, independent soup, attachment, right boundary."""
    gamma, exited = sample_restriction_curve(setup)
    if soup is None:
        soup = sample_soup(setup.soup_config())
    clusters = build_clusters(soup, setup.touch_distance)
    hull = attach_clusters(gamma, soup, clusters, setup.touch_distance)
    hull.exited = exited
    hull.meta = {"n_loops": len(soup), "n_clusters": len(clusters), "n_attached": len(hull.attached_cluster_ids)}
    if exited:
        right_boundary(hull, setup.resolution, setup.box)
    return hull


def run_many(setup: ChordalSetup, n: int, map_fn=map) -> list[HullSample]:
    """``n`` independent samples with seeds derived from ``setup.seed``; order is fixed."""
    setups = [
        replace(setup, seed=rngmod.derive_seed(setup.seed, rngmod.MISC, k), soup_seed=None) for k in range(n)
    ]
    return list(map_fn(_safe_run, setups))


def _safe_run(setup: ChordalSetup) -> HullSample:
    try:
        return run_chordal(setup)
    except DegenerateGeometryError as e:
        h = HullSample(np.empty((0, 2)), [], exited=False)
        h.meta = {"error": str(e)}
        return h
