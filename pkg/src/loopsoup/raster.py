"""Raster topology: loop traces, filled hulls, free points, crossings and outer boundaries.

Cells are indexed ``[row, col]`` with row 0 at the bottom of the domain
(``y = origin_y``). Traces block 8-connected moves; the exterior and free
regions are explored with 4-connected flood fills.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import ndimage

from loopsoup.clusters import ClusterSet
from loopsoup.domain import Domain
from loopsoup.errors import BoundaryUndefinedError, DomainError
from loopsoup.soup import Loop, LoopSoup

EMPTY, LOOP_TRACE, CLUSTER_FILL, EXTERIOR, BOUNDARY = range(5)

FOUR = ndimage.generate_binary_structure(2, 1)
EIGHT = ndimage.generate_binary_structure(2, 2)


@dataclass
class RasterGrid:
    """Square cells covering the domain's bounding box.

    ``cells`` stores one role code per cell (EMPTY, LOOP_TRACE, ...), so the
    roles are disjoint by construction.
    """

    resolution: int
    origin: tuple[float, float]
    cell_size: float
    cells: np.ndarray

    @classmethod
    def for_domain(cls, domain: Domain, resolution: int) -> RasterGrid:
        if resolution < 16:
            raise ValueError("resolution must be at least 16")
        xmin, ymin, xmax, ymax = domain.bbox
        h = max(xmax - xmin, ymax - ymin) / resolution
        nx = max(1, round((xmax - xmin) / h))
        ny = max(1, round((ymax - ymin) / h))
        return cls(resolution, (xmin, ymin), h, np.zeros((ny, nx), np.uint8))

    @classmethod
    def for_box(cls, bbox, resolution: int) -> RasterGrid:
        return cls.for_domain(Domain.rectangle(bbox[2] - bbox[0], bbox[3] - bbox[1], bbox[:2]), resolution)

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    @property
    def loop_trace(self) -> np.ndarray:
        return self.cells == LOOP_TRACE

    def centers(self, rows, cols) -> np.ndarray:
        rows = np.asarray(rows, float)
        cols = np.asarray(cols, float)
        x = self.origin[0] + (cols + 0.5) * self.cell_size
        y = self.origin[1] + (rows + 0.5) * self.cell_size
        return np.column_stack([x, y])

    def cell_of(self, points) -> np.ndarray:
        p = np.asarray(points, float).reshape(-1, 2)
        cols = np.floor((p[:, 0] - self.origin[0]) / self.cell_size).astype(np.int64)
        rows = np.floor((p[:, 1] - self.origin[1]) / self.cell_size).astype(np.int64)
        return np.column_stack([rows, cols])

    def inside_mask(self, domain: Domain) -> np.ndarray:
        ny, nx = self.shape
        rr, cc = np.mgrid[0:ny, 0:nx]
        return domain.contains(self.centers(rr.ravel(), cc.ravel())).reshape(ny, nx)


@njit(cache=True)
def _raster_segments(pts, x0, y0, h, out):
    ny, nx = out.shape
    for k in range(pts.shape[0] - 1):
        ax = (pts[k, 0] - x0) / h
        ay = (pts[k, 1] - y0) / h
        bx = (pts[k + 1, 0] - x0) / h
        by = (pts[k + 1, 1] - y0) / h
        xlo = min(ax, bx)
        xhi = max(ax, bx)
        c0 = max(int(math.ceil(xlo)) - 1, 0)
        c1 = min(int(math.floor(xhi)), nx - 1)
        for c in range(c0, c1 + 1):
            if ax == bx:
                ylo = min(ay, by)
                yhi = max(ay, by)
            else:
                xa = max(xlo, float(c))
                xb = min(xhi, float(c + 1))
                t = (by - ay) / (bx - ax)
                ya = ay + (xa - ax) * t
                yb = ay + (xb - ax) * t
                ylo = min(ya, yb)
                yhi = max(ya, yb)
            r0 = max(int(math.ceil(ylo)) - 1, 0)
            r1 = min(int(math.floor(yhi)), ny - 1)
            for r in range(r0, r1 + 1):
                out[r, c] = True


def rasterize_polyline(points: np.ndarray, grid: RasterGrid, out: np.ndarray | None = None) -> np.ndarray:
    """Mark every cell whose closed square meets a segment of the polyline."""
    if out is None:
        out = np.zeros(grid.shape, dtype=bool)
    _raster_segments(np.ascontiguousarray(points, dtype=np.float64), grid.origin[0], grid.origin[1], grid.cell_size, out)
    return out


def trace_mask(loops, grid: RasterGrid) -> np.ndarray:
    out = np.zeros(grid.shape, dtype=bool)
    for lp in loops:
        pts = lp.points if isinstance(lp, Loop) else lp
        rasterize_polyline(pts, grid, out)
    return out


def rasterize_soup(soup: LoopSoup, resolution: int) -> RasterGrid:
    grid = RasterGrid.for_domain(soup.config.domain, resolution)
    grid.cells[trace_mask(soup.loops, grid)] = LOOP_TRACE
    return grid


def _window(bbox, grid: RasterGrid, pad: int):
    (r0, c0), (r1, c1) = grid.cell_of([[bbox[0], bbox[1]], [bbox[2], bbox[3]]])
    ny, nx = grid.shape
    return (
        slice(max(r0 - pad, 0), min(r1 + pad + 1, ny)),
        slice(max(c0 - pad, 0), min(c1 + pad + 1, nx)),
    )


def _subgrid(grid: RasterGrid, win) -> RasterGrid:
    rs, cs = win
    origin = (grid.origin[0] + cs.start * grid.cell_size, grid.origin[1] + rs.start * grid.cell_size)
    cells = np.zeros((rs.stop - rs.start, cs.stop - cs.start), np.uint8)
    return RasterGrid(grid.resolution, origin, grid.cell_size, cells)


def hull_window(loop: Loop, grid: RasterGrid):
    """(window slices, filled-hull mask inside the window) for one loop."""
    win = _window(loop.bbox, grid, 1)
    sub = _subgrid(grid, win)
    tr = rasterize_polyline(loop.points, sub)
    # the window is padded, so its frame is reachable from the grid frame
    return win, ndimage.binary_fill_holes(tr, structure=FOUR)


def fill_loop_hull(loop: Loop, grid: RasterGrid) -> np.ndarray:
    """Trace cells plus every cell a 4-connected flood from the frame cannot reach."""
    out = np.zeros(grid.shape, dtype=bool)
    win, sub = hull_window(loop, grid)
    out[win] |= sub
    return out


@dataclass
class FreePointMask:
    grid: RasterGrid
    free: np.ndarray
    trace_free: np.ndarray
    inside: np.ndarray

    @property
    def free_fraction(self) -> float:
        return float(self.free.sum() / max(self.inside.sum(), 1))

    @property
    def trace_free_fraction(self) -> float:
        return float(self.trace_free.sum() / max(self.inside.sum(), 1))


def hull_union(loops, grid: RasterGrid) -> np.ndarray:
    out = np.zeros(grid.shape, dtype=bool)
    for lp in loops:
        win, sub = hull_window(lp, grid)
        out[win] |= sub
    return out


def free_point_mask(soup: LoopSoup, resolution: int) -> FreePointMask:
    """Cells of the domain lying in no loop's filled hull, plus the weaker trace-free mask."""
    grid = rasterize_soup(soup, resolution)
    inside = grid.inside_mask(soup.config.domain)
    hull = hull_union(soup.loops, grid)
    return FreePointMask(grid, inside & ~hull, inside & ~grid.loop_trace, inside)


SIDES = ("left_right", "top_bottom")


def mask_crosses(open_mask: np.ndarray, side: str = "left_right") -> bool:
    """4-connected path of open cells between two opposite sides of the grid."""
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}")
    lab, n = ndimage.label(open_mask, structure=FOUR)
    if n == 0:
        return False
    if side == "left_right":
        a, b = lab[:, 0], lab[:, -1]
    else:
        a, b = lab[0, :], lab[-1, :]
    common = np.intersect1d(a[a > 0], b[b > 0])
    return common.size > 0


def crossing_exists(soup: LoopSoup, resolution: int, side: str = "left_right", avoid: str = "trace") -> bool:
    """Whether trace-avoiding cells connect two opposite sides of a rectangular domain.

    ``avoid="hull"`` uses the stricter free-point mask instead.
    """
    if not soup.config.domain.is_rectangular:
        raise DomainError("crossings are defined for rectangular domains")
    fpm = free_point_mask(soup, resolution) if avoid == "hull" else None
    if fpm is not None:
        return mask_crosses(fpm.free, side)
    grid = rasterize_soup(soup, resolution)
    return mask_crosses(~grid.loop_trace, side)


# outer boundaries -----------------------------------------------------------

# clockwise on screen with row index growing upward: W, NW, N, NE, E, SE, S, SW
_DR = np.array([0, 1, 1, 1, 0, -1, -1, -1], np.int64)
_DC = np.array([-1, -1, 0, 1, 1, 1, 0, -1], np.int64)


@njit(cache=True)
def _dir_index(dr, dc):
    for k in range(8):
        if _DR[k] == dr and _DC[k] == dc:
            return k
    return -1


@njit(cache=True)
def moore_trace(fg, r0, c0):
    """Moore-neighbour contour of the 8-connected component of ``fg`` at (r0, c0).

    (r0, c0) must have a background west neighbour. Tracing stops when the
    move out of the start cell repeats the first move.
    """
    ny, nx = fg.shape
    cap = 8 * fg.size + 8
    rows = np.empty(cap, np.int64)
    cols = np.empty(cap, np.int64)
    rows[0] = r0
    cols[0] = c0
    n = 1
    pr, pc = r0, c0
    bk = 0  # backtrack sits west of the start
    first = -1
    while True:
        found = -1
        for m in range(1, 9):
            k = (bk + m) % 8
            rr = pr + _DR[k]
            cc = pc + _DC[k]
            if 0 <= rr < ny and 0 <= cc < nx and fg[rr, cc]:
                found = k
                break
        if found < 0:
            break  # isolated cell
        if pr == r0 and pc == c0:
            if first < 0:
                first = found
            elif found == first:
                break
        # new backtrack: the neighbour scanned just before the hit, seen from the new cell
        kb = (found + 7) % 8
        br = pr + _DR[kb]
        bc = pc + _DC[kb]
        pr = pr + _DR[found]
        pc = pc + _DC[found]
        bk = _dir_index(br - pr, bc - pc)
        if pr == r0 and pc == c0:
            continue
        rows[n] = pr
        cols[n] = pc
        n += 1
        if n >= cap:
            break
    return rows[:n], cols[:n]


@dataclass
class ClusterBoundary:
    """Closed boundary polyline (cell centres, first point repeated at the end)."""

    cluster_id: int
    polyline: np.ndarray
    grid_resolution: int
    cells: np.ndarray
    cell_size: float
    origin: tuple[float, float]

    def cell_mask(self):
        """Boolean mask of boundary cells on a grid tight around them, for box counting."""
        r = self.cells[:, 0] - self.cells[:, 0].min()
        c = self.cells[:, 1] - self.cells[:, 1].min()
        m = np.zeros((r.max() + 1, c.max() + 1), dtype=bool)
        m[r, c] = True
        return m

    @property
    def is_simple(self) -> bool:
        keys = self.cells[:, 0] * (1 << 32) + self.cells[:, 1]
        return len(np.unique(keys)) == len(keys)


def _exterior(trace: np.ndarray) -> np.ndarray:
    """Non-trace cells 4-connected to a non-trace cell on the array frame."""
    open_ = ~trace
    lab, _ = ndimage.label(open_, structure=FOUR)
    frame = np.concatenate([lab[0], lab[-1], lab[:, 0], lab[:, -1]])
    seeds = np.unique(frame[frame > 0])
    return np.isin(lab, seeds)


def outer_boundary_from_trace(trace: np.ndarray, pad: int = 2):
    """Boundary cells (row, col) around a trace mask, in the mask's own indexing.

    Returns ``None`` when the trace leaves no exterior cell.
    """
    ext = _exterior(trace)
    if not ext.any():
        return None
    filled = np.pad(~ext, pad)
    grown = ndimage.binary_dilation(filled, structure=EIGHT)
    nz = np.flatnonzero(grown.ravel())
    r0, c0 = divmod(int(nz[0]), grown.shape[1])
    rows, cols = moore_trace(grown, r0, c0)
    return np.column_stack([rows - pad, cols - pad])


def trace_outer_boundary(cluster_id: int, clusters: ClusterSet, soup: LoopSoup, resolution: int) -> ClusterBoundary:
    """Outer boundary of one cluster against the component of its complement touching the frame.

    The filled cluster is the complement of the exterior flood fill; the
    returned cycle runs through exterior cells 8-adjacent to it, found by
    Moore-neighbour tracing of the filled cluster grown by one cell.
    """
    members = clusters.members(cluster_id)
    grid = RasterGrid.for_domain(soup.config.domain, resolution)
    boxes = np.array([soup.loops[i].bbox for i in members])
    bbox = (boxes[:, 0].min(), boxes[:, 1].min(), boxes[:, 2].max(), boxes[:, 3].max())
    win = _window(bbox, grid, 2)
    sub = _subgrid(grid, win)
    tr = trace_mask([soup.loops[i] for i in members], sub)
    cells = outer_boundary_from_trace(tr)
    if cells is None:
        raise BoundaryUndefinedError(f"cluster {cluster_id} leaves no exterior component")
    cells = cells + np.array([win[0].start, win[1].start])
    pts = grid.centers(cells[:, 0], cells[:, 1])
    poly = np.vstack([pts, pts[:1]])
    return ClusterBoundary(cluster_id, poly, resolution, cells, grid.cell_size, grid.origin)


def points_in_polygon(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd rule membership of points in a closed polygon."""
    from matplotlib.path import Path

    return Path(poly, closed=True).contains_points(points)
