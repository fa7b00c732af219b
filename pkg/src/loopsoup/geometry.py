"""Segment predicates and polyline-polyline tests, compiled with numba.

All predicates treat segments as closed. The same scalar kernels back both
the accelerated paths and the brute-force oracles, so the two agree bit for
bit.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

BRUTE_FORCE_PAIRS = 40_000


@njit(cache=True, inline="always")
def _orient(ax, ay, bx, by, cx, cy):
    v = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if v > 0.0:
        return 1
    if v < 0.0:
        return -1
    return 0


@njit(cache=True, inline="always")
def _on_segment(ax, ay, bx, by, px, py):
    # p collinear with ab; inside the bounding box of ab?
    return min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by)


@njit(cache=True)
def segments_intersect(ax, ay, bx, by, cx, cy, dx, dy):
    o1 = _orient(ax, ay, bx, by, cx, cy)
    o2 = _orient(ax, ay, bx, by, dx, dy)
    o3 = _orient(cx, cy, dx, dy, ax, ay)
    o4 = _orient(cx, cy, dx, dy, bx, by)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and _on_segment(ax, ay, bx, by, cx, cy):
        return True
    if o2 == 0 and _on_segment(ax, ay, bx, by, dx, dy):
        return True
    if o3 == 0 and _on_segment(cx, cy, dx, dy, ax, ay):
        return True
    if o4 == 0 and _on_segment(cx, cy, dx, dy, bx, by):
        return True
    return False


@njit(cache=True)
def point_segment_dist(px, py, ax, ay, bx, by):
    vx = bx - ax
    vy = by - ay
    wx = px - ax
    wy = py - ay
    ll = vx * vx + vy * vy
    if ll == 0.0:
        return math.hypot(wx, wy)
    s = (wx * vx + wy * vy) / ll
    if s <= 0.0:
        return math.hypot(wx, wy)
    if s >= 1.0:
        return math.hypot(px - bx, py - by)
    return math.hypot(wx - s * vx, wy - s * vy)


@njit(cache=True)
def segment_segment_dist(ax, ay, bx, by, cx, cy, dx, dy):
    if segments_intersect(ax, ay, bx, by, cx, cy, dx, dy):
        return 0.0
    d = point_segment_dist(ax, ay, cx, cy, dx, dy)
    d = min(d, point_segment_dist(bx, by, cx, cy, dx, dy))
    d = min(d, point_segment_dist(cx, cy, ax, ay, bx, by))
    d = min(d, point_segment_dist(dx, dy, ax, ay, bx, by))
    return d


@njit(cache=True, inline="always")
def _pair_hits(a, i, b, j, touch):
    if touch > 0.0:
        return (
            segment_segment_dist(
                a[i, 0], a[i, 1], a[i + 1, 0], a[i + 1, 1],
                b[j, 0], b[j, 1], b[j + 1, 0], b[j + 1, 1],
            )
            <= touch
        )
    return segments_intersect(
        a[i, 0], a[i, 1], a[i + 1, 0], a[i + 1, 1],
        b[j, 0], b[j, 1], b[j + 1, 0], b[j + 1, 1],
    )


@njit(cache=True)
def polylines_intersect_bruteforce(a, b, touch):
    """All segment pairs, no pruning of any kind."""
    for i in range(a.shape[0] - 1):
        for j in range(b.shape[0] - 1):
            if _pair_hits(a, i, b, j, touch):
                return True
    return False


@njit(cache=True)
def _segments_near_box(p, x0, y0, x1, y1):
    out = np.empty(p.shape[0] - 1, np.int64)
    n = 0
    for i in range(p.shape[0] - 1):
        sx0 = min(p[i, 0], p[i + 1, 0])
        sx1 = max(p[i, 0], p[i + 1, 0])
        sy0 = min(p[i, 1], p[i + 1, 1])
        sy1 = max(p[i, 1], p[i + 1, 1])
        if sx1 >= x0 and sx0 <= x1 and sy1 >= y0 and sy0 <= y1:
            out[n] = i
            n += 1
    return out[:n]


@njit(cache=True)
def polylines_intersect(a, b, touch):
    """Closed-segment intersection (or distance <= touch) between two polylines.

    Segments are pruned to the overlap of the two bounding boxes, then
    candidate pairs come from a uniform grid over the surviving segments of
    ``b``. Pruning only discards pairs whose boxes are farther apart than
    ``touch``, so the answer equals the brute-force one.
    """
    ax0 = a[:, 0].min() - touch
    ax1 = a[:, 0].max() + touch
    ay0 = a[:, 1].min() - touch
    ay1 = a[:, 1].max() + touch
    bx0 = b[:, 0].min() - touch
    bx1 = b[:, 0].max() + touch
    by0 = b[:, 1].min() - touch
    by1 = b[:, 1].max() + touch
    x0 = max(ax0, bx0)
    x1 = min(ax1, bx1)
    y0 = max(ay0, by0)
    y1 = min(ay1, by1)
    if x0 > x1 or y0 > y1:
        return False
    sa = _segments_near_box(a, x0, y0, x1, y1)
    sb = _segments_near_box(b, x0, y0, x1, y1)
    na = sa.shape[0]
    nb = sb.shape[0]
    if na == 0 or nb == 0:
        return False
    if na * nb <= BRUTE_FORCE_PAIRS:
        for ii in range(na):
            for jj in range(nb):
                if _pair_hits(a, sa[ii], b, sb[jj], touch):
                    return True
        return False

    # grid over b's candidate segments, cell size ~ mean segment extent
    ext = 0.0
    for jj in range(nb):
        j = sb[jj]
        ext += abs(b[j + 1, 0] - b[j, 0]) + abs(b[j + 1, 1] - b[j, 1])
    h = max(2.0 * ext / nb, 2.0 * touch, 1e-12)
    gw = x1 - x0
    gh = y1 - y0
    nx = max(1, int(gw / h) + 1)
    ny = max(1, int(gh / h) + 1)
    cap = 4 * nb + 16
    if nx * ny > cap:
        f = math.sqrt(nx * ny / cap)
        nx = max(1, int(nx / f))
        ny = max(1, int(ny / f))
    hx = max(gw / nx, 1e-300)
    hy = max(gh / ny, 1e-300)
    counts = np.zeros(nx * ny + 1, np.int64)
    lo_i = np.empty((nb, 4), np.int64)
    for jj in range(nb):
        j = sb[jj]
        cx0 = int((min(b[j, 0], b[j + 1, 0]) - touch - x0) / hx)
        cx1 = int((max(b[j, 0], b[j + 1, 0]) + touch - x0) / hx)
        cy0 = int((min(b[j, 1], b[j + 1, 1]) - touch - y0) / hy)
        cy1 = int((max(b[j, 1], b[j + 1, 1]) + touch - y0) / hy)
        cx0 = min(max(cx0, 0), nx - 1)
        cx1 = min(max(cx1, 0), nx - 1)
        cy0 = min(max(cy0, 0), ny - 1)
        cy1 = min(max(cy1, 0), ny - 1)
        lo_i[jj, 0] = cx0
        lo_i[jj, 1] = cx1
        lo_i[jj, 2] = cy0
        lo_i[jj, 3] = cy1
        for gy in range(cy0, cy1 + 1):
            for gx in range(cx0, cx1 + 1):
                counts[gy * nx + gx + 1] += 1
    for k in range(nx * ny):
        counts[k + 1] += counts[k]
    fill = counts[:-1].copy()
    cells = np.empty(counts[-1], np.int64)
    for jj in range(nb):
        for gy in range(lo_i[jj, 2], lo_i[jj, 3] + 1):
            for gx in range(lo_i[jj, 0], lo_i[jj, 1] + 1):
                c = gy * nx + gx
                cells[fill[c]] = sb[jj]
                fill[c] += 1
    for ii in range(na):
        i = sa[ii]
        cx0 = int((min(a[i, 0], a[i + 1, 0]) - x0) / hx)
        cx1 = int((max(a[i, 0], a[i + 1, 0]) - x0) / hx)
        cy0 = int((min(a[i, 1], a[i + 1, 1]) - y0) / hy)
        cy1 = int((max(a[i, 1], a[i + 1, 1]) - y0) / hy)
        cx0 = min(max(cx0, 0), nx - 1)
        cx1 = min(max(cx1, 0), nx - 1)
        cy0 = min(max(cy0, 0), ny - 1)
        cy1 = min(max(cy1, 0), ny - 1)
        for gy in range(cy0, cy1 + 1):
            for gx in range(cx0, cx1 + 1):
                c = gy * nx + gx
                for k in range(counts[c], counts[c + 1]):
                    if _pair_hits(a, i, b, cells[k], touch):
                        return True
    return False


@njit(cache=True)
def polyline_distance_bruteforce(a, b):
    """Minimum vertex-to-segment distance, both directions, over all pairs."""
    best = np.inf
    for i in range(a.shape[0]):
        for j in range(b.shape[0] - 1):
            d = point_segment_dist(a[i, 0], a[i, 1], b[j, 0], b[j, 1], b[j + 1, 0], b[j + 1, 1])
            if d < best:
                best = d
    for j in range(b.shape[0]):
        for i in range(a.shape[0] - 1):
            d = point_segment_dist(b[j, 0], b[j, 1], a[i, 0], a[i, 1], a[i + 1, 0], a[i + 1, 1])
            if d < best:
                best = d
    return best


@njit(cache=True)
def _one_way_distance(a, b, best):
    # vertices of a against segments of b, skipping segments whose box is
    # already farther than the incumbent
    for j in range(b.shape[0] - 1):
        sx0 = min(b[j, 0], b[j + 1, 0]) - best
        sx1 = max(b[j, 0], b[j + 1, 0]) + best
        sy0 = min(b[j, 1], b[j + 1, 1]) - best
        sy1 = max(b[j, 1], b[j + 1, 1]) + best
        for i in range(a.shape[0]):
            px = a[i, 0]
            py = a[i, 1]
            if px < sx0 or px > sx1 or py < sy0 or py > sy1:
                continue
            d = point_segment_dist(px, py, b[j, 0], b[j, 1], b[j + 1, 0], b[j + 1, 1])
            if d < best:
                best = d
                sx0 = min(b[j, 0], b[j + 1, 0]) - best
                sx1 = max(b[j, 0], b[j + 1, 0]) + best
                sy0 = min(b[j, 1], b[j + 1, 1]) - best
                sy1 = max(b[j, 1], b[j + 1, 1]) + best
    return best


def polyline_distance(a: np.ndarray, b: np.ndarray, upper: float = np.inf) -> float:
    """Exact minimum vertex-to-segment distance between two polylines.

    ``upper`` is an incumbent bound; when the true distance exceeds it the
    return value is some number >= ``upper``.
    """
    from scipy.spatial import cKDTree

    # vertex-vertex distance is an upper bound that makes the box filter bite
    tree = cKDTree(b)
    dvv, _ = tree.query(a, k=1, distance_upper_bound=upper if np.isfinite(upper) else np.inf)
    dmin = float(np.min(dvv))
    if not np.isfinite(dmin):
        return upper
    # inflate so the kernel, not the tree, supplies the final value
    best = min(dmin * (1.0 + 1e-9) + 1e-300, upper)
    best = _one_way_distance(a, b, best)
    best = _one_way_distance(b, a, best)
    return best


def bbox_gap(p, q) -> float:
    """Euclidean distance between two (xmin, ymin, xmax, ymax) boxes."""
    dx = max(0.0, max(p[0], q[0]) - min(p[2], q[2]))
    dy = max(0.0, max(p[1], q[1]) - min(p[3], q[3]))
    return math.hypot(dx, dy)
