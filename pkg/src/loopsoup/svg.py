"""Deterministic SVG drawings of soups, clusters, boundaries, masks and traces."""

from __future__ import annotations

import numpy as np

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


class Canvas:
    """Maps plane coordinates in ``bbox`` onto a ``size``-pixel-wide SVG, y pointing up."""

    def __init__(self, bbox, size: int = 800):
        self.x0, self.y0, x1, y1 = (float(v) for v in bbox)
        self.scale = size / max(x1 - self.x0, y1 - self.y0)
        self.w = round((x1 - self.x0) * self.scale)
        self.h = round((y1 - self.y0) * self.scale)
        self.items: list[str] = []

    def _xy(self, pts):
        pts = np.asarray(pts, float)
        x = (pts[:, 0] - self.x0) * self.scale
        y = self.h - (pts[:, 1] - self.y0) * self.scale
        return " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(x, y))

    def polyline(self, pts, stroke="#000", width=0.5, closed=False, fill="none", opacity=1.0):
        tag = "polygon" if closed else "polyline"
        self.items.append(
            f'<{tag} points="{self._xy(pts)}" fill="{fill}" stroke="{stroke}" '
            f'stroke-width="{width}" opacity="{opacity}"/>'
        )

    def mask(self, mask, origin, cell_size, color="#dddddd"):
        """One rectangle per run of set cells along each row."""
        ny, nx = mask.shape
        for r in range(ny):
            row = mask[r]
            if not row.any():
                continue
            edges = np.flatnonzero(np.diff(np.concatenate([[0], row.astype(np.int8), [0]])))
            for a, b in zip(edges[::2], edges[1::2]):
                x = (origin[0] + a * cell_size - self.x0) * self.scale
                y = self.h - (origin[1] + (r + 1) * cell_size - self.y0) * self.scale
                self.items.append(
                    f'<rect x="{x:.3f}" y="{y:.3f}" width="{(b - a) * cell_size * self.scale:.3f}" '
                    f'height="{cell_size * self.scale:.3f}" fill="{color}" stroke="none"/>'
                )

    def render(self, note: str | None = None) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w}" height="{self.h}" '
            f'viewBox="0 0 {self.w} {self.h}">'
        )
        if note:
            head += f"\n<!-- {note} -->"
        return "\n".join([head, f'<rect width="{self.w}" height="{self.h}" fill="white"/>', *self.items, "</svg>"]) + "\n"


def soup_svg(soup, clusters=None, boundaries=(), free_mask=None, size: int = 800, note=None) -> str:
    """Loops as thin strokes coloured by cluster, boundaries highlighted, free cells shaded."""
    cv = Canvas(soup.config.domain.bbox, size)
    if free_mask is not None:
        cv.mask(free_mask.free, free_mask.grid.origin, free_mask.grid.cell_size, "#eef3ff")
    for i, lp in enumerate(soup.loops):
        color = "#444444"
        if clusters is not None:
            color = PALETTE[clusters.ids.index(int(clusters.labels[i])) % len(PALETTE)]
        cv.polyline(lp.points, stroke=color, width=0.4)
    for b in boundaries:
        cv.polyline(b.polyline, stroke="#000000", width=1.2, closed=True)
    return cv.render(note)


def trace_svg(points, bbox=None, size: int = 800, stroke="#c00000", note=None) -> str:
    pts = np.asarray(points, float)
    if bbox is None:
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        pad = 0.05 * max(hi - lo) or 1.0
        bbox = (lo[0] - pad, min(lo[1], 0.0) - pad, hi[0] + pad, hi[1] + pad)
    cv = Canvas(bbox, size)
    cv.polyline(pts, stroke=stroke, width=0.6)
    return cv.render(note)


def chordal_svg(hull, box, size: int = 800, note=None) -> str:
    """Overlay of gamma, the attached loops and eta."""
    cv = Canvas(box.bbox, size)
    for pts in hull.attached_loops:
        cv.polyline(pts, stroke="#2ca02c", width=0.4)
    cv.polyline(hull.gamma, stroke="#1f77b4", width=0.6)
    if hull.eta is not None:
        cv.polyline(hull.eta, stroke="#d62728", width=0.9)
    return cv.render(note)
