"""Loop intersection graph and chain-connected clusters."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from loopsoup.errors import UndefinedDistanceError
from loopsoup.geometry import (
    bbox_gap,
    polyline_distance,
    polyline_distance_bruteforce,
    polylines_intersect,
    polylines_intersect_bruteforce,
)
from loopsoup.soup import Loop, LoopSoup


class UnionFind:
    """Disjoint sets with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


@dataclass(frozen=True)
class IntersectionGraph:
    n_loops: int
    edges: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class ClusterSet:
    """Clusters are ordered by id; a cluster's id is its smallest loop index."""

    labels: np.ndarray
    clusters: tuple[tuple[int, ...], ...]
    graph: IntersectionGraph
    touch_distance: float = 0.0

    def __len__(self) -> int:
        return len(self.clusters)

    def members(self, cluster_id: int) -> tuple[int, ...]:
        for c in self.clusters:
            if c[0] == cluster_id:
                return c
        raise KeyError(cluster_id)

    @property
    def ids(self) -> list[int]:
        return [c[0] for c in self.clusters]


def _boxes_close(p, q, touch: float) -> bool:
    return not (
        p[0] - touch > q[2] or q[0] - touch > p[2] or p[1] - touch > q[3] or q[1] - touch > p[3]
    )


def loops_intersect(a: Loop, b: Loop, touch_distance: float = 0.0) -> bool:
    """Whether the two polylines cross or come within ``touch_distance``."""
    if not _boxes_close(a.bbox, b.bbox, touch_distance):
        return False
    return bool(polylines_intersect(a.points, b.points, float(touch_distance)))


def loops_intersect_bruteforce(a: Loop, b: Loop, touch_distance: float = 0.0) -> bool:
    return bool(polylines_intersect_bruteforce(a.points, b.points, float(touch_distance)))


def _partition(n: int, edges) -> ClusterSet:
    uf = UnionFind(n)
    for i, j in edges:
        uf.union(i, j)
    groups = defaultdict(list)
    for i in range(n):
        groups[uf.find(i)].append(i)
    clusters = sorted((tuple(g) for g in groups.values()), key=lambda g: g[0])
    labels = np.empty(n, dtype=np.int64)
    for g in clusters:
        labels[list(g)] = g[0]
    return labels, tuple(clusters)


def _finish(n, edges, touch) -> ClusterSet:
    edges = tuple(sorted(set(edges)))
    labels, clusters = _partition(n, edges)
    return ClusterSet(labels, clusters, IntersectionGraph(n, edges), float(touch))


def candidate_pairs(loops, touch_distance: float = 0.0) -> list[tuple[int, int]]:
    """Pairs of loops whose (touch-expanded) boxes share a cell of a uniform grid.

    The cell side is the median bounding-box diagonal.
    """
    n = len(loops)
    if n < 2:
        return []
    boxes = np.array([lp.bbox for lp in loops])
    diag = np.hypot(boxes[:, 2] - boxes[:, 0], boxes[:, 3] - boxes[:, 1])
    h = max(float(np.median(diag)), 2.0 * touch_distance, 1e-12)
    half = touch_distance / 2.0
    x0 = boxes[:, 0].min() - half
    y0 = boxes[:, 1].min() - half
    grid = defaultdict(list)
    for i, (bx0, by0, bx1, by1) in enumerate(boxes):
        gx0 = math.floor((bx0 - half - x0) / h)
        gx1 = math.floor((bx1 + half - x0) / h)
        gy0 = math.floor((by0 - half - y0) / h)
        gy1 = math.floor((by1 + half - y0) / h)
        for gx in range(gx0, gx1 + 1):
            for gy in range(gy0, gy1 + 1):
                grid[gx, gy].append(i)
    pairs = set()
    for members in grid.values():
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                pairs.add((members[a], members[b]))
    return sorted(pairs)


def build_clusters(soup: LoopSoup, touch_distance: float = 0.0) -> ClusterSet:
    """Clusters from grid-filtered candidate pairs and union-find."""
    loops = soup.loops
    edges = []
    for i, j in candidate_pairs(loops, touch_distance):
        if loops_intersect(loops[i], loops[j], touch_distance):
            edges.append((i, j))
    return _finish(len(loops), edges, touch_distance)


def build_clusters_bruteforce(soup: LoopSoup, touch_distance: float = 0.0) -> ClusterSet:
    """Reference partition: every pair, every segment pair, no acceleration."""
    loops = soup.loops
    edges = []
    for i in range(len(loops)):
        for j in range(i + 1, len(loops)):
            if loops_intersect_bruteforce(loops[i], loops[j], touch_distance):
                edges.append((i, j))
    return _finish(len(loops), edges, touch_distance)


def same_partition(a: ClusterSet, b: ClusterSet) -> bool:
    return a.clusters == b.clusters


def min_cluster_distance(clusters: ClusterSet, soup: LoopSoup) -> float:
    """Smallest vertex-to-segment distance between loops of different clusters."""
    if len(clusters) < 2:
        raise UndefinedDistanceError("need at least two clusters")
    loops = soup.loops
    labels = clusters.labels
    pairs = []
    for i in range(len(loops)):
        for j in range(i + 1, len(loops)):
            if labels[i] != labels[j]:
                pairs.append((bbox_gap(loops[i].bbox, loops[j].bbox), i, j))
    pairs.sort()
    best = math.inf
    for gap, i, j in pairs:
        if gap >= best:
            break
        best = min(best, polyline_distance(loops[i].points, loops[j].points, best))
    return best


def min_cluster_distance_bruteforce(clusters: ClusterSet, soup: LoopSoup) -> float:
    if len(clusters) < 2:
        raise UndefinedDistanceError("need at least two clusters")
    loops = soup.loops
    best = math.inf
    for i in range(len(loops)):
        for j in range(i + 1, len(loops)):
            if clusters.labels[i] != clusters.labels[j]:
                best = min(best, polyline_distance_bruteforce(loops[i].points, loops[j].points))
    return best


def cluster_records(clusters: ClusterSet, soup: LoopSoup) -> list[dict]:
    """One record per cluster: id, size, bounding box and total duration."""
    out = []
    for members in clusters.clusters:
        boxes = np.array([soup.loops[i].bbox for i in members])
        out.append(
            {
                "cluster_id": members[0],
                "size": len(members),
                "xmin": float(boxes[:, 0].min()),
                "ymin": float(boxes[:, 1].min()),
                "xmax": float(boxes[:, 2].max()),
                "ymax": float(boxes[:, 3].max()),
                "total_duration": float(sum(soup.loops[i].duration for i in members)),
            }
        )
    return out


def cluster_table(clusters: ClusterSet, soup: LoopSoup) -> str:
    """Fixed-width text table of :func:`cluster_records`."""
    head = f"{'id':>6} {'size':>5} {'xmin':>10} {'ymin':>10} {'xmax':>10} {'ymax':>10} {'duration':>12}"
    lines = [head]
    for r in cluster_records(clusters, soup):
        lines.append(
            f"{r['cluster_id']:>6d} {r['size']:>5d} {r['xmin']:>10.6f} {r['ymin']:>10.6f} "
            f"{r['xmax']:>10.6f} {r['ymax']:>10.6f} {r['total_duration']:>12.6g}"
        )
    return "\n".join(lines)
