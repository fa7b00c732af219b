import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import LineString

from conftest import circle_loop, soup_of, square_loop
from loopsoup.clusters import (
    UnionFind,
    build_clusters,
    build_clusters_bruteforce,
    cluster_records,
    cluster_table,
    loops_intersect,
    loops_intersect_bruteforce,
    min_cluster_distance,
    min_cluster_distance_bruteforce,
    same_partition,
)
from loopsoup.domain import Domain
from loopsoup.errors import UndefinedDistanceError
from loopsoup.geometry import (
    polyline_distance,
    polyline_distance_bruteforce,
    polylines_intersect,
    polylines_intersect_bruteforce,
    segments_intersect,
)
from loopsoup.soup import SoupConfig, sample_soup

coord = st.integers(-4, 4).map(float)


@given(*[coord] * 8)
def test_segment_predicate_matches_shapely(ax, ay, bx, by, cx, cy, dx, dy):
    # small integer coordinates keep shapely's predicate exact
    a = LineString([(ax, ay), (bx, by)]) if (ax, ay) != (bx, by) else None
    b = LineString([(cx, cy), (dx, dy)]) if (cx, cy) != (dx, dy) else None
    if a is None or b is None:
        return
    assert segments_intersect(ax, ay, bx, by, cx, cy, dx, dy) == a.intersects(b)


def test_touching_endpoints_count_as_intersection():
    assert segments_intersect(0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0)
    assert segments_intersect(0.0, 0.0, 2.0, 0.0, 1.0, 0.0, 1.0, 1.0)
    assert not segments_intersect(0.0, 0.0, 1.0, 0.0, 0.0, 1e-12, 1.0, 1e-12)


def test_polyline_intersection_against_bruteforce_random_pairs():
    g = np.random.default_rng(7)
    hits = 0
    for _ in range(1000):
        a = np.cumsum(g.normal(0, 0.05, size=(60, 2)), axis=0) + g.random(2)
        b = np.cumsum(g.normal(0, 0.05, size=(60, 2)), axis=0) + g.random(2)
        for touch in (0.0, 0.02):
            fast = polylines_intersect(a, b, touch)
            assert fast == polylines_intersect_bruteforce(a, b, touch)
            hits += fast
    assert 100 < hits < 1900  # both outcomes exercised


def test_polyline_intersection_against_shapely():
    g = np.random.default_rng(8)
    for _ in range(300):
        a = np.cumsum(g.normal(0, 0.05, size=(40, 2)), axis=0) + g.random(2)
        b = np.cumsum(g.normal(0, 0.05, size=(40, 2)), axis=0) + g.random(2)
        assert polylines_intersect(a, b, 0.0) == LineString(a).intersects(LineString(b))


def test_polyline_distance_against_shapely_and_bruteforce():
    g = np.random.default_rng(9)
    for _ in range(300):
        a = np.cumsum(g.normal(0, 0.05, size=(50, 2)), axis=0) + g.random(2)
        b = np.cumsum(g.normal(0, 0.05, size=(50, 2)), axis=0) + g.random(2)
        if LineString(a).intersects(LineString(b)):
            continue
        d = polyline_distance(a, b)
        assert d == polyline_distance_bruteforce(a, b)
        assert d == pytest.approx(LineString(a).distance(LineString(b)), rel=1e-9, abs=1e-15)


def test_union_find():
    uf = UnionFind(6)
    assert uf.union(0, 1) and uf.union(2, 3) and uf.union(1, 3)
    assert not uf.union(0, 2)
    assert uf.find(0) == uf.find(3) != uf.find(4)


def test_disjoint_loops_make_singletons():
    loops = [circle_loop(0.2 + 0.3 * k, 0.5, 0.1) for k in range(3)]
    cl = build_clusters(soup_of(loops))
    assert len(cl) == 3 and cl.clusters == ((0,), (1,), (2,))


def test_nested_loops_do_not_merge():
    cl = build_clusters(soup_of([circle_loop(0.5, 0.5, 0.4), circle_loop(0.5, 0.5, 0.1)]))
    assert len(cl) == 2


def test_chain_merges_transitively():
    loops = [square_loop(0.1 + 0.15 * k, 0.4, 0.2) for k in range(5)] + [circle_loop(0.5, 0.1, 0.05)]
    cl = build_clusters(soup_of(loops))
    assert cl.clusters == ((0, 1, 2, 3, 4), (5,))
    assert list(cl.labels) == [0, 0, 0, 0, 0, 5]


def test_touch_distance_merges_near_loops():
    a, b = circle_loop(0.3, 0.5, 0.1), circle_loop(0.51, 0.5, 0.1)
    assert not loops_intersect(a, b, 0.0)
    assert loops_intersect(a, b, 0.02) == loops_intersect_bruteforce(a, b, 0.02) is True
    assert len(build_clusters(soup_of([a, b]), 0.02)) == 1


@pytest.mark.parametrize("seed", range(8))
def test_clusters_match_bruteforce_on_random_soups(seed):
    soup = sample_soup(SoupConfig(Domain.unit_square(), 1.5, 0.01, 1.0, 1e-3, seed))
    fast, slow = build_clusters(soup), build_clusters_bruteforce(soup)
    assert same_partition(fast, slow)
    assert fast.graph.edges == slow.graph.edges


@pytest.mark.parametrize("seed", range(4))
def test_min_cluster_distance_matches_bruteforce(seed):
    soup = sample_soup(SoupConfig(Domain.unit_square(), 2.0, 0.005, 0.05, 1e-3, seed))
    cl = build_clusters(soup)
    if len(cl) < 2:
        pytest.skip("single cluster")
    d = min_cluster_distance(cl, soup)
    assert d == min_cluster_distance_bruteforce(cl, soup)
    assert d > 0


def test_min_distance_undefined_for_one_cluster():
    cl = build_clusters(soup_of([circle_loop(0.5, 0.5, 0.1)]))
    with pytest.raises(UndefinedDistanceError):
        min_cluster_distance(cl, soup_of([circle_loop(0.5, 0.5, 0.1)]))


def test_min_distance_known_value():
    loops = [square_loop(0.1, 0.1, 0.2), square_loop(0.5, 0.1, 0.2)]
    soup = soup_of(loops)
    assert min_cluster_distance(build_clusters(soup), soup) == pytest.approx(0.2, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(0.15, 0.85), st.floats(0.15, 0.85), st.floats(0.02, 0.14)), min_size=1, max_size=12))
def test_partition_is_invariant_under_loop_relabelling(circles):
    loops = [circle_loop(x, y, r, 40) for x, y, r in circles]
    cl = build_clusters(soup_of(loops))
    perm = list(reversed(range(len(loops))))
    cl2 = build_clusters(soup_of([loops[i] for i in perm]))
    as_sets = lambda c, idx: {frozenset(idx[i] for i in g) for g in c.clusters}
    assert as_sets(cl, list(range(len(loops)))) == as_sets(cl2, perm)
    # every edge is a genuine intersection, and circles that overlap in area but not in trace stay apart
    for i, j in cl.graph.edges:
        assert LineString(loops[i].points).intersects(LineString(loops[j].points))


def test_cluster_records_and_table():
    loops = [square_loop(0.1, 0.1, 0.2), square_loop(0.2, 0.2, 0.2), circle_loop(0.7, 0.7, 0.1)]
    soup = soup_of(loops)
    cl = build_clusters(soup)
    recs = cluster_records(cl, soup)
    assert [r["size"] for r in recs] == [2, 1]
    assert recs[0]["xmin"] == pytest.approx(0.1) and recs[0]["xmax"] == pytest.approx(0.4)
    assert math.isclose(recs[0]["total_duration"], loops[0].duration + loops[1].duration)
    assert cluster_table(cl, soup).count("\n") == 2
