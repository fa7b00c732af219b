import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from loopsoup import soupio
from loopsoup.domain import Domain
from loopsoup.errors import ConfigError, DomainError
from loopsoup.soup import (
    SoupConfig,
    expected_loop_count,
    extend_cutoff,
    grow_soup,
    restrict_soup,
    rooted_loop_mass,
    sample_brownian_bridge_loop,
    sample_duration,
    sample_rw_loop_soup,
    sample_soup,
    superpose,
)


# expected_loop_count -------------------------------------------------------

def test_expected_count_zero_intensity():
    assert expected_loop_count(SoupConfig(intensity_c=0.0)) == 0.0


def test_expected_count_unit_square_value():
    cfg = SoupConfig(Domain.unit_square(), 1.0, 0.01, 1.0)
    # (1/0.01 - 1/1) / (2 pi), written out independently
    assert expected_loop_count(cfg) == pytest.approx(99.0 / (2.0 * math.pi), rel=1e-15)
    assert expected_loop_count(cfg) == pytest.approx(15.756339366, abs=1e-9)


@given(st.floats(0.01, 10.0))
def test_expected_count_linear_in_c(c):
    a = expected_loop_count(SoupConfig(intensity_c=c))
    b = expected_loop_count(SoupConfig(intensity_c=2 * c))
    assert b == 2 * a


def test_bad_cutoffs_rejected():
    with pytest.raises(ConfigError):
        SoupConfig(t_min=1.0, t_max=0.5)
    with pytest.raises(ConfigError):
        SoupConfig(intensity_c=-1.0)
    with pytest.raises(ConfigError):
        SoupConfig(step_scale=0.0)


def test_duration_inverse_cdf_endpoints_and_law():
    assert sample_duration(0.0, 0.01, 1.0) == pytest.approx(0.01)
    assert sample_duration(1.0, 0.01, 1.0) == pytest.approx(1.0)
    u = np.random.default_rng(0).random(20000)
    t = sample_duration(u, 0.01, 1.0)
    # CDF of density ~ 1/t^2 on [a, b]: (1/a - 1/t) / (1/a - 1/b)
    cdf = lambda x: np.clip((100.0 - 1.0 / x) / 99.0, 0, 1)
    assert stats.kstest(t, cdf).pvalue > 0.01


# bridge loops ----------------------------------------------------------------

def test_three_point_loop_closes():
    lp = sample_brownian_bridge_loop((0.3, 0.4), 1.0, 3, np.random.default_rng(1))
    assert lp.points.shape == (3, 2)
    assert tuple(lp.points[0]) == (0.3, 0.4) == tuple(lp.points[2])


def test_bridge_midpoint_variance():
    g = np.random.default_rng(2)
    mids = np.array([sample_brownian_bridge_loop((0, 0), 1.0, 1025, g).points[512] for _ in range(10_000)])
    var = mids.var(axis=0, ddof=1)
    se = 0.25 * math.sqrt(2.0 / (len(mids) - 1))
    assert np.all(np.abs(var - 0.25) < 3 * se)


def test_bridge_scaling_mean_square_radius():
    g = np.random.default_rng(3)

    def msr(t):
        out = []
        for _ in range(10_000):
            p = sample_brownian_bridge_loop((0, 0), t, 129, g).points[:-1]
            out.append(((p - p.mean(axis=0)) ** 2).sum(axis=1).mean())
        return np.array(out)

    a, b = msr(1.0), msr(4.0)
    ratio = b.mean() / a.mean()
    se = ratio * math.sqrt((a.std() / a.mean()) ** 2 / len(a) + (b.std() / b.mean()) ** 2 / len(b))
    assert abs(ratio - 4.0) < 3 * se


def test_bridge_rejects_bad_input():
    with pytest.raises(ValueError):
        sample_brownian_bridge_loop((0, 0), 0.0, 10, np.random.default_rng(0))
    with pytest.raises(ValueError):
        sample_brownian_bridge_loop((0, 0), 1.0, 2, np.random.default_rng(0))


# sample_soup ------------------------------------------------------------------

def test_zero_intensity_soup_is_empty():
    assert len(sample_soup(SoupConfig(intensity_c=0.0))) == 0


@pytest.mark.parametrize("domain", [Domain.unit_square(), Domain.unit_disk(), Domain.rectangle(2.0, 0.5),
                                    Domain.half_plane_box(2.0, 1.0)])
def test_loops_closed_and_contained(domain):
    soup = sample_soup(SoupConfig(domain, 2.0, 0.005, 1.0, 1e-3, 5))
    assert len(soup) > 0
    for lp in soup.loops:
        assert np.array_equal(lp.points[0], lp.points[-1])
        assert tuple(lp.points[0]) == lp.root
        assert domain.contains_all(lp.points)
        x0, y0, x1, y1 = lp.bbox
        assert lp.points[:, 0].min() >= x0 and lp.points[:, 0].max() <= x1
        assert lp.points[:, 1].min() >= y0 and lp.points[:, 1].max() <= y1


def test_soup_deterministic_bytes(small_config):
    a = soupio.dumps_binary(sample_soup(small_config))
    b = soupio.dumps_binary(sample_soup(small_config))
    assert a == b
    other = soupio.dumps_binary(sample_soup(SoupConfig(**{**small_config.__dict__, "seed": 12})))
    assert a != other


def test_points_per_loop_rule():
    cfg = SoupConfig(step_scale=1e-3)
    assert cfg.points_for(0.01) == 64
    assert cfg.points_for(0.5) == 500
    assert cfg.points_for(0.5001) == 501


def _acceptance_oracle(n_candidates, t_min, t_max, step_scale, seed):
    """Independent re-implementation: sample candidates with numpy's default generator."""
    g = np.random.default_rng(seed)
    acc = 0
    for _ in range(n_candidates):
        x, y, u = g.random(3)
        t = 1.0 / (1.0 / t_min - u * (1.0 / t_min - 1.0 / t_max))
        n = max(64, math.ceil(t / step_scale))
        inc = g.normal(0.0, math.sqrt(t / (n - 1)), size=(n - 1, 2))
        w = np.vstack([[0.0, 0.0], np.cumsum(inc, axis=0)])
        w -= np.linspace(0, 1, n)[:, None] * w[-1]
        px, py = w[:, 0] + x, w[:, 1] + y
        acc += bool(np.all((px > 0) & (px < 1) & (py > 0) & (py < 1)))
    return acc / n_candidates


@pytest.mark.slow
def test_mean_accepted_count_matches_two_stage_oracle():
    cfg = SoupConfig(Domain.unit_square(), 0.5, 0.01, 1.0, 1e-3, 0)
    counts = np.array([len(sample_soup(SoupConfig(cfg.domain, 0.5, 0.01, 1.0, 1e-3, s))) for s in range(200)])
    p = _acceptance_oracle(100_000, 0.01, 1.0, 1e-3, 99)
    oracle = p * expected_loop_count(cfg)
    se = math.sqrt(counts.var(ddof=1) / len(counts) + (expected_loop_count(cfg) ** 2) * p * (1 - p) / 100_000)
    assert abs(counts.mean() - oracle) < 3 * se


def test_poisson_marginal_variance_equals_mean():
    counts = np.array([len(sample_soup(SoupConfig(Domain.unit_square(), 0.5, 0.02, 1.0, 1e-3, s))) for s in range(500)])
    m, v = counts.mean(), counts.var(ddof=1)
    # s.e. of the sample variance for a Poisson law with mean m
    se = math.sqrt((m + 2 * m * m) / len(counts))
    assert abs(v - m) < 3 * se


# restriction and superposition -----------------------------------------------

def test_restrict_to_full_domain_is_identity(small_config):
    soup = sample_soup(small_config)
    r = restrict_soup(soup, Domain.unit_square())
    assert r.loops == soup.loops


def test_restrict_to_tiny_region_is_empty(small_config):
    soup = sample_soup(small_config)
    r = restrict_soup(soup, Domain.rectangle(1e-6, 1e-6, (0.5, 0.5)))
    assert len(r) == 0


def test_restrict_outside_parent_raises(small_config):
    soup = sample_soup(small_config)
    with pytest.raises(DomainError):
        restrict_soup(soup, Domain.rectangle(2.0, 1.0))


def test_superpose_adds_intensity(small_config):
    a = sample_soup(small_config)
    b = sample_soup(SoupConfig(small_config.domain, 1.0, 0.02, 1.0, 1e-3, 99))
    u = superpose(a, b)
    assert u.config.intensity_c == 2.0
    assert len(u) == len(a) + len(b)


def test_grow_soup_is_monotone(small_config):
    soups = grow_soup(small_config, [0.0, 0.5, 1.0, 2.0])
    assert len(soups[0]) == 0
    for s0, s1 in zip(soups, soups[1:]):
        assert s1.loops[: len(s0)] == s0.loops
    with pytest.raises(ConfigError):
        grow_soup(small_config, [1.0, 0.5])


def test_extend_cutoff_keeps_coarse_loops(small_config):
    soup = sample_soup(small_config)
    fine = extend_cutoff(soup, 0.01)
    assert fine.loops[: len(soup)] == soup.loops
    assert fine.config.t_min == 0.01
    assert all(0.01 <= lp.duration <= 0.02 for lp in fine.loops[len(soup):])


# lattice soup ----------------------------------------------------------------

def _enumerate_rooted_mass(length):
    steps = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    closed = sum(1 for w in itertools.product(steps, repeat=length) if sum(s[0] for s in w) == 0 and sum(s[1] for s in w) == 0)
    return closed * 0.25**length / length


@pytest.mark.parametrize("length", [2, 4, 6, 8])
def test_rooted_mass_matches_enumeration(length):
    assert rooted_loop_mass(length) == pytest.approx(_enumerate_rooted_mass(length), rel=1e-12)


def test_length_four_mass_value():
    # 36 closed 4-step walks at a site, weight 4^-4 each, 1/4 for the rooting
    assert rooted_loop_mass(4) == pytest.approx(0.03515625, rel=1e-15)
    assert rooted_loop_mass(5) == 0.0


def test_lattice_zero_intensity_empty():
    soup = sample_rw_loop_soup(0.01, SoupConfig(intensity_c=0.0, t_min=0.001, t_max=0.01))
    assert len(soup) == 0 and soup.warnings == ()


def test_lattice_too_short_flags_warning():
    soup = sample_rw_loop_soup(0.01, SoupConfig(intensity_c=1.0, t_min=0.001, t_max=0.01), max_length=2)
    assert len(soup) == 0 and soup.warnings


def test_lattice_loops_closed_and_on_lattice():
    soup = sample_rw_loop_soup(0.02, SoupConfig(intensity_c=1.0, t_min=0.004, t_max=0.05, seed=4))
    assert len(soup) > 0
    for lp in soup.loops:
        assert np.array_equal(lp.points[0], lp.points[-1])
        steps = np.abs(np.diff(np.rint(lp.points / 0.02), axis=0)).sum(axis=1)
        assert np.all(steps == 1)
        assert lp.duration == pytest.approx((lp.n_points - 1) * 0.02**2 / 2)


def test_lattice_length_four_count_per_site():
    """Mean number of length-4 loops over many soups matches c * mass * sites."""
    cfg = SoupConfig(Domain.unit_square(), 2.0, 0.02**2 * 2 - 1e-12, 0.02**2 * 2 + 1e-12, 1e-3, 0)
    counts = []
    for s in range(200):
        soup = sample_rw_loop_soup(0.02, SoupConfig(cfg.domain, 2.0, cfg.t_min, cfg.t_max, 1e-3, s))
        counts.append(sum(1 for lp in soup.loops if lp.n_points == 5))
    sites = 49 * 49
    # roots within one step of the frame can leave the open square
    expected_hi = 2.0 * 0.03515625 * sites
    assert np.mean(counts) < expected_hi
    assert np.mean(counts) > 0.8 * expected_hi


@pytest.mark.slow
def test_lattice_and_continuum_clusters_merge_as_c_grows():
    """Both samplers: more intensity means fewer, larger clusters on average."""
    from loopsoup.clusters import build_clusters

    dom = Domain.unit_square()
    for sampler in (sample_soup, lambda cfg: sample_rw_loop_soup(0.01, cfg)):
        per_c = []
        for c in (0.5, 4.0):
            sizes = []
            for s in range(30):
                cl = build_clusters(sampler(SoupConfig(dom, c, 0.002, 0.05, 2.5e-4, s)))
                n_loops = len(cl.labels)
                sizes.append(n_loops / max(len(cl), 1))
            per_c.append(np.mean(sizes))
        assert per_c[1] > per_c[0]


# serialization --------------------------------------------------------------

@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.0, 3.0))
def test_text_and_binary_round_trip(seed, c):
    soup = sample_soup(SoupConfig(Domain.unit_square(), c, 0.02, 1.0, 1e-3, seed))
    for dump, load in ((soupio.dumps_text, soupio.loads_text), (soupio.dumps_binary, soupio.loads_binary)):
        back = load(dump(soup))
        assert back.config == soup.config
        assert back.loops == soup.loops
        assert dump(back) == dump(soup)


def test_files_round_trip(tmp_path, small_config):
    soup = sample_soup(small_config)
    for binary in (False, True):
        p = tmp_path / f"s{int(binary)}"
        soupio.save(soup, p, binary=binary, meta={"manifest_sha256": "x"})
        assert soupio.load(p).loops == soup.loops
