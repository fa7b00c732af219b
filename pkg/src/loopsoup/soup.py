"""Poissonian Brownian loop soups in bounded planar domains.

Normalization: the rooted loop measure is ``c * dA(z) * dt / (2 pi t^2)``
times the law of a planar Brownian bridge of duration ``t`` from ``z`` to
``z``, with standard Brownian motion (variance ``t`` per coordinate). The
critical-intensity statements about soups refer to this normalization; a
different convention for ``c`` rescales them.

Durations are truncated to ``[t_min, t_max]``. A sampled soup is the Poisson
process restricted to that window and to loops whose polyline vertices all
lie inside the domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln

from loopsoup import rng as rngmod
from loopsoup.domain import Domain
from loopsoup.errors import ConfigError, DomainError

MIN_POINTS = 64


@dataclass(frozen=True, eq=False)
class Loop:
    """A closed polyline; ``points[0]`` and ``points[-1]`` both equal ``root``."""

    root: tuple[float, float]
    duration: float
    points: np.ndarray
    bbox: tuple[float, float, float, float] = field(default=None)

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
            raise ValueError("a loop needs an (n, 2) point array with n >= 3")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "root", (float(self.root[0]), float(self.root[1])))
        if self.bbox is None:
            lo = pts.min(axis=0)
            hi = pts.max(axis=0)
            object.__setattr__(self, "bbox", (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])))

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Loop):
            return NotImplemented
        return (
            self.root == other.root
            and self.duration == other.duration
            and np.array_equal(self.points, other.points)
        )

    __hash__ = None


@dataclass(frozen=True)
class SoupConfig:
    domain: Domain = field(default_factory=Domain.unit_square)
    intensity_c: float = 1.0
    t_min: float = 0.01
    t_max: float = 1.0
    step_scale: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if not self.intensity_c >= 0:
            raise ConfigError(f"intensity_c must be >= 0, got {self.intensity_c}")
        if not (self.t_min > 0 and self.t_max > 0):
            raise ConfigError("duration cutoffs must be positive")
        if not self.t_min < self.t_max:
            raise ConfigError(f"t_min ({self.t_min}) must be below t_max ({self.t_max})")
        if not self.step_scale > 0:
            raise ConfigError("step_scale must be positive")
        if not 0 <= int(self.seed) < 1 << 64:
            raise ConfigError("seed must fit in 64 bits")

    def points_for(self, duration: float) -> int:
        return max(MIN_POINTS, math.ceil(duration / self.step_scale))

    def to_dict(self) -> dict:
        return {
            "domain": self.domain.to_dict(),
            "intensity_c": self.intensity_c,
            "t_min": self.t_min,
            "t_max": self.t_max,
            "step_scale": self.step_scale,
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, d: dict) -> SoupConfig:
        known = {"domain", "intensity_c", "t_min", "t_max", "step_scale", "seed"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown soup field(s): {', '.join(sorted(unknown))}")
        kw = {k: float(d[k]) for k in ("intensity_c", "t_min", "t_max", "step_scale") if k in d}
        if "seed" in d:
            kw["seed"] = int(d["seed"])
        if "domain" in d:
            kw["domain"] = Domain.from_dict(d["domain"])
        return cls(**kw)


@dataclass(frozen=True)
class LoopSoup:
    config: SoupConfig
    loops: tuple[Loop, ...]
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "loops", tuple(self.loops))

    def __len__(self) -> int:
        return len(self.loops)

    def __iter__(self):
        return iter(self.loops)

    @property
    def durations(self) -> np.ndarray:
        return np.array([lp.duration for lp in self.loops])


def expected_loop_count(config: SoupConfig) -> float:
    """Mean number of candidate loops, before rejecting loops that leave the domain.

    It is an upper bound for the mean of the accepted count.
    """
    if not config.t_min < config.t_max:
        raise ConfigError("t_min must be below t_max")
    window = 1.0 / config.t_min - 1.0 / config.t_max
    return config.intensity_c * config.domain.bbox_area * window / (2.0 * math.pi)


def sample_duration(u, t_min: float, t_max: float):
    """Inverse CDF of the density proportional to 1/t^2 on [t_min, t_max]."""
    return 1.0 / (1.0 / t_min - u * (1.0 / t_min - 1.0 / t_max))


def sample_brownian_bridge_loop(root, duration: float, n_points: int, rng: np.random.Generator) -> Loop:
    """Discretized planar Brownian bridge of the given duration from ``root`` back to ``root``."""
    if not duration > 0:
        raise ValueError("duration must be positive")
    if n_points < 3:
        raise ValueError("a loop needs at least 3 points")
    steps = n_points - 1
    incr = rng.standard_normal((steps, 2)) * math.sqrt(duration / steps)
    walk = np.zeros((n_points, 2))
    np.cumsum(incr, axis=0, out=walk[1:])
    frac = np.arange(n_points, dtype=np.float64) / steps
    walk -= frac[:, None] * walk[-1]
    walk += np.asarray(root, dtype=np.float64)
    walk[0] = root
    walk[-1] = root
    return Loop(root=tuple(root), duration=float(duration), points=walk)


def _candidate(config: SoupConfig, index: int):
    g = rngmod.stream(config.seed, rngmod.SOUP_LOOP, index)
    xmin, ymin, xmax, ymax = config.domain.bbox
    u = g.random(3)
    root = (xmin + u[0] * (xmax - xmin), ymin + u[1] * (ymax - ymin))
    t = float(sample_duration(u[2], config.t_min, config.t_max))
    return sample_brownian_bridge_loop(root, t, config.points_for(t), g)


def candidate_count(config: SoupConfig) -> int:
    g = rngmod.stream(config.seed, rngmod.SOUP_COUNT)
    return int(g.poisson(expected_loop_count(config)))


def sample_soup(config: SoupConfig) -> LoopSoup:
    """Sample the soup; candidate ``i`` draws from its own stream keyed by ``(seed, i)``."""
    n = candidate_count(config)
    dom = config.domain
    loops = []
    for i in range(n):
        lp = _candidate(config, i)
        if dom.contains_all(lp.points):
            loops.append(lp)
    return LoopSoup(config, tuple(loops))


def restrict_soup(soup: LoopSoup, sub: Domain) -> LoopSoup:
    """Keep the loops whose vertices all lie in ``sub``."""
    if not soup.config.domain.contains_domain(sub):
        raise DomainError(f"{sub} is not contained in {soup.config.domain}")
    kept = tuple(lp for lp in soup.loops if sub.contains_all(lp.points))
    return LoopSoup(replace(soup.config, domain=sub), kept, soup.warnings)


def superpose(a: LoopSoup, b: LoopSoup) -> LoopSoup:
    """Union of two independent soups in the same domain.

    Equal duration windows add intensities. Equal intensities with adjacent
    windows (``b.t_max == a.t_min``) widen the window downward. The result
    keeps ``a``'s seed, so it is not reproducible from its config alone.
    """
    ca, cb = a.config, b.config
    if ca.domain != cb.domain:
        raise DomainError("cannot superpose soups from different domains")
    if ca.t_min == cb.t_min and ca.t_max == cb.t_max:
        cfg = replace(ca, intensity_c=ca.intensity_c + cb.intensity_c)
    elif ca.intensity_c == cb.intensity_c and cb.t_max == ca.t_min:
        cfg = replace(ca, t_min=cb.t_min)
    else:
        raise ConfigError("soups must share cutoffs, or share c with adjacent duration windows")
    return LoopSoup(cfg, a.loops + b.loops, a.warnings + b.warnings)


def grow_soup(config: SoupConfig, c_values) -> list[LoopSoup]:
    """Monotonically coupled soups at increasing intensities.

    The soup at ``c_values[k]`` is the one at ``c_values[k-1]`` plus an
    independent increment of intensity ``c_values[k] - c_values[k-1]``.
    """
    out = []
    current = LoopSoup(replace(config, intensity_c=0.0), ())
    prev = 0.0
    for k, c in enumerate(c_values):
        if c < prev:
            raise ConfigError("c_values must be non-decreasing")
        if c > prev:
            inc_cfg = replace(
                config,
                intensity_c=c - prev,
                seed=rngmod.derive_seed(config.seed, rngmod.SUBSOUP, k),
            )
            inc = sample_soup(inc_cfg)
            current = LoopSoup(replace(config, intensity_c=c), current.loops + inc.loops)
        out.append(current)
        prev = c
    return out


def extend_cutoff(soup: LoopSoup, t_min: float) -> LoopSoup:
    """Add the loops with durations in ``[t_min, soup.t_min]`` from an independent stream."""
    cfg = soup.config
    if not t_min < cfg.t_min:
        raise ConfigError("new t_min must be below the current one")
    extra_cfg = replace(
        cfg,
        t_min=t_min,
        t_max=cfg.t_min,
        seed=rngmod.derive_seed(cfg.seed, rngmod.SUBSOUP, 1 << 20),
    )
    return superpose(soup, sample_soup(extra_cfg))


# lattice random-walk soup -------------------------------------------------

def rooted_loop_mass(length: int) -> float:
    """Rooted random-walk loop measure at one site for loops of ``length`` steps.

    ``C(2k,k)^2`` closed walks of length ``2k``, each weighted ``4^-2k / 2k``;
    the ``1/length`` factor turns rooted counts into unrooted loop classes.
    """
    if length % 2:
        return 0.0
    k = length // 2
    log_walks = 2 * (gammaln(2 * k + 1) - 2 * gammaln(k + 1))
    return math.exp(log_walks - length * math.log(4.0)) / length


def _uniform_closed_walk(k: int, g: np.random.Generator) -> np.ndarray:
    # rotated coordinates u = x + y, v = x - y are independent +-1 bridges
    base = np.concatenate([np.ones(k, np.int64), -np.ones(k, np.int64)])
    du = g.permutation(base)
    dv = g.permutation(base)
    steps = np.empty((2 * k, 2), np.int64)
    steps[:, 0] = (du + dv) // 2
    steps[:, 1] = (du - dv) // 2
    return steps


def sample_rw_loop_soup(lattice_step: float, config: SoupConfig, max_length: int | None = None) -> LoopSoup:
    """Random-walk loop soup on the square lattice of mesh ``lattice_step``.

    A walk of ``L`` steps stands for Brownian time ``L * lattice_step^2 / 2``,
    so the duration window maps to an even length window, never below 4
    steps. For every length, the number of rooted loops at each site is
    Poisson with mean ``c * rooted_loop_mass(L)``; loops leaving the domain
    are discarded.
    """
    if not lattice_step > 0:
        raise ConfigError("lattice_step must be positive")
    d2 = lattice_step * lattice_step
    lo = max(4, 2 * math.ceil(config.t_min / d2))
    hi = 2 * math.floor(config.t_max / d2)
    if max_length is not None:
        hi = min(hi, int(max_length))
    hi -= hi % 2
    if hi < 4:
        return LoopSoup(config, (), ("max_length below 4: no lattice loop fits",))
    if config.intensity_c == 0:
        return LoopSoup(config, ())

    dom = config.domain
    xmin, ymin, xmax, ymax = dom.bbox
    ix = np.arange(math.floor(xmin / lattice_step), math.ceil(xmax / lattice_step) + 1)
    iy = np.arange(math.floor(ymin / lattice_step), math.ceil(ymax / lattice_step) + 1)
    gx, gy = np.meshgrid(ix, iy, indexing="xy")
    sites = np.column_stack([gx.ravel(), gy.ravel()])
    sites = sites[dom.contains(sites * lattice_step)]
    n_sites = len(sites)
    loops = []
    for length in range(lo, hi + 1, 2):
        g = rngmod.stream(config.seed, rngmod.LATTICE, length)
        n = int(g.poisson(config.intensity_c * rooted_loop_mass(length) * n_sites))
        if n == 0:
            continue
        roots = sites[g.integers(0, n_sites, size=n)]
        for r in roots:
            steps = _uniform_closed_walk(length // 2, g)
            path = np.empty((length + 1, 2), np.int64)
            path[0] = r
            np.cumsum(steps, axis=0, out=path[1:])
            path[1:] += r
            pts = path * lattice_step
            if dom.contains_all(pts):
                root = (float(pts[0, 0]), float(pts[0, 1]))
                loops.append(Loop(root=root, duration=length * d2 / 2.0, points=pts))
    return LoopSoup(config, tuple(loops))
