"""Chordal SLE(kappa) and SLE(kappa, rho) traces from discretized Loewner evolution.

Loewner flow ``dg/dt = 2 / (g - W_t)``. On each capacity step ``d`` the
driving function is frozen at the step's end value ``w``, and the step is
the vertical slit map whose inverse is

    f(z) = w + sqrt((z - w)^2 - 4 d).

The trace is ``gamma(t_k) = f_1 o ... o f_k (w_k)``. Evaluating it naively
costs O(N^2); the default solver groups consecutive maps into a tree of
blocks and replaces a block by a truncated Laurent series whenever the
evaluation point is far from the block's singular interval.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from loopsoup import rng as rngmod
from loopsoup.errors import BranchError, ConfigError, StepFailureError
from loopsoup.fractal import DimensionEstimate, box_counting_dimension, default_scales

FORCE_OFFSET = 1e-6
MAX_HALVINGS = 20


@dataclass(frozen=True)
class DrivingPath:
    times: np.ndarray
    values: np.ndarray
    kappa: float
    rho: float | None = None
    force_point: float | None = None
    force_values: np.ndarray | None = None
    reflections: int = 0

    def __post_init__(self):
        t = np.asarray(self.times, float)
        v = np.asarray(self.values, float)
        if t.shape != v.shape or t.ndim != 1 or len(t) < 2:
            raise ConfigError("times and values must be equal-length 1-d arrays")
        if t[0] != 0.0 or v[0] != 0.0:
            raise ConfigError("driving paths start at time 0 with W(0) = 0")
        if np.any(np.diff(t) <= 0):
            raise ConfigError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1


@dataclass(frozen=True)
class SleTrace:
    z: np.ndarray
    driving: DrivingPath
    capacity_step: float

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.z.real, self.z.imag])

    def __len__(self) -> int:
        return len(self.z)


# driving functions ------------------------------------------------------------

@njit(cache=True)
def _kappa_rho_path(kappa, rho, dt, z_main, o_start, sub_seed, max_halvings):
    np.random.seed(sub_seed)
    n = z_main.shape[0]
    cap = 2 * n + 64
    times = np.empty(cap)
    ws = np.empty(cap)
    os_ = np.empty(cap)
    times[0] = 0.0
    ws[0] = 0.0
    os_[0] = o_start
    m = 1
    t = 0.0
    w = 0.0
    o = o_start
    n_reflect = 0
    sk = math.sqrt(kappa)
    st_h = np.empty(4 * max_halvings + 8)
    st_b = np.empty(4 * max_halvings + 8)
    st_l = np.empty(4 * max_halvings + 8, np.int64)
    for i in range(n):
        sp = 0
        st_h[0] = dt
        st_b[0] = math.sqrt(dt) * z_main[i]
        st_l[0] = 0
        sp = 1
        while sp > 0:
            sp -= 1
            h = st_h[sp]
            db = st_b[sp]
            lev = st_l[sp]
            x = w - o
            wn = w + sk * db + rho * h / x
            on = o + 2.0 * h / (o - w)
            flip = (wn - on) * x <= 0.0
            if (flip or abs(x) < math.sqrt(h)) and lev < max_halvings:
                # Levy midpoint refinement keeps the Brownian path consistent
                db1 = 0.5 * db + math.sqrt(h / 4.0) * np.random.standard_normal()
                st_h[sp] = 0.5 * h
                st_b[sp] = db - db1
                st_l[sp] = lev + 1
                st_h[sp + 1] = 0.5 * h
                st_b[sp + 1] = db1
                st_l[sp + 1] = lev + 1
                sp += 2
                continue
            if flip:
                # floor reached: reflect the gap so W stays on its side of O
                wn = on + abs(wn - on) * (1.0 if x > 0.0 else -1.0)
                n_reflect += 1
            if not (math.isfinite(wn) and math.isfinite(on)):
                return times[:m], ws[:m], os_[:m], t, n_reflect
            w = wn
            o = on
            t += h
            if m >= cap:
                cap2 = 2 * cap
                nt = np.empty(cap2)
                nw = np.empty(cap2)
                no = np.empty(cap2)
                nt[:m] = times[:m]
                nw[:m] = ws[:m]
                no[:m] = os_[:m]
                times, ws, os_, cap = nt, nw, no, cap2
            times[m] = t
            ws[m] = w
            os_[m] = o
            m += 1
    return times[:m], ws[:m], os_[:m], -1.0, n_reflect


def sample_driving(kappa: float, rho: float | None, horizon: float, dt: float, seed: int) -> DrivingPath:
    """Driving function on [0, horizon].

    Without ``rho``: Brownian motion with variance ``kappa t``. With ``rho``:
    Euler steps of ``dW = sqrt(kappa) dB + rho dt / (W - O)``,
    ``dO = 2 dt / (O - W)`` with ``O(0) = -1e-6``. A step is halved (with a
    Brownian-bridge split of its increment) while ``|W - O| < sqrt(dt)`` or
    while it would carry ``W`` across ``O``. After 20 halvings a step that
    still crosses is reflected (counted in ``reflections``); a non-finite
    value raises :class:`StepFailureError`.
    """
    if not kappa >= 0:
        raise ConfigError("kappa must be non-negative")
    if not (dt > 0 and horizon > 0):
        raise ConfigError("dt and horizon must be positive")
    n = max(1, round(horizon / dt))
    g = rngmod.stream(seed, rngmod.DRIVING)
    z = g.standard_normal(n)
    if rho is None:
        w = np.concatenate([[0.0], np.cumsum(z * math.sqrt(kappa * dt))])
        return DrivingPath(np.arange(n + 1) * dt, w, kappa)
    if not rho > -2:
        raise ConfigError("rho must exceed -2")
    sub = int(g.integers(0, 2**31 - 1))
    t, w, o, fail, n_ref = _kappa_rho_path(float(kappa), float(rho), float(dt), z, -FORCE_OFFSET, sub, MAX_HALVINGS)
    if fail >= 0:
        raise StepFailureError(f"driving blew up after {MAX_HALVINGS} halvings", fail)
    return DrivingPath(t, w, kappa, float(rho), -FORCE_OFFSET, o, int(n_ref))


def constant_driving(horizon: float, n: int, value: float = 0.0) -> DrivingPath:
    t = np.linspace(0.0, horizon, n + 1)
    w = np.full(n + 1, value)
    w[0] = 0.0
    return DrivingPath(t, w, 0.0)


def driving_from_function(fn, horizon: float, n: int) -> DrivingPath:
    t = np.linspace(0.0, horizon, n + 1)
    w = np.array([fn(x) for x in t], float)
    w -= w[0]
    return DrivingPath(t, w, 0.0)


# Loewner maps -----------------------------------------------------------------

@njit(cache=True)
def _slit_inverse(z, w, d):
    """f(z) = w + sqrt((z - w)^2 - 4d), continued analytically off the slit base."""
    u = z - w
    if u == 0:
        return complex(w, 2.0 * math.sqrt(d))
    s = u * cmath.sqrt(1.0 - 4.0 * d / (u * u))
    if z.imag >= 0.0 and s.imag < 0.0:
        s = -s
    return w + s


@njit(cache=True)
def _slit_forward(z, w, d):
    """g(z) = w + sqrt((z - w)^2 + 4d) with Im g >= 0 on the closed upper half plane."""
    u = z - w
    s = cmath.sqrt(u * u + 4.0 * d)
    if s.imag < 0.0 or (s.imag == 0.0 and (s.real > 0.0) != (u.real > 0.0)):
        s = -s
    return w + s


@njit(cache=True)
def _trace_direct(w, d):
    n = w.shape[0]
    out = np.empty(n, np.complex128)
    for k in range(n):
        z = complex(w[k], 2.0 * math.sqrt(d[k]))
        for j in range(k - 1, -1, -1):
            z = _slit_inverse(z, w[j], d[j])
        out[k] = z
    return out


@njit(cache=True)
def _apply(z, st_l, st_i, sp, w, d, B, offs, cen, rad, coef, far):
    P = coef.shape[1]
    while sp > 0:
        sp -= 1
        L = st_l[sp]
        i = st_i[sp]
        if L == 0:
            z = _slit_inverse(z, w[i], d[i])
            continue
        idx = offs[L] + i
        u = z - cen[idx]
        if abs(u) > far * rad[idx]:
            q = 1.0 / u
            acc = 0j
            for n in range(P - 1, -1, -1):
                acc = (acc + coef[idx, n]) * q
            z = z + acc
        else:
            base = i * B
            for m in range(B):
                st_l[sp] = L - 1
                st_i[sp] = base + m
                sp += 1
    return z


@njit(cache=True)
def _trace_blocked(w, d, B, P, M, far, sample_radius, stop):
    n = w.shape[0]
    out = np.empty(n, np.complex128)
    lmax = 0
    span = 1
    while span * B <= n:
        span *= B
        lmax += 1
    pw = np.ones(lmax + 2, np.int64)
    for L in range(1, lmax + 2):
        pw[L] = pw[L - 1] * B
    offs = np.zeros(lmax + 2, np.int64)
    for L in range(1, lmax + 1):
        offs[L + 1] = offs[L] + n // pw[L] + 1
    n_nodes = max(offs[lmax + 1], 1)
    cen = np.zeros(n_nodes)
    rad = np.zeros(n_nodes)
    coef = np.zeros((n_nodes, P), np.complex128)
    st_l = np.empty(4 * B * (lmax + 2) + 16, np.int64)
    st_i = np.empty(4 * B * (lmax + 2) + 16, np.int64)
    thetas = 2.0 * math.pi * np.arange(M) / M
    for k in range(n):
        # tip of slit k, pushed back through maps 0..k-1
        p = k
        sp = 0
        for L in range(lmax, -1, -1):
            lo = 0 if L == lmax else (p // pw[L + 1]) * B
            hi = p // pw[L]
            for i in range(lo, hi):
                st_l[sp] = L
                st_i[sp] = i
                sp += 1
        z = complex(w[k], 2.0 * math.sqrt(d[k]))
        out[k] = _apply(z, st_l, st_i, sp, w, d, B, offs, cen, rad, coef, far)
        zk = out[k]
        if zk.real <= stop[0] or zk.real >= stop[2] or zk.imag >= stop[3]:
            return out[: k + 1]
        # close every block that map k completes
        for L in range(1, lmax + 1):
            if (k + 1) % pw[L] != 0:
                break
            i = (k + 1) // pw[L] - 1
            s = i * pw[L]
            e = s + pw[L]
            sq = 2.0 * math.sqrt(d[s])
            a = w[s] - sq
            b = w[s] + sq
            for m in range(s + 1, e):
                sq = 2.0 * math.sqrt(d[m])
                ha = _slit_forward(complex(a, 0.0), w[m], d[m]).real
                hb = _slit_forward(complex(b, 0.0), w[m], d[m]).real
                a = min(ha, w[m] - sq)
                b = max(hb, w[m] + sq)
            idx = offs[L] + i
            c = 0.5 * (a + b)
            r = 0.5 * (b - a)
            cen[idx] = c
            rad[idx] = r
            rs = sample_radius * r
            acc = np.zeros(P, np.complex128)
            for j in range(M):
                zz = complex(c + rs * math.cos(thetas[j]), rs * math.sin(thetas[j]))
                sp = 0
                for m in range(B):
                    st_l[sp] = L - 1
                    st_i[sp] = i * B + m
                    sp += 1
                g = _apply(zz, st_l, st_i, sp, w, d, B, offs, cen, rad, coef, far) - zz
                e_j = complex(math.cos(thetas[j]), math.sin(thetas[j]))
                ph = e_j
                for q in range(P):
                    acc[q] += g * ph
                    ph *= e_j
            scale = rs
            for q in range(P):
                coef[idx, q] = acc[q] / M * scale
                scale *= rs
    return out


@njit(cache=True)
def _unzip(z, w0):
    n = z.shape[0]
    pts = z.copy()
    w = np.empty(n)
    d = np.empty(n)
    for k in range(n):
        zk = pts[k]
        w[k] = zk.real
        d[k] = 0.25 * zk.imag * zk.imag
        for j in range(k + 1, n):
            pts[j] = _slit_forward(pts[j], w[k], d[k])
    return w, d


def loewner_trace(driving: DrivingPath, capacity_step: float | None = None, method: str = "blocked",
                  block: int = 16, order: int = 24, stop_box=None) -> SleTrace:
    """Trace points ``gamma(t_k)`` for every driving sample, starting at the origin.

    ``method="direct"`` composes all maps for every point (exact, O(N^2));
    ``"blocked"`` uses Laurent-series summaries of far-away blocks. With
    ``stop_box = (xmin, ymin, xmax, ymax)`` the blocked solver stops at the
    first point with x outside (xmin, xmax) or y >= ymax.
    """
    d = np.diff(driving.times)
    w = np.ascontiguousarray(driving.values[1:])
    if method == "direct":
        z = _trace_direct(w, d)
    elif method == "blocked":
        stop = np.array(stop_box if stop_box is not None else (-np.inf, -np.inf, np.inf, np.inf), float)
        z = _trace_blocked(w, d, block, order, 64, 4.0, 2.0, stop)
    else:
        raise ValueError(f"unknown method {method!r}")
    bad = np.flatnonzero(~np.isfinite(z) | (z.imag < -1e-9))
    if bad.size:
        raise BranchError(f"square-root branch failure at step {bad[0] + 1}", int(bad[0]) + 1)
    z = np.concatenate([[0j], z])
    if len(z) < len(driving.times):
        driving = DrivingPath(driving.times[: len(z)], driving.values[: len(z)], driving.kappa, driving.rho,
                              driving.force_point,
                              None if driving.force_values is None else driving.force_values[: len(z)],
                              driving.reflections)
    if capacity_step is None:
        capacity_step = float(d.mean())
    return SleTrace(z, driving, float(capacity_step))


def recover_driving(trace: SleTrace) -> DrivingPath:
    """Unzip the trace with vertical slit maps, returning the driving samples and times."""
    w, d = _unzip(np.ascontiguousarray(trace.z[1:]), 0.0)
    times = np.concatenate([[0.0], np.cumsum(d)])
    return DrivingPath(times, np.concatenate([[0.0], w]), trace.driving.kappa)


def sample_sle(kappa: float, horizon: float, n_steps: int, seed: int, rho: float | None = None,
               **kw) -> SleTrace:
    dt = horizon / n_steps
    drv = sample_driving(kappa, rho, horizon, dt, seed)
    return loewner_trace(drv, dt, **kw)


def trace_dimension(trace: SleTrace, scales=None, resolution: int = 1024) -> DimensionEstimate:
    """Box-counting dimension of the trace rasterized on a square grid around it."""
    from loopsoup.raster import RasterGrid, rasterize_polyline

    if len(trace) < 10_000:
        raise ConfigError("trace_dimension needs at least 10^4 trace points")
    pts = trace.points
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    side = float(max(hi - lo)) * (1 + 1e-6) or 1.0
    bbox = (lo[0], lo[1], lo[0] + side, lo[1] + side)
    grid = RasterGrid.for_box(bbox, resolution)
    mask = rasterize_polyline(pts, grid)
    if scales is None:
        scales = default_scales(mask.shape)
    return box_counting_dimension(mask, grid.cell_size, scales)
