"""Command line: ``loopsoup <kind> --config FILE [--seed --samples --out --threads --resolution]``.

Each run writes ``manifest.json`` (the resolved configuration, without the
thread count) next to its CSV/JSON/SVG artifacts; every artifact carries
the manifest's sha256. Wall-clock times go to ``run.log`` only.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from loopsoup import __version__, chordal, experiments, sle, soupio, svg
from loopsoup import rng as rngmod
from loopsoup.clusters import build_clusters, cluster_records, cluster_table, min_cluster_distance
from loopsoup.errors import ConfigError, LoopSoupError
from loopsoup.fractal import box_counting_dimension, default_scales, sierpinski_carpet
from loopsoup.raster import free_point_mask, trace_outer_boundary
from loopsoup.report import EXACT, STAT, Results, Table, conversion_table, emit_report, sha256_bytes
from loopsoup.soup import SoupConfig, expected_loop_count, sample_soup

KINDS = ("soup", "clusters", "boundaries", "dimensions", "percolation", "sle", "chordal")
EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

TOP_FIELDS = {"kind", "seed", "samples", "resolution", "out", "threads", "soup", "params"}

PARAM_DEFAULTS = {
    "soup": {"binary": False, "text": True, "svg": False},
    "clusters": {"touch_distance": 0.0},
    "boundaries": {"touch_distance": 0.0, "max_clusters": 10, "svg": False},
    "dimensions": {
        "source": "sierpinski",
        "level": 6,
        "t_min_fine": None,
        "duration": 1.0,
        "n_points": 65536,
        "n_largest": 10,
        "kappa": 3.0,
        "steps": 100000,
        "horizon": 1.0,
    },
    "percolation": {"c_grid": list(experiments.DEFAULT_C_GRID), "side": "left_right", "avoid": "trace"},
    "sle": {"kappa": 3.0, "rho": None, "horizon": 1.0, "steps": 10000, "dimension": False, "dump_trace": True},
    "chordal": {
        "kappa": 3.0,
        "alpha": None,
        "c": None,
        "box_width": 4.0,
        "box_height": 2.0,
        "t_min": 1e-3,
        "t_max": 1.0,
        "step_scale": 1e-4,
        "horizon": 3.0,
        "dt": 1e-4,
        "touch_distance": 0.0,
        "svg": False,
    },
}
DIMENSION_SOURCES = ("sierpinski", "free_points", "loop_frontier", "cluster_boundaries", "sle")


@dataclass(frozen=True)
class RunManifest:
    kind: str
    seed: int = 0
    samples: int = 1
    resolution: int = 256
    soup: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    out: str = "loopsoup-out"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "samples": self.samples,
            "resolution": self.resolution,
            "soup": self.soup,
            "params": self.params,
            "version": __version__,
        }

    def canonical_bytes(self) -> bytes:
        return (json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n").encode()

    @property
    def sha256(self) -> str:
        return sha256_bytes(self.canonical_bytes())

    def soup_config(self, seed: int) -> SoupConfig:
        return SoupConfig.from_dict({**self.soup, "seed": seed})

    def sample_seed(self, s: int) -> int:
        return rngmod.derive_seed(self.seed, rngmod.MISC, s)


# config parsing ---------------------------------------------------------------

def load_config_text(text: str, name: str = "<config>") -> dict:
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as e:
        mark = e.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"{name}: {where}: {e.problem}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"{name}: {e}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: top level must be a mapping")
    return data


def _as_int(name, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigError(f"field '{name}': expected an integer, got {v!r}")
    return int(v)


def build_manifest(kind: str, data: dict, overrides: dict) -> tuple[RunManifest, int]:
    """Merge file fields and flag overrides (flags win); returns the manifest and thread count."""
    unknown = set(data) - TOP_FIELDS
    if unknown:
        raise ConfigError(f"unknown field(s): {', '.join(sorted(unknown))}")
    if "kind" in data and data["kind"] != kind:
        raise ConfigError(f"field 'kind': file says {data['kind']!r} but subcommand is {kind!r}")
    merged = {**data, **{k: v for k, v in overrides.items() if v is not None}}
    seed = _as_int("seed", merged.get("seed", 0))
    samples = _as_int("samples", merged.get("samples", 1))
    resolution = _as_int("resolution", merged.get("resolution", 256))
    threads = _as_int("threads", merged.get("threads", os.cpu_count() or 1))
    if samples < 0 or threads < 1 or resolution < 16 or not 0 <= seed < 1 << 64:
        raise ConfigError("fields 'samples' >= 0, 'threads' >= 1, 'resolution' >= 16, 0 <= 'seed' < 2^64 required")
    soup = data.get("soup") or {}
    if not isinstance(soup, dict):
        raise ConfigError("field 'soup': expected a mapping")
    if "seed" in soup:
        raise ConfigError("field 'soup.seed': soup seeds derive from the top-level seed")
    try:
        SoupConfig.from_dict({**soup, "seed": 0})
    except (ConfigError, ValueError, TypeError, KeyError) as e:
        raise ConfigError(f"field 'soup': {e}") from None
    params = dict(PARAM_DEFAULTS[kind])
    given = data.get("params") or {}
    if not isinstance(given, dict):
        raise ConfigError("field 'params': expected a mapping")
    bad = set(given) - set(params)
    if bad:
        raise ConfigError(f"field 'params': unknown key(s) for {kind}: {', '.join(sorted(bad))}")
    params.update(given)
    if kind == "dimensions" and params["source"] not in DIMENSION_SOURCES:
        raise ConfigError(f"field 'params.source': expected one of {DIMENSION_SOURCES}")
    if kind == "percolation" and params["side"] not in ("left_right", "top_bottom"):
        raise ConfigError("field 'params.side': expected left_right or top_bottom")
    if kind == "chordal":
        try:
            _chordal_setup(params, seed, resolution)
        except (ConfigError, ValueError) as e:
            raise ConfigError(f"field 'params': {e}") from None
    out = str(merged.get("out", f"loopsoup-out/{kind}"))
    return RunManifest(kind, seed, samples, resolution, soup, params, out), threads


# experiment pipelines ---------------------------------------------------------

def _note(h: str) -> str:
    return f"manifest_sha256={h}"


def _run_soup(m: RunManifest, pmap, h: str) -> Results:
    cfgs = [m.soup_config(m.sample_seed(s)) for s in range(m.samples)]
    soups = list(pmap(sample_soup, cfgs))
    res = Results()
    loops = Table(["sample", "loop", "root_x", "root_y", "duration", "n_points"], digits=EXACT)
    for s, soup in enumerate(soups):
        for i, lp in enumerate(soup.loops):
            loops.rows.append([s, i, lp.root[0], lp.root[1], lp.duration, lp.n_points])
        if m.params["text"]:
            res.extra[f"soup_{s:04d}.txt"] = soupio.dumps_text(soup, {"manifest_sha256": h})
        if m.params["binary"]:
            res.extra[f"soup_{s:04d}.bin"] = soupio.dumps_binary(soup, {"manifest_sha256": h})
    if m.params["svg"] and soups:
        res.extra["soup_0000.svg"] = svg.soup_svg(soups[0], note=_note(h))
    res.tables["loops"] = loops
    counts = [len(s) for s in soups]
    res.summary = {
        "expected_candidates": expected_loop_count(m.soup_config(0)),
        "loop_counts": counts,
        "mean_count": float(np.mean(counts)) if counts else None,
        "warnings": sorted({w for s in soups for w in s.warnings}),
    }
    return res


def _clusters_job(args):
    cfg, touch = args
    soup = sample_soup(cfg)
    cl = build_clusters(soup, touch)
    try:
        dmin = min_cluster_distance(cl, soup)
    except LoopSoupError:
        dmin = None
    return soup, cl, dmin


def _run_clusters(m: RunManifest, pmap, h: str) -> Results:
    touch = float(m.params["touch_distance"])
    jobs = [(m.soup_config(m.sample_seed(s)), touch) for s in range(m.samples)]
    out = list(pmap(_clusters_job, jobs))
    res = Results()
    tab = Table(["sample", "cluster_id", "size", "xmin", "ymin", "xmax", "ymax", "total_duration"], digits=STAT)
    text = []
    for s, (soup, cl, _) in enumerate(out):
        for r in cluster_records(cl, soup):
            tab.rows.append([s, *r.values()])
        text.append(f"# sample {s}\n{cluster_table(cl, soup)}")
    res.tables["clusters"] = tab
    res.extra["clusters.txt"] = f"# {_note(h)}\n" + "\n".join(text) + "\n"
    res.summary = {
        "n_loops": [len(o[0]) for o in out],
        "n_clusters": [len(o[1]) for o in out],
        "min_cluster_distance": [o[2] for o in out],
        "touch_distance": touch,
    }
    return res


def _boundaries_job(args):
    cfg, touch, res_, n = args
    soup = sample_soup(cfg)
    cl = build_clusters(soup, touch)
    ids = sorted(cl.ids, key=lambda c: (-experiments.cluster_extent(cl, soup, c), c))[:n]
    bds = []
    for cid in ids:
        try:
            bds.append(trace_outer_boundary(cid, cl, soup, res_))
        except LoopSoupError:
            continue
    fpm = free_point_mask(soup, res_)
    return soup, cl, bds, fpm


def _run_boundaries(m: RunManifest, pmap, h: str) -> Results:
    p = m.params
    jobs = [(m.soup_config(m.sample_seed(s)), float(p["touch_distance"]), m.resolution, int(p["max_clusters"]))
            for s in range(m.samples)]
    out = list(pmap(_boundaries_job, jobs))
    res = Results()
    tab = Table(["sample", "cluster_id", "n_cells", "simple"], digits=STAT)
    free = Table(["sample", "free_fraction", "trace_free_fraction"], digits=STAT)
    for s, (soup, cl, bds, fpm) in enumerate(out):
        for b in bds:
            tab.rows.append([s, b.cluster_id, len(b.cells), b.is_simple])
        free.rows.append([s, fpm.free_fraction, fpm.trace_free_fraction])
        if p["svg"] and s == 0:
            res.extra["boundaries_0000.svg"] = svg.soup_svg(soup, cl, bds, fpm, note=_note(h))
    res.tables["boundaries"] = tab
    res.tables["free_fraction"] = free
    res.summary = {"n_boundaries": [len(o[2]) for o in out], "resolution": m.resolution}
    return res


def _dim_row(s, d):
    return [s, d.slope, d.stderr, d.r2, d.trimmed, len(d.scales)]


def _run_dimensions(m: RunManifest, pmap, h: str) -> Results:
    p = m.params
    src = p["source"]
    res = Results()
    tab = Table(["sample", "slope", "stderr", "r2", "trimmed", "n_scales"], digits=STAT)
    extra = {}
    if src == "sierpinski":
        d = box_counting_dimension(sierpinski_carpet(int(p["level"])), 1.0, [3**k for k in range(int(p["level"]) - 1, -1, -1)])
        dims = [d]
        extra["reference"] = float(np.log(8) / np.log(3))
    elif src == "free_points":
        cfgs = [m.soup_config(m.sample_seed(s)) for s in range(m.samples)]
        if p["t_min_fine"] is not None:
            pairs = list(pmap(lambda c: experiments.free_point_trend(c, float(p["t_min_fine"]), m.resolution), cfgs))
            dims = [a for a, _ in pairs]
            fine = [b for _, b in pairs]
            extra["fine_t_min"] = float(p["t_min_fine"])
            extra["fine_mean_slope"] = float(np.mean([b.slope for b in fine])) if fine else None
            res.tables["dimensions_fine"] = Table(tab.fields, [_dim_row(s, d) for s, d in enumerate(fine)], STAT)
        else:
            dims = list(pmap(lambda c: experiments.free_point_dimension_estimate(sample_soup(c), m.resolution), cfgs))
        extra["reference"] = 2.0 - m.soup_config(0).intensity_c / 5.0
    elif src == "loop_frontier":
        seeds = [m.sample_seed(s) for s in range(m.samples)]
        dims = list(pmap(lambda sd: experiments.loop_frontier_dimension(float(p["duration"]), int(p["n_points"]), m.resolution, sd), seeds))
        extra["reference"] = 4.0 / 3.0
    elif src == "cluster_boundaries":
        cfgs = [m.soup_config(m.sample_seed(s)) for s in range(m.samples)]
        nested = list(pmap(lambda c: experiments.cluster_boundary_dimensions(sample_soup(c), m.resolution, int(p["n_largest"])), cfgs))
        dims = [d for ds in nested for d in ds]
    else:
        seeds = [m.sample_seed(s) for s in range(m.samples)]
        kappa = float(p["kappa"])
        dims = list(pmap(lambda sd: sle.trace_dimension(sle.sample_sle(kappa, float(p["horizon"]), int(p["steps"]), sd), resolution=m.resolution), seeds))
        extra["reference"] = 1.0 + kappa / 8.0
    tab.rows = [_dim_row(s, d) for s, d in enumerate(dims)]
    res.tables["dimensions"] = tab
    res.tables["conversions"] = conversion_table()
    slopes = [d.slope for d in dims]
    res.summary = {
        "source": src,
        "mean_slope": float(np.mean(slopes)) if slopes else None,
        "stderr_of_mean": float(np.std(slopes, ddof=1) / np.sqrt(len(slopes))) if len(slopes) > 1 else None,
        "estimates": [d.to_dict() for d in dims[:1]],
        **extra,
    }
    return res


def _run_percolation(m: RunManifest, pmap, h: str) -> Results:
    p = m.params
    base = m.soup_config(m.seed)
    sw = experiments.percolation_sweep(p["c_grid"], base, m.resolution, m.samples, p["side"], p["avoid"], map_fn=pmap)
    res = Results()
    res.tables["percolation"] = Table(["c", "seed", "crossed", "free_fraction"], sw.rows(), STAT)
    res.summary = sw.summary()
    return res


def _sle_job(args):
    kappa, rho, horizon, steps, seed = args
    dt = horizon / steps
    drv = sle.sample_driving(kappa, rho, horizon, dt, seed)
    return sle.loewner_trace(drv, dt)


def _run_sle(m: RunManifest, pmap, h: str) -> Results:
    p = m.params
    rho = None if p["rho"] is None else float(p["rho"])
    jobs = [(float(p["kappa"]), rho, float(p["horizon"]), int(p["steps"]), m.sample_seed(s)) for s in range(m.samples)]
    traces = list(pmap(_sle_job, jobs))
    res = Results()
    tab = Table(["sample", "n_points", "end_re", "end_im", "reflections", "dimension"], digits=STAT)
    for s, tr in enumerate(traces):
        dim = sle.trace_dimension(tr, resolution=m.resolution).slope if p["dimension"] else None
        tab.rows.append([s, len(tr), tr.z[-1].real, tr.z[-1].imag, tr.driving.reflections, dim])
    res.tables["traces"] = tab
    if p["dump_trace"] and traces:
        tr = traces[0]
        rows = [[t, z.real, z.imag, w] for t, z, w in zip(tr.driving.times, tr.z, tr.driving.values)]
        res.tables["trace_0000"] = Table(["t", "re", "im", "w"], rows, EXACT)
        res.extra["trace_0000.svg"] = svg.trace_svg(tr.points, note=_note(h))
    dims = [r[-1] for r in tab.rows if r[-1] is not None]
    res.summary = {
        "kappa": float(p["kappa"]),
        "rho": rho,
        "mean_dimension": float(np.mean(dims)) if dims else None,
        "reference_dimension": 1.0 + float(p["kappa"]) / 8.0,
    }
    return res


def _chordal_setup(p: dict, seed: int, resolution: int) -> chordal.ChordalSetup:
    keys = ("kappa", "alpha", "c", "box_width", "box_height", "t_min", "t_max", "step_scale", "horizon", "dt",
            "touch_distance")
    kw = {k: p[k] for k in keys}
    return chordal.ChordalSetup(**kw, resolution=resolution, seed=seed)


def _run_chordal(m: RunManifest, pmap, h: str) -> Results:
    setup = _chordal_setup(m.params, m.seed, m.resolution)
    hulls = chordal.run_many(setup, m.samples, map_fn=pmap)
    grid = setup.grid()
    res = Results()
    tab = Table(["run", "exited", "n_attached", "x_forward", "x_inverted", "eta_dimension"], digits=STAT)
    etas, dims = [], []
    for k, hl in enumerate(hulls):
        xf = xi = dim = None
        if hl.eta is not None:
            etas.append(hl.eta)
            xf = chordal.first_crossing(hl.eta)
            xi = chordal.first_crossing(chordal.inversion(hl.eta))
            try:
                dim = chordal.eta_dimension(hl.eta_cells, grid.shape, grid.cell_size).slope
                dims.append(dim)
            except LoopSoupError:
                pass
        tab.rows.append([k, hl.exited, len(hl.attached_cluster_ids), xf, xi, dim])
    rep = chordal.reversibility_statistic(etas)
    res.tables["chordal"] = tab
    if m.params["svg"] and hulls and hulls[0].eta is not None:
        res.extra["chordal_0000.svg"] = svg.chordal_svg(hulls[0], setup.box, note=_note(h))
    res.summary = {
        "kappa": setup.kappa,
        "alpha": setup.alpha,
        "c": setup.c,
        "rho": setup.rho,
        "n_runs": m.samples,
        "n_eta": len(etas),
        "mean_eta_dimension": float(np.mean(dims)) if dims else None,
        "reference_dimension": 1.0 + setup.kappa / 8.0,
        "reversibility": rep.to_dict(),
    }
    return res


PIPELINES = {
    "soup": _run_soup,
    "clusters": _run_clusters,
    "boundaries": _run_boundaries,
    "dimensions": _run_dimensions,
    "percolation": _run_percolation,
    "sle": _run_sle,
    "chordal": _run_chordal,
}


def run(manifest: RunManifest, threads: int = 1) -> list[Path]:
    """Execute a manifest; results are identical for any thread count (ordered map)."""
    out = Path(manifest.out)
    out.mkdir(parents=True, exist_ok=True)
    h = manifest.sha256
    (out / "manifest.json").write_bytes(manifest.canonical_bytes())
    t0 = time.time()
    with ThreadPoolExecutor(max_workers=threads) as ex:
        results = PIPELINES[manifest.kind](manifest, ex.map, h)
    files = emit_report(results, out, h)
    with open(out / "run.log", "a") as f:
        f.write(f"{time.strftime('%Y-%m-%dT%H:%M:%S')} kind={manifest.kind} threads={threads} "
                f"seconds={time.time() - t0:.3f} manifest_sha256={h}\n")
    return [out / "manifest.json", *files]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def make_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="loopsoup", description="Brownian loop soup and SLE experiments.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    for k in KINDS:
        sp = sub.add_parser(k, help=f"run a {k} experiment")
        sp.add_argument("--config", required=False, help="YAML or JSON configuration file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--samples", type=int)
        sp.add_argument("--out")
        sp.add_argument("--threads", type=int)
        sp.add_argument("--resolution", type=int)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        data = {}
        if args.config:
            try:
                text = Path(args.config).read_text()
            except OSError as e:
                raise ConfigError(f"cannot read config: {e}") from None
            data = load_config_text(text, args.config)
        overrides = {k: getattr(args, k) for k in ("seed", "samples", "out", "threads", "resolution")}
        manifest, threads = build_manifest(args.kind, data, overrides)
    except ConfigError as e:
        print(f"loopsoup: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        files = run(manifest, threads)
    except (LoopSoupError, OSError, ValueError, ArithmeticError) as e:
        print(f"loopsoup: {manifest.kind} failed: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {len(files)} files to {manifest.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
