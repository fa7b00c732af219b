"""Text and binary soup dumps. Both round-trip every float exactly.

Text layout::

    loopsoup-text 1
    config {"domain": ..., "intensity_c": ...}
    loops N
    loop <root x> <root y> <duration> <n points>
    <x> <y>            (n lines)
    ...

Binary layout (little-endian): magic ``LSB1``, u32 config-json length,
config json, u64 loop count, then per loop root x, root y, duration (f64),
point count (u64) and the coordinate pairs as f64.
"""

from __future__ import annotations

import io
import json
import struct

import numpy as np

from loopsoup.errors import ConfigError
from loopsoup.soup import Loop, LoopSoup, SoupConfig

TEXT_MAGIC = "loopsoup-text 1"
BIN_MAGIC = b"LSB1"


def _config_json(soup: LoopSoup, meta: dict | None = None) -> str:
    d = soup.config.to_dict()
    if soup.warnings:
        d = {**d, "warnings": list(soup.warnings)}
    if meta:
        d = {**d, "meta": meta}
    return json.dumps(d, sort_keys=True)


def _config_from(d: dict):
    d = dict(d)
    warnings = tuple(d.pop("warnings", ()))
    d.pop("meta", None)
    return SoupConfig.from_dict(d), warnings


def dumps_text(soup: LoopSoup, meta: dict | None = None) -> str:
    """``meta`` (e.g. the producing manifest's hash) rides along in the config json."""
    out = io.StringIO()
    out.write(f"{TEXT_MAGIC}\n")
    out.write(f"config {_config_json(soup, meta)}\n")
    out.write(f"loops {len(soup)}\n")
    for lp in soup.loops:
        out.write(f"loop {lp.root[0]!r} {lp.root[1]!r} {lp.duration!r} {lp.n_points}\n")
        for x, y in lp.points.tolist():
            out.write(f"{x!r} {y!r}\n")
    return out.getvalue()


def loads_text(text: str) -> LoopSoup:
    try:
        return _loads_text(text)
    except ConfigError:
        raise
    except (ValueError, IndexError, KeyError, TypeError) as e:
        raise ConfigError(f"truncated or malformed text dump: {e}") from None


def _loads_text(text: str) -> LoopSoup:
    lines = text.splitlines()
    if not lines or lines[0].strip() != TEXT_MAGIC:
        raise ConfigError("not a loopsoup text dump (line 1)")
    try:
        head, payload = lines[1].split(" ", 1)
        if head != "config":
            raise ValueError
        config, warnings = _config_from(json.loads(payload))
        head, n = lines[2].split()
        if head != "loops":
            raise ValueError
    except (ValueError, IndexError) as e:
        raise ConfigError(f"malformed header: {e}") from None
    loops = []
    k = 3
    for _ in range(int(n)):
        tag, rx, ry, dur, npts = lines[k].split()
        if tag != "loop":
            raise ConfigError(f"line {k + 1}: expected a loop record")
        npts = int(npts)
        pts = np.array([[float(v) for v in ln.split()] for ln in lines[k + 1 : k + 1 + npts]], dtype=np.float64)
        loops.append(Loop((float(rx), float(ry)), float(dur), pts.reshape(npts, 2)))
        k += 1 + npts
    return LoopSoup(config, tuple(loops), warnings)


def dumps_binary(soup: LoopSoup, meta: dict | None = None) -> bytes:
    cfg = _config_json(soup, meta).encode()
    parts = [BIN_MAGIC, struct.pack("<I", len(cfg)), cfg, struct.pack("<Q", len(soup))]
    for lp in soup.loops:
        parts.append(struct.pack("<dddQ", lp.root[0], lp.root[1], lp.duration, lp.n_points))
        parts.append(np.ascontiguousarray(lp.points, dtype="<f8").tobytes())
    return b"".join(parts)


def loads_binary(data: bytes) -> LoopSoup:
    try:
        return _loads_binary(data)
    except ConfigError:
        raise
    except (struct.error, ValueError, KeyError, TypeError) as e:
        raise ConfigError(f"truncated or malformed binary dump: {e}") from None


def _loads_binary(data: bytes) -> LoopSoup:
    if data[:4] != BIN_MAGIC:
        raise ConfigError("not a loopsoup binary dump")
    (n_cfg,) = struct.unpack_from("<I", data, 4)
    off = 8
    config, warnings = _config_from(json.loads(data[off : off + n_cfg].decode()))
    off += n_cfg
    (n,) = struct.unpack_from("<Q", data, off)
    off += 8
    loops = []
    for _ in range(n):
        rx, ry, dur, npts = struct.unpack_from("<dddQ", data, off)
        off += 32
        pts = np.frombuffer(data, dtype="<f8", count=2 * npts, offset=off).reshape(npts, 2).astype(np.float64)
        off += 16 * npts
        loops.append(Loop((rx, ry), dur, pts))
    return LoopSoup(config, tuple(loops), warnings)


def save(soup: LoopSoup, path, binary: bool = False, meta: dict | None = None) -> None:
    if binary:
        with open(path, "wb") as f:
            f.write(dumps_binary(soup, meta))
    else:
        with open(path, "w", newline="\n") as f:
            f.write(dumps_text(soup, meta))


def load(path) -> LoopSoup:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] == BIN_MAGIC:
        return loads_binary(data)
    return loads_text(data.decode())
