"""Binary file formats for cached intermediates and dataset samples.

Every file starts with an 8-byte magic, a little-endian uint32 header length
and a canonical JSON header (sorted keys, compact separators), followed by a
format-specific payload.  Headers carry no timestamps or absolute paths so
that regenerated files are byte-identical.

    .rsp  path sets     magic RSIMPATH, length-prefixed path records
    .rsc  IF data cubes magic RSIMCUBE, interleaved complex64 samples
    .rsi  image pairs   magic RSIMIMGP, float32 intensity + depth planes
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .imaging import RadarImagePair, VoxelGrid
from .raytracer import MaterialParams, PathSet, TraceConfig
from .signal import IFDataCube, SfcwConfig

PATHS_MAGIC = b"RSIMPATH"
CUBE_MAGIC = b"RSIMCUBE"
PAIR_MAGIC = b"RSIMIMGP"
FORMAT_VERSION = 1


class FormatError(ValueError):
    """Raised when a radarsim binary file is malformed."""


def _dump_header(header: dict) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _write(path, magic: bytes, header: dict, payloads: list[bytes]) -> None:
    blob = _dump_header(header)
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for payload in payloads:
            fh.write(payload)


def _read(path, magic: bytes) -> tuple[dict, bytes]:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"unreadable file {path}: {exc}") from exc
    if len(blob) < 12 or blob[:8] != magic:
        raise FormatError(f"{path}: bad magic (expected {magic.decode()} file)")
    (hlen,) = struct.unpack_from("<I", blob, 8)
    if len(blob) < 12 + hlen:
        raise FormatError(f"{path}: truncated header")
    try:
        header = json.loads(blob[12 : 12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt JSON header: {exc}") from exc
    if header.get("version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {header.get('version')}")
    return header, blob[12 + hlen :]


# ---------------------------------------------------------------------------
# PathSet (.rsp)
# ---------------------------------------------------------------------------

def save_pathset(paths: PathSet, path) -> None:
    header = {
        "version": FORMAT_VERSION,
        "n_paths": int(len(paths)),
        "n_tx": paths.n_tx,
        "n_rx": paths.n_rx,
        "seed": int(paths.config.rng_seed),
        "zero_paths": paths.zero_paths,
        "trace_config": asdict(paths.config),
        "material": {"alpha": paths.material.alpha},
    }
    records = []
    for i in range(len(paths)):
        lo, hi = paths.hit_offsets[i], paths.hit_offsets[i + 1]
        pts = paths.hit_points[lo:hi]
        body = struct.pack(
            "<IIIId",
            int(paths.tx_index[i]),
            int(paths.rx_index[i]),
            int(paths.ray_index[i]),
            int(paths.bounce_count[i]),
            float(paths.total_length[i]),
        ) + pts.astype("<f8").tobytes()
        records.append(struct.pack("<I", len(body)) + body)
    _write(path, PATHS_MAGIC, header, records)


def load_pathset(path) -> PathSet:
    header, payload = _read(path, PATHS_MAGIC)
    n = header["n_paths"]
    tx = np.empty(n, dtype=np.int32)
    rx = np.empty(n, dtype=np.int32)
    ray = np.empty(n, dtype=np.int32)
    bounce = np.empty(n, dtype=np.int32)
    length = np.empty(n, dtype=np.float64)
    chains = []
    cursor = 0
    for i in range(n):
        if cursor + 4 > len(payload):
            raise FormatError(f"{path}: truncated at record {i}")
        (rec_len,) = struct.unpack_from("<I", payload, cursor)
        cursor += 4
        rec = payload[cursor : cursor + rec_len]
        if len(rec) != rec_len:
            raise FormatError(f"{path}: truncated record {i}")
        cursor += rec_len
        tx[i], rx[i], ray[i], bounce[i], length[i] = struct.unpack_from("<IIIId", rec, 0)
        pts = np.frombuffer(rec, dtype="<f8", offset=24).reshape(-1, 3)
        if len(pts) != bounce[i]:
            raise FormatError(f"{path}: record {i} holds {len(pts)} points, expected {bounce[i]}")
        chains.append(pts)
    cfg = TraceConfig(**header["trace_config"])
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(bounce, out=offsets[1:])
    return PathSet(
        tx_index=tx,
        rx_index=rx,
        ray_index=ray,
        bounce_count=bounce,
        total_length=length,
        hit_offsets=offsets,
        hit_points=np.vstack(chains) if chains else np.empty((0, 3)),
        n_tx=header["n_tx"],
        n_rx=header["n_rx"],
        config=cfg,
        material=MaterialParams(**header["material"]),
    )


# ---------------------------------------------------------------------------
# IF data cube (.rsc)
# ---------------------------------------------------------------------------

def save_cube(cube: IFDataCube, path) -> None:
    header = {
        "version": FORMAT_VERSION,
        "dims": list(cube.values.shape),
        "sfcw": asdict(cube.config),
        "dtype": "complex64",
    }
    payload = cube.values.astype("<c8").tobytes()  # serialized single precision
    _write(path, CUBE_MAGIC, header, [payload])


def load_cube(path) -> IFDataCube:
    header, payload = _read(path, CUBE_MAGIC)
    dims = tuple(header["dims"])
    expected = int(np.prod(dims)) * 8
    if len(payload) != expected:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    values = np.frombuffer(payload, dtype="<c8").reshape(dims).astype(np.complex128)
    return IFDataCube(values, SfcwConfig(**header["sfcw"]))


# ---------------------------------------------------------------------------
# Radar image pair (.rsi)
# ---------------------------------------------------------------------------

def save_pair(pair: RadarImagePair, path, provenance: dict | None = None) -> None:
    header = {
        "version": FORMAT_VERSION,
        "dims": list(pair.intensity.shape),
        "grid": {
            "origin": list(pair.grid.origin),
            "spacing": list(pair.grid.spacing),
            "counts": list(pair.grid.counts),
        },
        "label": pair.label,
        "normalized": pair.normalized,
        "provenance": provenance or {},
    }
    payloads = [
        pair.intensity.astype("<f4").tobytes(),
        pair.depth.astype("<f4").tobytes(),
    ]
    _write(path, PAIR_MAGIC, header, payloads)


def load_pair(path) -> tuple[RadarImagePair, dict]:
    """Returns the pair and its provenance dict."""
    header, payload = _read(path, PAIR_MAGIC)
    nx, ny = header["dims"]
    plane_bytes = nx * ny * 4
    if len(payload) != 2 * plane_bytes:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, expected {2 * plane_bytes}")
    intensity = np.frombuffer(payload[:plane_bytes], dtype="<f4").reshape(nx, ny)
    depth = np.frombuffer(payload[plane_bytes:], dtype="<f4").reshape(nx, ny)
    grid = VoxelGrid(
        origin=tuple(header["grid"]["origin"]),
        spacing=tuple(header["grid"]["spacing"]),
        counts=tuple(header["grid"]["counts"]),
    )
    pair = RadarImagePair(
        intensity=intensity.astype(np.float64),
        depth=depth.astype(np.float64),
        grid=grid,
        label=header.get("label"),
        normalized=bool(header.get("normalized", False)),
    )
    return pair, header.get("provenance", {})


def read_pair_header(path) -> dict:
    """Header only; used by resumable generation to match seeds cheaply."""
    header, _ = _read(path, PAIR_MAGIC)
    return header


def save_pair_previews(pair: RadarImagePair, stem) -> list[str]:
    """8-bit PNG previews (<stem>_intensity.png, <stem>_depth.png)."""
    from PIL import Image

    written = []
    for name, plane in (("intensity", pair.intensity), ("depth", pair.depth)):
        peak = float(plane.max(initial=0.0))
        scaled = plane / peak if peak > 0 else plane
        img = Image.fromarray((np.clip(scaled, 0.0, 1.0) * 255).astype(np.uint8).T)
        out = f"{stem}_{name}.png"
        img.save(out)
        written.append(out)
    return written
