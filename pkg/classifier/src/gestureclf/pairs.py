"""Reader for the radar toolkit's dataset interchange formats.

Implements the documented on-disk contract directly (this package does not
import the simulator): `.rsi` files carry an 8-byte magic `RSIMIMGP`, a
little-endian uint32 header length, a JSON header with `dims`, `grid`,
`label` and `provenance`, then two float32 planes (intensity, depth) in row
major order.  The dataset manifest is JSON Lines with at least `file` and
`label` per record.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

PAIR_MAGIC = b"RSIMIMGP"


class PairFormatError(ValueError):
    """Raised when an image-pair file or manifest is malformed."""


def read_pair(path) -> tuple[np.ndarray, dict]:
    """Return (planes, header) where planes is float32 (2, H, W)."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 12 or blob[:8] != PAIR_MAGIC:
        raise PairFormatError(f"{path}: not a radar image-pair file")
    (hlen,) = struct.unpack_from("<I", blob, 8)
    try:
        header = json.loads(blob[12 : 12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise PairFormatError(f"{path}: corrupt header: {exc}") from exc
    nx, ny = header["dims"]
    plane_bytes = nx * ny * 4
    payload = blob[12 + hlen :]
    if len(payload) != 2 * plane_bytes:
        raise PairFormatError(
            f"{path}: expected {2 * plane_bytes} payload bytes, found {len(payload)}"
        )
    intensity = np.frombuffer(payload[:plane_bytes], dtype="<f4").reshape(nx, ny)
    depth = np.frombuffer(payload[plane_bytes:], dtype="<f4").reshape(nx, ny)
    return np.stack([intensity, depth]).astype(np.float32), header


def read_manifest(path) -> list[dict]:
    """Parse a manifest.jsonl; every record must name a file and a label."""
    path = Path(path)
    records = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise PairFormatError(f"{path}:{lineno}: bad JSON: {exc}") from exc
        if "file" not in rec or "label" not in rec:
            raise PairFormatError(f"{path}:{lineno}: record needs 'file' and 'label'")
        records.append(rec)
    if not records:
        raise PairFormatError(f"{path}: empty manifest")
    return records
