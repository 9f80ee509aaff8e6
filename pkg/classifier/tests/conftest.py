import json
import struct

import numpy as np
import pytest

PAIR_MAGIC = b"RSIMIMGP"
LABELS = "ABCDEFGH"


def write_pair_file(path, intensity, depth, label, seed=0):
    """Emit the documented .rsi layout (independent of both packages)."""
    intensity = np.asarray(intensity, dtype="<f4")
    depth = np.asarray(depth, dtype="<f4")
    header = {
        "version": 1,
        "dims": list(intensity.shape),
        "grid": {
            "origin": [0.0, 0.0, 0.2],
            "spacing": [0.005, 0.005, 0.005],
            "counts": [intensity.shape[0], intensity.shape[1], 4],
        },
        "label": label,
        "normalized": True,
        "provenance": {"seed": seed, "alpha": 0.3, "pose": {}},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(PAIR_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(intensity.tobytes())
        fh.write(depth.tobytes())


def class_image(label: str, size: int = 32, rng=None):
    """Distinct, learnable pattern per class: a bright block whose position
    and size encode the class index, over mild noise."""
    rng = rng or np.random.default_rng(ord(label))
    idx = LABELS.index(label)
    img = rng.uniform(0.0, 0.15, size=(size, size))
    row = (idx % 4) * (size // 4)
    col = (idx // 4) * (size // 2)
    img[row : row + size // 4, col : col + size // 4] = 1.0
    return img.astype(np.float32)


def make_dataset(root, samples_per_class=1, size=32, labels=LABELS):
    root.mkdir(parents=True, exist_ok=True)
    lines = []
    for label in labels:
        for s in range(samples_per_class):
            rng = np.random.default_rng([ord(label), s])
            intensity = class_image(label, size, rng)
            depth = np.clip(intensity * 0.8 + rng.uniform(0, 0.1, intensity.shape), 0, 1)
            fname = f"{label}_{s:05d}.rsi"
            write_pair_file(root / fname, intensity, depth, label, seed=s)
            lines.append({"file": fname, "label": label, "seed": s})
    manifest = root / "manifest.jsonl"
    manifest.write_text("\n".join(json.dumps(l, sort_keys=True) for l in lines) + "\n")
    return manifest


@pytest.fixture()
def tiny_manifest(tmp_path):
    return make_dataset(tmp_path / "ds", samples_per_class=1, size=32)
