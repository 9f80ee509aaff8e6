"""Torch dataset over manifest-listed image pairs, with a stratified split."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch.utils.data import Dataset

from . import LABELS
from .pairs import read_manifest, read_pair

_LABEL_TO_INDEX = {label: i for i, label in enumerate(LABELS)}


class PairDataset(Dataset):
    """Image pairs as (2, H, W) float tensors with integer class targets."""

    def __init__(self, manifest_path, records: list[dict] | None = None):
        self.root = Path(manifest_path).parent
        self.records = records if records is not None else read_manifest(manifest_path)
        for rec in self.records:
            if rec["label"] not in _LABEL_TO_INDEX:
                raise ValueError(
                    f"label {rec['label']!r} outside {''.join(LABELS)} in {manifest_path}"
                )

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, idx: int):
        rec = self.records[idx]
        planes, _ = read_pair(self.root / rec["file"])
        return torch.from_numpy(planes), _LABEL_TO_INDEX[rec["label"]]

    @property
    def targets(self) -> np.ndarray:
        return np.array([_LABEL_TO_INDEX[r["label"]] for r in self.records])


def stratified_split(
    dataset: PairDataset, val_fraction: float = 0.1, seed: int = 0
) -> tuple[PairDataset, PairDataset]:
    """Per-class 90/10 style split; every class keeps at least one train sample."""
    if not (0.0 <= val_fraction < 1.0):
        raise ValueError("val_fraction must be in [0, 1)")
    rng = np.random.default_rng(seed)
    targets = dataset.targets
    train_idx: list[int] = []
    val_idx: list[int] = []
    for cls in np.unique(targets):
        members = np.flatnonzero(targets == cls)
        rng.shuffle(members)
        n_val = int(round(len(members) * val_fraction))
        if val_fraction > 0.0 and len(members) >= 2:
            n_val = max(n_val, 1)
        n_val = min(n_val, len(members) - 1)
        val_idx.extend(members[:n_val])
        train_idx.extend(members[n_val:])
    train_idx.sort()
    val_idx.sort()
    manifest_dir = dataset.root / "manifest.jsonl"
    train = PairDataset(manifest_dir, [dataset.records[i] for i in train_idx])
    val = PairDataset(manifest_dir, [dataset.records[i] for i in val_idx])
    return train, val
