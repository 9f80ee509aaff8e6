"""Deterministic evaluation producing confusion matrices and F1 scores."""

from __future__ import annotations

import torch
from torch.utils.data import DataLoader

from .data import PairDataset
from .metrics import EvalReport


def evaluate(model, dataset: PairDataset, batch_size: int = 16, device: str = "cpu") -> EvalReport:
    """No augmentation, fixed order: two runs of one checkpoint agree exactly."""
    model.to(device)
    model.eval()
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=False, num_workers=0)
    y_true: list[int] = []
    y_pred: list[int] = []
    with torch.no_grad():
        for planes, target in loader:
            logits = model(planes.to(device))
            y_pred.extend(int(i) for i in logits.argmax(dim=1).cpu())
            y_true.extend(int(t) for t in target)
    return EvalReport.from_predictions(y_true, y_pred)
