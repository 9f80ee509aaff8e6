"""Training loop: RAdam, step-decayed learning rate, early stopping.

Default recipe: learning rate 5e-5 cut by 0.2 every 5 epochs, 15 epochs,
batch size 4, early stopping on validation loss with a patience parameter.  `train` keeps the best-validation-loss weights as the
checkpoint and logs per-epoch losses, accuracy and learning rate.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import torch
from torch import nn
from torch.utils.data import DataLoader

from .model import build_model

_ALLOWED_DEPTHS = (18, 34, 50, 101)


@dataclass(frozen=True)
class TrainConfig:
    backbone_depth: int = 18
    learning_rate: float = 5e-5
    lr_decay: float = 0.2
    lr_step_epochs: int = 5
    epochs: int = 15
    batch_size: int = 4
    patience: Optional[int] = 3  # None disables early stopping
    n_classes: int = 8
    head_sizes: tuple[int, ...] = (256, 64)
    dropout: float = 0.3
    pretrained: bool = False
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.backbone_depth not in _ALLOWED_DEPTHS:
            raise ValueError(f"backbone_depth must be one of {_ALLOWED_DEPTHS}")
        for name in ("learning_rate", "lr_decay", "lr_step_epochs", "epochs", "batch_size", "n_classes"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be >= 1 (or None)")

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        raw = json.loads(Path(path).read_text())
        if "head_sizes" in raw:
            raw["head_sizes"] = tuple(raw["head_sizes"])
        return cls(**raw)


class EarlyStopper:
    """Stops once the monitored loss has not improved for `patience` epochs."""

    def __init__(self, patience: Optional[int]):
        self.patience = patience
        self.best = float("inf")
        self.best_epoch = 0
        self.epoch = 0

    def update(self, loss: float) -> bool:
        """Record one epoch; returns True when training should stop."""
        self.epoch += 1
        if loss < self.best:
            self.best = loss
            self.best_epoch = self.epoch
        if self.patience is None:
            return False
        return (self.epoch - self.best_epoch) > self.patience


def _epoch_pass(model, loader, criterion, optimizer=None, device="cpu"):
    training = optimizer is not None
    model.train(training)
    total_loss = 0.0
    correct = 0
    count = 0
    steps = 0
    with torch.set_grad_enabled(training):
        for planes, target in loader:
            planes = planes.to(device)
            target = target.to(device)
            logits = model(planes)
            loss = criterion(logits, target)
            if training:
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                steps += 1
            total_loss += float(loss.detach()) * len(target)
            correct += int((logits.argmax(dim=1) == target).sum())
            count += len(target)
    return total_loss / max(count, 1), correct / max(count, 1), steps


def train(
    model: Optional[nn.Module],
    train_set,
    val_set,
    cfg: TrainConfig,
    checkpoint_path=None,
    val_loss_hook: Optional[Callable[[int, float], float]] = None,
    device: str = "cpu",
) -> tuple[dict, list[dict]]:
    """Run the training loop; returns (checkpoint dict, per-epoch history).

    `val_loss_hook(epoch, measured_loss) -> monitored_loss` lets tests inject
    synthetic validation losses through the real early-stopping path.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("train and validation sets must be non-empty")
    torch.manual_seed(cfg.seed)
    if model is None:
        model = build_model(
            cfg.backbone_depth, cfg.n_classes, cfg.head_sizes, cfg.dropout, cfg.pretrained
        )
    model.to(device)
    loader = DataLoader(
        train_set,
        batch_size=cfg.batch_size,
        shuffle=True,
        generator=torch.Generator().manual_seed(cfg.seed),
        num_workers=0,
    )
    val_loader = DataLoader(val_set, batch_size=cfg.batch_size, shuffle=False, num_workers=0)
    criterion = nn.CrossEntropyLoss()
    optimizer = torch.optim.RAdam(model.parameters(), lr=cfg.learning_rate)
    scheduler = torch.optim.lr_scheduler.StepLR(
        optimizer, step_size=cfg.lr_step_epochs, gamma=cfg.lr_decay
    )
    stopper = EarlyStopper(cfg.patience)
    history: list[dict] = []
    best_state = None
    total_steps = 0
    for epoch in range(1, cfg.epochs + 1):
        lr_now = optimizer.param_groups[0]["lr"]
        train_loss, train_acc, steps = _epoch_pass(model, loader, criterion, optimizer, device)
        total_steps += steps
        val_loss, val_acc, _ = _epoch_pass(model, val_loader, criterion, None, device)
        if not (torch.isfinite(torch.tensor(train_loss)) and torch.isfinite(torch.tensor(val_loss))):
            raise RuntimeError(f"non-finite loss at epoch {epoch}; aborting")
        monitored = val_loss_hook(epoch, val_loss) if val_loss_hook else val_loss
        history.append(
            {
                "epoch": epoch,
                "lr": lr_now,
                "train_loss": train_loss,
                "train_accuracy": train_acc,
                "val_loss": monitored,
                "val_accuracy": val_acc,
                "steps": total_steps,
            }
        )
        stop = stopper.update(monitored)
        if stopper.best_epoch == epoch:
            best_state = {k: v.detach().cpu().clone() for k, v in model.state_dict().items()}
        scheduler.step()
        if stop:
            break
    checkpoint = {
        "state_dict": best_state if best_state is not None else model.state_dict(),
        "config": asdict(cfg),
        "best_epoch": stopper.best_epoch,
        "history": history,
    }
    if checkpoint_path is not None:
        torch.save(checkpoint, checkpoint_path)
    return checkpoint, history


def load_checkpoint(path, device: str = "cpu") -> tuple[nn.Module, TrainConfig]:
    payload = torch.load(path, map_location=device, weights_only=False)
    raw_cfg = dict(payload["config"])
    raw_cfg["head_sizes"] = tuple(raw_cfg["head_sizes"])
    cfg = TrainConfig(**raw_cfg)
    model = build_model(
        cfg.backbone_depth, cfg.n_classes, cfg.head_sizes, cfg.dropout, pretrained=False
    )
    model.load_state_dict(payload["state_dict"])
    model.to(device)
    return model, cfg
