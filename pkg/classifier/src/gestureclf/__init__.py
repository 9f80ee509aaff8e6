"""ResNet classifier for radar intensity/depth image pairs."""

__version__ = "0.1.0"

LABELS = tuple("ABCDEFGH")

from .metrics import EvalReport, confusion_matrix, f1_scores
from .model import build_model
from .train import TrainConfig, train
from .evaluate import evaluate

__all__ = [
    "LABELS",
    "EvalReport",
    "confusion_matrix",
    "f1_scores",
    "build_model",
    "TrainConfig",
    "train",
    "evaluate",
]
