"""ResNet backbone over concatenated intensity+depth channels.

The first convolution is rebuilt for 2 input channels and the stock fc layer
is replaced by a small head of linear layers interleaved with dropout
(pooled features -> 256 -> 64 -> n_classes, dropout 0.3 by default; sizes
and rates are configurable).
"""

from __future__ import annotations

import torch.nn as nn
from torchvision import models

_BACKBONES = {
    18: models.resnet18,
    34: models.resnet34,
    50: models.resnet50,
    101: models.resnet101,
}


def build_model(
    backbone_depth: int = 18,
    n_classes: int = 8,
    head_sizes: tuple[int, ...] = (256, 64),
    dropout: float = 0.3,
    pretrained: bool = False,
) -> nn.Module:
    """Model mapping a (B, 2, H, W) batch to (B, n_classes) logits."""
    if backbone_depth not in _BACKBONES:
        raise ValueError(
            f"unsupported backbone depth {backbone_depth}; choose from {sorted(_BACKBONES)}"
        )
    weights = "DEFAULT" if pretrained else None
    net = _BACKBONES[backbone_depth](weights=weights)
    old = net.conv1
    net.conv1 = nn.Conv2d(
        2, old.out_channels, kernel_size=old.kernel_size, stride=old.stride,
        padding=old.padding, bias=old.bias is not None,
    )
    layers: list[nn.Module] = []
    width = net.fc.in_features
    for size in head_sizes:
        layers += [nn.Linear(width, size), nn.ReLU(inplace=True), nn.Dropout(dropout)]
        width = size
    layers.append(nn.Linear(width, n_classes))
    net.fc = nn.Sequential(*layers)
    return net
