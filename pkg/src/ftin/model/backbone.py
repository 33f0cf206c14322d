"""1-D residual backbone."""
from __future__ import annotations

import torch
from torch import nn

from ..errors import ShapeError
from .config import BackboneConfig


class BasicBlock1d(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, stride: int = 1, kernel_size: int = 3):
        super().__init__()
        pad = kernel_size // 2
        self.conv1 = nn.Conv1d(in_ch, out_ch, kernel_size, stride=stride, padding=pad, bias=False)
        self.bn1 = nn.BatchNorm1d(out_ch)
        self.conv2 = nn.Conv1d(out_ch, out_ch, kernel_size, stride=1, padding=pad, bias=False)
        self.bn2 = nn.BatchNorm1d(out_ch)
        if stride != 1 or in_ch != out_ch:
            self.downsample = nn.Sequential(
                nn.Conv1d(in_ch, out_ch, 1, stride=stride, bias=False), nn.BatchNorm1d(out_ch)
            )
        else:
            self.downsample = None

    def branch(self, x):
        out = torch.relu(self.bn1(self.conv1(x)))
        return self.bn2(self.conv2(out))

    def shortcut(self, x):
        return x if self.downsample is None else self.downsample(x)

    def forward(self, x):
        return torch.relu(self.branch(x) + self.shortcut(x))


class ResNet1d(nn.Module):
    """Stem convolution followed by stages of basic blocks.

    Output length is the input length divided by the product of stage strides
    (rounded up at each stage).
    """

    def __init__(self, in_channels: int, cfg: BackboneConfig):
        super().__init__()
        self.in_channels = in_channels
        c0 = cfg.channels[0]
        k = cfg.kernel_size
        self.stem = nn.Sequential(
            nn.Conv1d(in_channels, c0, k, padding=k // 2, bias=False), nn.BatchNorm1d(c0), nn.ReLU()
        )
        stages = []
        prev = c0
        for ch, stride in zip(cfg.channels, cfg.strides):
            blocks = [BasicBlock1d(prev, ch, stride, k)]
            blocks += [BasicBlock1d(ch, ch, 1, k) for _ in range(cfg.blocks_per_stage - 1)]
            stages.append(nn.Sequential(*blocks))
            prev = ch
        self.stages = nn.ModuleList(stages)
        self.out_channels = prev

    def forward(self, x):
        if x.dim() != 3 or x.shape[1] != self.in_channels:
            raise ShapeError(f"expected (B, {self.in_channels}, L) input, got {tuple(x.shape)}")
        x = self.stem(x)
        for stage in self.stages:
            x = stage(x)
        return x
