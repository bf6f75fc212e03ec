"""Small encoder-decoder segmentation network."""

from __future__ import annotations

import torch
from torch import nn
import torch.nn.functional as F

from ..exceptions import ContractError

# Widths per preset; the ensemble preset is deliberately the smallest.
PRESETS = {
    "category": (16, 32, 64),
    "monolithic": (16, 32, 64),
    "ensemble": (8, 16, 32),
    "micro": (2, 2, 2),
}


def _block(cin, cout, norm):
    layers = [nn.Conv2d(cin, cout, 3, padding=1, bias=not norm)]
    if norm:
        layers.append(nn.BatchNorm2d(cout))
    layers.append(nn.ReLU(inplace=True))
    return nn.Sequential(*layers)


class SegNet(nn.Module):
    """Three-stage encoder-decoder with skip connections.

    Input is ``(N, C, H, W)`` with H and W divisible by 4; output is
    ``(N, n_out, H, W)`` class scores.
    """

    stride = 4

    def __init__(self, in_channels=3, n_out=19, widths=PRESETS["category"], norm=True):
        super().__init__()
        w1, w2, w3 = widths
        self.arch = {"in_channels": in_channels, "n_out": n_out, "widths": list(widths), "norm": norm}
        self.enc1 = nn.Sequential(_block(in_channels, w1, norm), _block(w1, w1, norm))
        self.enc2 = nn.Sequential(_block(w1, w2, norm), _block(w2, w2, norm))
        self.enc3 = nn.Sequential(_block(w2, w3, norm), _block(w3, w3, norm))
        self.dec2 = _block(w3 + w2, w2, norm)
        self.dec1 = _block(w2 + w1, w1, norm)
        self.head = nn.Conv2d(w1, n_out, 1)
        self.meta: dict = {}

    @property
    def n_out(self) -> int:
        return self.arch["n_out"]

    @property
    def in_channels(self) -> int:
        return self.arch["in_channels"]

    def check_input(self, x: torch.Tensor):
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ContractError(
                f"expected (N, {self.in_channels}, H, W) input, got {tuple(x.shape)}"
            )
        h, w = x.shape[-2:]
        if h % self.stride or w % self.stride:
            raise ContractError(f"input {h}x{w}: height and width must be divisible by {self.stride}")

    def forward(self, x):
        self.check_input(x)
        e1 = self.enc1(x)
        e2 = self.enc2(F.max_pool2d(e1, 2))
        e3 = self.enc3(F.max_pool2d(e2, 2))
        d2 = self.dec2(torch.cat([F.interpolate(e3, scale_factor=2, mode="nearest"), e2], 1))
        d1 = self.dec1(torch.cat([F.interpolate(d2, scale_factor=2, mode="nearest"), e1], 1))
        return self.head(d1)


def build_model(arch: dict) -> SegNet:
    return SegNet(arch["in_channels"], arch["n_out"], tuple(arch["widths"]), arch.get("norm", True))


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
