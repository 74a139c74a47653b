"""Torch modules for the reduced U-Net and the profile refinement net.

Parameter names are chosen so that ``unet.<state_dict_key>`` and
``cutnet.<state_dict_key>`` are exactly the tensor names of the published
weight table, and the layer conventions (cross-correlation weights
[out,in,*k], transposed weights [in,out,*k], the channel mix as
h_out = h_in^T @ w2 + b2) match it too.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn


class DoubleConv(nn.Module):
    def __init__(self, cin: int, cout: int):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, 3, padding=1)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=1)

    def forward(self, x):
        return torch.relu(self.conv2(torch.relu(self.conv1(x))))


class SmallUNet(nn.Module):
    """3-level U-Net, 8/16/32 channels, logits out, size-preserving."""

    def __init__(self):
        super().__init__()
        self.enc1 = DoubleConv(1, 8)
        self.enc2 = DoubleConv(8, 16)
        self.enc3 = DoubleConv(16, 32)
        self.pool = nn.MaxPool2d(2)
        self.up2 = nn.ConvTranspose2d(32, 16, 2, stride=2)
        self.dec2 = DoubleConv(32, 16)
        self.up1 = nn.ConvTranspose2d(16, 8, 2, stride=2)
        self.dec1 = DoubleConv(16, 8)
        self.out = nn.Conv2d(8, 1, 1)

    def forward(self, x):
        e1 = self.enc1(x)
        e2 = self.enc2(self.pool(e1))
        e3 = self.enc3(self.pool(e2))
        d2 = self.dec2(torch.cat([self.up2(e3), e2], dim=1))
        d1 = self.dec1(torch.cat([self.up1(d2), e1], dim=1))
        return self.out(d1)


class Cutnet(nn.Module):
    """Adaptive subtraction + per-row cut classification over U-Net logits."""

    def __init__(self, input_height: int = 512):
        super().__init__()
        self.input_height = input_height
        self.w1 = nn.Parameter(torch.zeros(input_height))
        self.b1 = nn.Parameter(torch.zeros(1))
        self.v1 = nn.Conv1d(1, 8, 5, stride=2, padding=2, bias=False)
        self.v2 = nn.Conv1d(8, 16, 5, stride=2, padding=2, bias=False)
        self.v3 = nn.Conv1d(16, 32, 5, stride=2, padding=2, bias=False)
        self.v4 = nn.Conv1d(32, 32, 5, stride=1, padding=2, bias=False)
        self.w2 = nn.Parameter(torch.zeros(32, 32))
        self.b2 = nn.Parameter(torch.zeros(32))
        self.v5 = nn.Conv1d(32, 32, 3, stride=1, padding=1, bias=False)
        self.u1 = nn.ConvTranspose1d(32, 16, 4, stride=2, padding=1, bias=False)
        self.u2 = nn.ConvTranspose1d(16, 8, 4, stride=2, padding=1, bias=False)
        self.u3 = nn.ConvTranspose1d(8, 1, 4, stride=2, padding=1, bias=False)
        self._init()

    def _init(self):
        # w1 starts at zero but b1 slightly positive: the subtraction ReLU
        # must be active at init or its gradient is dead (relu'(0) == 0).
        gen = torch.Generator().manual_seed(0)
        with torch.no_grad():
            self.w1.zero_()
            self.b1.fill_(0.1)
            self.w2.copy_(torch.randn(self.w2.shape, generator=gen) * 0.02)
            self.b2.zero_()
        for conv in (self.v1, self.v2, self.v3, self.v4, self.v5,
                     self.u1, self.u2, self.u3):
            std = 1.0 / np.sqrt(conv.weight[0].numel())
            if conv is self.v1:
                std /= 256.0  # raw row sums are O(width/2); keep tanh unsaturated
            with torch.no_grad():
                conv.weight.copy_(torch.randn(conv.weight.shape, generator=gen) * std)

    def subtract(self, x):
        # x: (B, H, W) logits; s is one non-negative scalar per sample
        row_sums = x.sum(dim=2)
        s = torch.relu(row_sums @ self.w1 + self.b1)
        return torch.sigmoid(x - s[:, None, None]), s

    def classify(self, y):
        h = y.sum(dim=2)[:, None, :]            # (B, 1, H)
        h = self.v4(self.v3(self.v2(self.v1(h))))
        h = torch.tanh(h)
        h = torch.einsum("bcl,cd->bdl", h, self.w2) + self.b2[None, :, None]
        h = self.v5(h)
        h = self.u3(self.u2(self.u1(h)))
        return torch.sigmoid(h[:, 0, :])         # (B, H)

    def forward(self, x):
        y, _ = self.subtract(x)
        return self.classify(y)


def export_tensors(unet: SmallUNet | None = None,
                   cutnet: Cutnet | None = None) -> dict[str, np.ndarray]:
    """State dicts renamed to the published weight-table names."""
    out: dict[str, np.ndarray] = {}
    if unet is not None:
        for key, value in unet.state_dict().items():
            out[f"unet.{key}"] = value.detach().cpu().to(torch.float32).numpy()
    if cutnet is not None:
        for key, value in cutnet.state_dict().items():
            out[f"cutnet.{key}"] = value.detach().cpu().to(torch.float32).numpy()
    return out


def load_unet(tensors: dict[str, np.ndarray]) -> SmallUNet:
    model = SmallUNet()
    state = {k[len("unet."):]: torch.from_numpy(np.array(v))
             for k, v in tensors.items() if k.startswith("unet.")}
    model.load_state_dict(state)
    return model
