"""Change Guide Module: guide-fused, channel-compressed spatial self-attention."""

import math

import torch
from torch import nn

from src.models.blocks import ConvBlock

COMPRESSION = 8


class ChangeGuideModule(nn.Module):
    """Y = X + attention(guide_fuse(X, g)).

    Query, key and value are 1×1 projections to C/8 channels, scores are
    scaled by sqrt(C/8) and softmax-normalized over the h·w keys, and a 1×1
    projection maps the attended values back to C channels.
    """

    def __init__(self, channels: int):
        super().__init__()
        if channels % COMPRESSION:
            raise ValueError(f"CGM channels must be divisible by {COMPRESSION}, got {channels}")
        self.channels = channels
        self.d_head = channels // COMPRESSION
        self.fuse = ConvBlock(channels + 1, channels)
        self.q = nn.Conv2d(channels, self.d_head, kernel_size=1)
        self.k = nn.Conv2d(channels, self.d_head, kernel_size=1)
        self.v = nn.Conv2d(channels, self.d_head, kernel_size=1)
        self.o = nn.Conv2d(self.d_head, channels, kernel_size=1)

    def guide_fuse(self, x: torch.Tensor, guide: torch.Tensor) -> torch.Tensor:
        if x.shape[-2:] != guide.shape[-2:]:
            raise ValueError(
                f"Guide {tuple(guide.shape[-2:])} does not match features {tuple(x.shape[-2:])}"
            )
        return self.fuse(torch.cat([x, guide], dim=1))

    def attention_weights(self, x: torch.Tensor) -> torch.Tensor:
        """Row-stochastic B×N×N attention matrix over the N = h·w tokens."""
        q = self.q(x).flatten(2).transpose(1, 2)  # B×N×d
        k = self.k(x).flatten(2)  # B×d×N
        scores = torch.bmm(q, k) / math.sqrt(self.d_head)
        # softmax subtracts the row max internally
        return torch.softmax(scores, dim=-1)

    def attention(self, x: torch.Tensor) -> torch.Tensor:
        b, _, h, w = x.shape
        weights = self.attention_weights(x)
        v = self.v(x).flatten(2).transpose(1, 2)  # B×N×d
        attended = torch.bmm(weights, v).transpose(1, 2).reshape(b, self.d_head, h, w)
        return self.o(attended)

    def forward(self, x: torch.Tensor, guide: torch.Tensor) -> torch.Tensor:
        return x + self.attention(self.guide_fuse(x, guide))
