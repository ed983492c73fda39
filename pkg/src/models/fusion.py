"""Temporal fusion of the two pyramids, multi-scale aggregation and the coarse map."""

from dataclasses import dataclass
from typing import NamedTuple

import torch
from torch import nn

from src.models.backbone import FeaturePyramid, level_channels
from src.models.blocks import ConvBlock, resize, upsample2x

GUIDE_STRIDES = (4, 8, 16)
# Stride of the aggregate and of the coarse logits before the final upsample
AGGREGATE_STRIDE = 2


@dataclass(frozen=True)
class ChangeMap:
    """Single-channel change logits (B×1×h×w) at a stride relative to the input."""

    logits: torch.Tensor
    stride: int

    @property
    def probabilities(self) -> torch.Tensor:
        return torch.sigmoid(self.logits)


class FusedPyramid(NamedTuple):
    """Temporal-fused levels 2-5 at strides 2, 4, 8, 16."""

    fused2: torch.Tensor
    fused3: torch.Tensor
    fused4: torch.Tensor
    fused5: torch.Tensor


class MultiscaleOutput(NamedTuple):
    aggregate: torch.Tensor
    coarse: ChangeMap
    guide_logits: torch.Tensor  # coarse logits at stride 2, before upsampling


def make_guide(coarse_logits: torch.Tensor, stride: int) -> torch.Tensor:
    """Sigmoid of the stride-2 coarse logits, resampled to the given stride.

    Raises:
        ValueError: If stride is not one of 4, 8, 16
    """
    if stride not in GUIDE_STRIDES:
        raise ValueError(f"Guide stride must be one of {GUIDE_STRIDES}, got {stride}")
    factor = stride // AGGREGATE_STRIDE
    h, w = coarse_logits.shape[-2:]
    return resize(torch.sigmoid(coarse_logits), (h // factor, w // factor))


class HierarchicalFusion(nn.Module):
    """Concat-and-conv fusion of levels 2-5, then a multi-scale aggregate.

    The aggregate is the concatenation of all four fused levels upsampled to
    level 2, reduced by a conv block; a 1×1 head turns it into coarse logits.
    """

    def __init__(self, width_divisor: int = 1):
        super().__init__()
        channels = level_channels(width_divisor)[1:]
        self.channels = channels
        for k, c in enumerate(channels, start=2):
            self.add_module(f"level{k}", ConvBlock(2 * c, c))
        self.aggregate_channels = 512 // width_divisor
        self.aggregate = ConvBlock(sum(channels), self.aggregate_channels)
        self.coarse_head = nn.Conv2d(self.aggregate_channels, 1, kernel_size=1)

    def fuse_temporal(self, pyramid_a: FeaturePyramid, pyramid_b: FeaturePyramid) -> FusedPyramid:
        """Channel-concatenate the two dates per level and reduce back to C_i.

        Raises:
            ValueError: If the pyramids' shapes differ
        """
        fused = []
        for k in range(2, 6):
            a = getattr(pyramid_a, f"level{k}")
            b = getattr(pyramid_b, f"level{k}")
            if a.shape != b.shape:
                raise ValueError(f"Pyramid shape mismatch at level {k}: {a.shape} vs {b.shape}")
            fused.append(getattr(self, f"level{k}")(torch.cat([a, b], dim=1)))
        return FusedPyramid(*fused)

    def aggregate_multiscale(self, fused: FusedPyramid) -> MultiscaleOutput:
        size = tuple(fused.fused2.shape[-2:])
        stacked = torch.cat([resize(f, size) for f in fused], dim=1)
        aggregate = self.aggregate(stacked)
        guide_logits = self.coarse_head(aggregate)
        coarse = ChangeMap(upsample2x(guide_logits), stride=1)
        return MultiscaleOutput(aggregate, coarse, guide_logits)

    def forward(self, pyramid_a: FeaturePyramid, pyramid_b: FeaturePyramid):
        fused = self.fuse_temporal(pyramid_a, pyramid_b)
        return fused, self.aggregate_multiscale(fused)
