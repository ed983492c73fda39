"""Top-down decoder merging the three CGM outputs into the final change map."""

from typing import NamedTuple

import torch
from torch import nn

from src.models.backbone import level_channels
from src.models.blocks import ConvBlock, upsample2x
from src.models.fusion import ChangeMap


class DecoderState(NamedTuple):
    d5: torch.Tensor
    d4: torch.Tensor
    d3: torch.Tensor
    final: ChangeMap


class ChangeDecoder(nn.Module):
    def __init__(self, width_divisor: int = 1):
        super().__init__()
        _, c2, c3, c4, c5 = level_channels(width_divisor)
        self.merge4 = ConvBlock(c4 + c5, c4)
        self.merge3 = ConvBlock(c3 + c4, c3)
        self.head = ConvBlock(c2 + c3, c2)
        self.classifier = nn.Conv2d(c2, 1, kernel_size=1)

    def decode(
        self,
        cgm3: torch.Tensor,
        cgm4: torch.Tensor,
        cgm5: torch.Tensor,
        fused2: torch.Tensor,
    ) -> DecoderState:
        h, w = cgm5.shape[-2:]
        for name, x, factor in (("cgm4", cgm4, 2), ("cgm3", cgm3, 4), ("fused2", fused2, 8)):
            if tuple(x.shape[-2:]) != (h * factor, w * factor):
                raise ValueError(
                    f"{name} is {tuple(x.shape[-2:])}, expected {(h * factor, w * factor)}"
                )
        d5 = cgm5
        d4 = self.merge4(torch.cat([cgm4, upsample2x(d5)], dim=1))
        d3 = self.merge3(torch.cat([cgm3, upsample2x(d4)], dim=1))
        head = self.head(torch.cat([fused2, upsample2x(d3)], dim=1))
        logits = upsample2x(self.classifier(head))
        return DecoderState(d5, d4, d3, ChangeMap(logits, stride=1))

    def forward(self, cgm3, cgm4, cgm5, fused2) -> ChangeMap:
        return self.decode(cgm3, cgm4, cgm5, fused2).final


def predict_binary(change_map: ChangeMap | torch.Tensor, threshold: float = 0.5) -> torch.Tensor:
    """1 where sigmoid(logit) > threshold (ties are unchanged), else 0.

    Raises:
        ValueError: If threshold is outside (0, 1)
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    logits = change_map.logits if isinstance(change_map, ChangeMap) else change_map
    return (torch.sigmoid(logits) > threshold).to(torch.uint8)
