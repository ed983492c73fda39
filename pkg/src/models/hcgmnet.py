"""The full change-detection network: backbone, fusion, three CGMs, decoder."""

from typing import NamedTuple

import torch
from torch import nn

from src.core.schemas import BackboneConfig, TrainConfig
from src.models.backbone import build_backbone
from src.models.cgm import ChangeGuideModule
from src.models.decoder import ChangeDecoder
from src.models.fusion import ChangeMap, HierarchicalFusion, make_guide


class NetworkOutput(NamedTuple):
    """The two supervised maps, both at stride 1."""

    coarse: ChangeMap
    final: ChangeMap


class HCGMNet(nn.Module):
    """Siamese VGG-16-BN encoder guided by its own coarse change map.

    CGMs 3, 4 and 5 refine fused levels at strides 4, 8 and 16, each guided by
    the same coarse map resampled to its resolution.
    """

    def __init__(self, config: BackboneConfig):
        super().__init__()
        d = config.width_divisor
        self.backbone = build_backbone(config)
        self.fusion = HierarchicalFusion(d)
        _, _, c3, c4, c5 = self.backbone.channels
        self.cgm3 = ChangeGuideModule(c3)
        self.cgm4 = ChangeGuideModule(c4)
        self.cgm5 = ChangeGuideModule(c5)
        self.decoder = ChangeDecoder(d)

    def forward(self, image_a: torch.Tensor, image_b: torch.Tensor) -> NetworkOutput:
        pyramid_a, pyramid_b = self.backbone(image_a, image_b)
        fused, multiscale = self.fusion(pyramid_a, pyramid_b)
        guide = multiscale.guide_logits
        cgm3 = self.cgm3(fused.fused3, make_guide(guide, 4))
        cgm4 = self.cgm4(fused.fused4, make_guide(guide, 8))
        cgm5 = self.cgm5(fused.fused5, make_guide(guide, 16))
        final = self.decoder(cgm3, cgm4, cgm5, fused.fused2)
        return NetworkOutput(coarse=multiscale.coarse, final=final)


def build_model(config: TrainConfig | BackboneConfig) -> HCGMNet:
    if isinstance(config, TrainConfig):
        config = config.backbone_config()
    return HCGMNet(config)
