"""Siamese hierarchical feature extractor on a VGG-16-BN trunk."""

from typing import NamedTuple, Tuple

import torch
from torch import nn
from torchvision.models import VGG16_BN_Weights, vgg16_bn
from torchvision.models.vgg import cfgs, make_layers

from src.core.errors import PretrainedWeightsUnavailableError
from src.core.schemas import BackboneConfig

# Layer-index ranges over the 43-entry VGG-16-BN feature list (final pool excluded).
# Each block ends on a ReLU; blocks 2-5 start with the max-pool.
BLOCK_BOUNDS: Tuple[Tuple[int, int], ...] = ((0, 6), (6, 13), (13, 23), (23, 33), (33, 43))
LEVEL_CHANNELS = (64, 128, 256, 512, 512)
LEVEL_STRIDES = (1, 2, 4, 8, 16)
REQUIRED_DIVISOR = 16


class FeaturePyramid(NamedTuple):
    """Per-level features (B×C×h×w) at strides 1, 2, 4, 8, 16."""

    level1: torch.Tensor
    level2: torch.Tensor
    level3: torch.Tensor
    level4: torch.Tensor
    level5: torch.Tensor


def level_channels(width_divisor: int = 1) -> Tuple[int, ...]:
    return tuple(c // width_divisor for c in LEVEL_CHANNELS)


def check_spatial_size(height: int, width: int) -> None:
    """Reject inputs the five-level pyramid cannot halve cleanly."""
    if height % REQUIRED_DIVISOR or width % REQUIRED_DIVISOR:
        raise ValueError(
            f"Input size {height}x{width} must be divisible by {REQUIRED_DIVISOR}"
        )


def _init_like_torchvision(module: nn.Module) -> None:
    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            nn.init.kaiming_normal_(m.weight, mode="fan_out", nonlinearity="relu")
            if m.bias is not None:
                nn.init.constant_(m.bias, 0)
        elif isinstance(m, nn.BatchNorm2d):
            nn.init.constant_(m.weight, 1)
            nn.init.constant_(m.bias, 0)


def _feature_layers(config: BackboneConfig) -> list[nn.Module]:
    if config.pretrained:
        try:
            features = vgg16_bn(weights=VGG16_BN_Weights.IMAGENET1K_V1).features
        except Exception as e:
            raise PretrainedWeightsUnavailableError(
                f"Could not load VGG16_BN ImageNet weights: {e}"
            ) from e
    else:
        layer_cfg = [v if v == "M" else v // config.width_divisor for v in cfgs["D"]]
        features = make_layers(layer_cfg, batch_norm=True)
        _init_like_torchvision(features)
    return list(features.children())[: BLOCK_BOUNDS[-1][1]]


class SiameseBackbone(nn.Module):
    """Five VGG-16-BN blocks applied with shared weights to both dates.

    Parameters are registered as ``block<k>.<layer index within block>``.
    """

    def __init__(self, config: BackboneConfig):
        super().__init__()
        self.config = config
        layers = _feature_layers(config)
        for k, (start, stop) in enumerate(BLOCK_BOUNDS, start=1):
            self.add_module(f"block{k}", nn.Sequential(*layers[start:stop]))
        self.channels = level_channels(config.width_divisor)
        if config.frozen:
            for p in self.parameters():
                p.requires_grad_(False)

    @property
    def blocks(self) -> list[nn.Sequential]:
        return [getattr(self, f"block{k}") for k in range(1, len(BLOCK_BOUNDS) + 1)]

    def extract(self, image: torch.Tensor) -> FeaturePyramid:
        """Run one image (3×H×W) or batch (B×3×H×W) through the five blocks."""
        single = image.dim() == 3
        x = image.unsqueeze(0) if single else image
        check_spatial_size(x.shape[-2], x.shape[-1])
        levels = []
        for block in self.blocks:
            x = block(x)
            levels.append(x.squeeze(0) if single else x)
        return FeaturePyramid(*levels)

    def forward(
        self, image_a: torch.Tensor, image_b: torch.Tensor
    ) -> Tuple[FeaturePyramid, FeaturePyramid]:
        return self.extract(image_a), self.extract(image_b)


def build_backbone(config: BackboneConfig) -> SiameseBackbone:
    """Build the trunk; random init is seeded by the caller's torch RNG state.

    Raises:
        PretrainedWeightsUnavailableError: If pretrained weights can't be loaded
    """
    return SiameseBackbone(config)
