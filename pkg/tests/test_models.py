"""Tests for the backbone, fusion, decoder and the assembled network."""

import itertools

import pytest
import torch
from torch import nn
from torchvision.models.vgg import cfgs

from src.core.schemas import BackboneConfig
from src.models.backbone import LEVEL_CHANNELS, FeaturePyramid, build_backbone
from src.models.decoder import ChangeDecoder, predict_binary
from src.models.fusion import ChangeMap, HierarchicalFusion, make_guide
from src.models.hcgmnet import HCGMNet

RANDOM_FULL = BackboneConfig(pretrained=False)
RANDOM_NARROW = BackboneConfig(pretrained=False, width_divisor=8)
SIZES = (32, 64, 128, 256)


def random_pyramid(batch: int, height: int, width: int, divisor: int = 1):
    """Pyramid-shaped random tensors (levels 1-5), without running a backbone."""
    return FeaturePyramid(
        *(
            torch.randn(batch, c // divisor, height // s, width // s)
            for c, s in zip(LEVEL_CHANNELS, (1, 2, 4, 8, 16))
        )
    )


@pytest.fixture(scope="module")
def full_backbone():
    torch.manual_seed(0)
    return build_backbone(RANDOM_FULL).eval()


class TestBackbone:
    """Test the siamese VGG-16-BN trunk."""

    def test_pyramid_shapes_at_256(self, full_backbone):
        with torch.no_grad():
            pyramid = full_backbone.extract(torch.randn(3, 256, 256))
        assert [tuple(level.shape) for level in pyramid] == [
            (64, 256, 256),
            (128, 128, 128),
            (256, 64, 64),
            (512, 32, 32),
            (512, 16, 16),
        ]

    def test_smallest_input(self, full_backbone):
        with torch.no_grad():
            pyramid = full_backbone.extract(torch.randn(3, 16, 16))
        assert tuple(pyramid.level5.shape) == (512, 1, 1)

    def test_indivisible_size_is_rejected(self, full_backbone):
        with pytest.raises(ValueError, match="divisible by 16"):
            full_backbone.extract(torch.randn(3, 40, 48))

    def test_identical_inputs_give_identical_pyramids(self, full_backbone):
        x = torch.randn(1, 3, 32, 32)
        with torch.no_grad():
            pa, pb = full_backbone(x, x.clone())
        for a, b in zip(pa, pb):
            assert torch.equal(a, b)

    def test_seeded_random_init_is_deterministic(self):
        torch.manual_seed(5)
        first = build_backbone(RANDOM_NARROW).state_dict()
        torch.manual_seed(5)
        second = build_backbone(RANDOM_NARROW).state_dict()
        assert first.keys() == second.keys()
        for name in first:
            assert torch.equal(first[name], second[name])

    def test_trunk_parameter_count(self, full_backbone):
        """Conv + BN parameters equal the count derived from the layer list."""
        expected, c_in = 0, 3
        for v in cfgs["D"]:
            if v == "M":
                continue
            expected += 3 * 3 * c_in * v + v + 2 * v
            c_in = v
        assert expected == 14_723_136
        assert sum(p.numel() for p in full_backbone.parameters()) == expected

    def test_block_boundaries(self, full_backbone):
        blocks = full_backbone.blocks
        assert len(blocks) == 5
        assert sum(len(b) for b in blocks) == 43
        for k, block in enumerate(blocks, start=1):
            assert isinstance(block[-1], nn.ReLU)
            assert isinstance(block[0], nn.MaxPool2d) == (k > 1)

    def test_canonical_parameter_names(self):
        model = HCGMNet(RANDOM_NARROW)
        names = set(model.state_dict())
        assert "backbone.block1.0.weight" in names
        assert "fusion.level5.0.weight" in names
        assert "fusion.aggregate.0.weight" in names
        assert "fusion.coarse_head.weight" in names
        assert {f"cgm3.{p}.weight" for p in ("q", "k", "v", "o")} <= names
        assert "cgm5.fuse.0.weight" in names

    def test_shared_weights_serve_both_streams(self):
        torch.manual_seed(0)
        backbone = build_backbone(RANDOM_NARROW).eval()
        x = torch.randn(1, 3, 32, 32)
        with torch.no_grad():
            before = backbone.extract(x).level5
            backbone.block5[-3].weight.mul_(2.0)  # last conv of block 5
            pa, pb = backbone(x, x)
            single = backbone.extract(x)
        assert not torch.equal(before, pa.level5)
        assert torch.equal(pa.level5, pb.level5)
        assert torch.equal(pa.level5, single.level5)

    @pytest.mark.parametrize("height, width", list(itertools.product(SIZES, SIZES)))
    def test_stride_halves_between_levels(self, height, width):
        torch.manual_seed(0)
        backbone = build_backbone(RANDOM_NARROW).eval()
        with torch.no_grad():
            pyramid = backbone.extract(torch.randn(1, 3, height, width))
        for k, level in enumerate(pyramid):
            assert tuple(level.shape[-2:]) == (height >> k, width >> k)

    def test_frozen_trunk_has_no_gradients(self):
        backbone = build_backbone(BackboneConfig(pretrained=False, frozen=True, width_divisor=8))
        assert not any(p.requires_grad for p in backbone.parameters())


class TestFusion:
    """Test temporal fusion, multi-scale aggregation and guide maps."""

    def test_fused_schedule_at_256(self):
        fusion = HierarchicalFusion().eval()
        with torch.no_grad():
            fused, multi = fusion(random_pyramid(1, 256, 256), random_pyramid(1, 256, 256))
        assert [tuple(f.shape[1:]) for f in fused] == [
            (128, 128, 128),
            (256, 64, 64),
            (512, 32, 32),
            (512, 16, 16),
        ]
        assert tuple(multi.aggregate.shape[1:]) == (512, 128, 128)
        assert tuple(multi.coarse.logits.shape[1:]) == (1, 256, 256)
        assert multi.coarse.stride == 1
        assert tuple(multi.guide_logits.shape[1:]) == (1, 128, 128)

    def test_aggregate_concatenates_1408_channels(self):
        fusion = HierarchicalFusion()
        assert fusion.aggregate[0].in_channels == 128 + 256 + 512 + 512
        assert fusion.level5[0].in_channels == 1024

    def test_batch_is_preserved(self):
        fusion = HierarchicalFusion(width_divisor=8).eval()
        with torch.no_grad():
            fused = fusion.fuse_temporal(random_pyramid(8, 32, 32, 8), random_pyramid(8, 32, 32, 8))
        assert all(f.shape[0] == 8 for f in fused)

    def test_identical_pyramids_are_deterministic(self):
        fusion = HierarchicalFusion(width_divisor=8).eval()
        p = random_pyramid(1, 32, 32, 8)
        with torch.no_grad():
            first = fusion.fuse_temporal(p, p)
            second = fusion.fuse_temporal(p, p)
        for a, b in zip(first, second):
            assert torch.equal(a, b)

    def test_shape_mismatch_is_rejected(self):
        fusion = HierarchicalFusion(width_divisor=8)
        with pytest.raises(ValueError):
            fusion.fuse_temporal(random_pyramid(1, 32, 32, 8), random_pyramid(1, 64, 64, 8))

    def test_zero_head_gives_half_probability(self):
        fusion = HierarchicalFusion(width_divisor=8).eval()
        nn.init.zeros_(fusion.coarse_head.weight)
        nn.init.zeros_(fusion.coarse_head.bias)
        with torch.no_grad():
            _, multi = fusion(random_pyramid(2, 32, 32, 8), random_pyramid(2, 32, 32, 8))
        assert torch.equal(multi.coarse.probabilities, torch.full_like(multi.coarse.logits, 0.5))

    @pytest.mark.parametrize("height, width", list(itertools.product(SIZES, SIZES)))
    def test_aggregate_shape_depends_only_on_input_size(self, height, width):
        fusion = HierarchicalFusion(width_divisor=8).eval()
        with torch.no_grad():
            _, multi = fusion(
                random_pyramid(1, height, width, 8), random_pyramid(1, height, width, 8)
            )
        assert tuple(multi.aggregate.shape) == (1, 64, height // 2, width // 2)
        assert tuple(multi.coarse.logits.shape) == (1, 1, height, width)

    @pytest.mark.parametrize("stride", [4, 8, 16])
    def test_zero_logits_give_half_guide(self, stride):
        guide = make_guide(torch.zeros(1, 1, 128, 128), stride)
        assert tuple(guide.shape) == (1, 1, 256 // stride, 256 // stride)
        assert torch.equal(guide, torch.full_like(guide, 0.5))

    @pytest.mark.parametrize("stride", [4, 8, 16])
    def test_large_logits_give_guide_near_one(self, stride):
        guide = make_guide(torch.full((1, 1, 64, 64), 30.0), stride)
        assert torch.all(guide > 1 - 1e-6)
        assert torch.all(guide <= 1.0)

    def test_guide_stays_in_unit_interval(self):
        guide = make_guide(torch.randn(2, 1, 32, 32) * 2, 8)
        assert torch.all(guide > 0) and torch.all(guide < 1)

    def test_checkerboard_downsample_averages_sigmoids(self):
        """Bilinear 2× downsampling averages each 2×2 block of sigmoids."""
        logits = torch.tensor(
            [[1.0, -2.0, 0.5, 3.0], [-1.0, 2.0, -0.5, -3.0], [4.0, 0.0, 1.5, 2.5], [0.0, -4.0, 1.0, -1.0]],
            dtype=torch.float64,
        ).view(1, 1, 4, 4)
        guide = make_guide(logits, 4)
        probs = torch.sigmoid(logits)[0, 0]
        for i in range(2):
            for j in range(2):
                block = probs[2 * i : 2 * i + 2, 2 * j : 2 * j + 2]
                assert guide[0, 0, i, j].item() == pytest.approx(block.mean().item(), abs=1e-12)

    def test_invalid_guide_stride(self):
        with pytest.raises(ValueError):
            make_guide(torch.zeros(1, 1, 8, 8), 2)


class TestDecoder:
    """Test the top-down decoder and thresholding."""

    def _inputs(self, batch: int, size: int, divisor: int = 8):
        return (
            torch.randn(batch, 256 // divisor, size // 4, size // 4),
            torch.randn(batch, 512 // divisor, size // 8, size // 8),
            torch.randn(batch, 512 // divisor, size // 16, size // 16),
            torch.randn(batch, 128 // divisor, size // 2, size // 2),
        )

    def test_state_schedule(self):
        decoder = ChangeDecoder().eval()
        with torch.no_grad():
            state = decoder.decode(*self._inputs(1, 256, divisor=1))
        assert tuple(state.d5.shape[1:]) == (512, 16, 16)
        assert tuple(state.d4.shape[1:]) == (512, 32, 32)
        assert tuple(state.d3.shape[1:]) == (256, 64, 64)
        assert tuple(state.final.logits.shape[1:]) == (1, 256, 256)
        assert state.final.stride == 1

    def test_zero_classifier_gives_half_probability(self):
        decoder = ChangeDecoder(width_divisor=8).eval()
        nn.init.zeros_(decoder.classifier.weight)
        nn.init.zeros_(decoder.classifier.bias)
        with torch.no_grad():
            final = decoder(*self._inputs(2, 64))
        assert torch.equal(final.probabilities, torch.full_like(final.logits, 0.5))

    def test_batch_of_eight(self):
        decoder = ChangeDecoder(width_divisor=8).eval()
        with torch.no_grad():
            state = decoder.decode(*self._inputs(8, 32))
        assert all(t.shape[0] == 8 for t in (state.d5, state.d4, state.d3, state.final.logits))

    def test_shape_mismatch_is_rejected(self):
        cgm3, cgm4, cgm5, fused2 = self._inputs(1, 64)
        with pytest.raises(ValueError):
            ChangeDecoder(width_divisor=8).decode(cgm3, cgm4, cgm5, fused2[..., :16, :16])


class TestPredictBinary:
    """Test thresholding of change logits."""

    def test_zero_logits_are_unchanged(self):
        assert predict_binary(ChangeMap(torch.zeros(1, 1, 4, 4), 1)).sum() == 0

    def test_large_logits_are_changed(self):
        assert torch.all(predict_binary(torch.full((1, 1, 4, 4), 10.0)) == 1)

    def test_matches_elementwise_oracle(self):
        logits = torch.randn(2, 1, 8, 8) * 3
        binary = predict_binary(logits, 0.3)
        probs = torch.sigmoid(logits)
        for idx in itertools.product(range(2), range(1), range(8), range(8)):
            assert binary[idx].item() == int(probs[idx].item() > 0.3)

    def test_raising_threshold_never_adds_pixels(self):
        logits = torch.randn(1, 1, 16, 16) * 2
        counts = [int(predict_binary(logits, t).sum()) for t in (0.1, 0.3, 0.5, 0.7, 0.9)]
        assert counts == sorted(counts, reverse=True)

    @pytest.mark.parametrize("threshold", [0.0, 1.0, -0.5])
    def test_threshold_must_be_open_unit_interval(self, threshold):
        with pytest.raises(ValueError):
            predict_binary(torch.zeros(1, 1, 2, 2), threshold)


class TestNetwork:
    """Test the assembled network."""

    def test_full_width_outputs_at_256(self):
        torch.manual_seed(0)
        model = HCGMNet(RANDOM_FULL).eval()
        with torch.no_grad():
            out = model(torch.randn(1, 3, 256, 256), torch.randn(1, 3, 256, 256))
        assert tuple(out.coarse.logits.shape) == (1, 1, 256, 256)
        assert tuple(out.final.logits.shape) == (1, 1, 256, 256)
        assert out.coarse.stride == out.final.stride == 1

    @pytest.mark.parametrize("height, width", list(itertools.product(SIZES, SIZES)))
    def test_two_stride_one_outputs_for_every_size(self, height, width):
        torch.manual_seed(0)
        model = HCGMNet(RANDOM_NARROW).eval()
        with torch.no_grad():
            out = model(torch.randn(2, 3, height, width), torch.randn(2, 3, height, width))
        assert len(out) == 2
        for change_map in out:
            assert tuple(change_map.logits.shape) == (2, 1, height, width)
