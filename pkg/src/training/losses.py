"""Cross-entropy plus dice objective applied to the coarse and final maps."""

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from src.models.fusion import ChangeMap

# Added to numerator and denominator: an empty target predicted empty costs 0
DICE_SMOOTH = 1.0
LOG_COLUMNS = ("step", "ce_coarse", "dice_coarse", "ce_final", "dice_final", "total")


def _check_shapes(pred: torch.Tensor, target: torch.Tensor) -> None:
    if pred.shape != target.shape:
        raise ValueError(f"Prediction {tuple(pred.shape)} and target {tuple(target.shape)} differ")


def dice_loss(pred: torch.Tensor, target: torch.Tensor, smooth: float = DICE_SMOOTH) -> torch.Tensor:
    """1 - (2·Σyŷ + ε) / (Σy + Σŷ + ε) over every pixel of the batch.

    Args:
        pred: Probabilities in [0, 1]
        target: Binary labels with pred's shape
        smooth: ε; 0 gives the unsmoothed ratio
    """
    _check_shapes(pred, target)
    pred, target = pred.flatten(), target.flatten().to(pred.dtype)
    overlap = (pred * target).sum()
    return 1.0 - (2.0 * overlap + smooth) / (target.sum() + pred.sum() + smooth)


def bce_loss(logits: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean binary cross-entropy on logits, in the log-sum-exp stable form."""
    _check_shapes(logits, target)
    return F.binary_cross_entropy_with_logits(logits, target.to(logits.dtype))


@dataclass(frozen=True)
class LossBreakdown:
    """The four equally weighted loss terms and their sum (tensors)."""

    ce_coarse: torch.Tensor
    dice_coarse: torch.Tensor
    ce_final: torch.Tensor
    dice_final: torch.Tensor

    @property
    def total(self) -> torch.Tensor:
        return self.ce_coarse + self.dice_coarse + self.ce_final + self.dice_final

    def as_row(self, step: int) -> dict[str, float]:
        """Detached floats keyed by the training-log CSV columns."""
        values = (self.ce_coarse, self.dice_coarse, self.ce_final, self.dice_final, self.total)
        return {"step": step, **{k: float(v.detach()) for k, v in zip(LOG_COLUMNS[1:], values)}}


def total_loss(coarse: ChangeMap, final: ChangeMap, target: torch.Tensor) -> LossBreakdown:
    """[bce + dice](coarse) + [bce + dice](final) with unit weights.

    Args:
        coarse: Stride-1 coarse map (B×1×H×W logits)
        final: Stride-1 final map (B×1×H×W logits)
        target: B×H×W or B×1×H×W binary labels
    """
    if coarse.stride != 1 or final.stride != 1:
        raise ValueError("Both supervised maps must be at stride 1")
    if target.dim() == coarse.logits.dim() - 1:
        target = target.unsqueeze(1)
    return LossBreakdown(
        ce_coarse=bce_loss(coarse.logits, target),
        dice_coarse=dice_loss(coarse.probabilities, target),
        ce_final=bce_loss(final.logits, target),
        dice_final=dice_loss(final.probabilities, target),
    )
