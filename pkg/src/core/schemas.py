"""Pydantic schemas for configuration, datasets, metrics and checkpoints."""

from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    field_validator,
    model_validator,
)

# Channel divisors that keep every level integral and every CGM divisible by 8
ALLOWED_WIDTH_DIVISORS = (1, 2, 4, 8, 16, 32)


class Split(str, Enum):
    """Dataset splits."""

    TRAIN = "train"
    VAL = "val"
    TEST = "test"


class BackboneConfig(BaseModel):
    """Options for the siamese VGG-16-BN trunk."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    pretrained: bool = Field(True, description="Load published ImageNet weights")
    frozen: bool = Field(False, description="Disable gradients on the trunk")
    width_divisor: int = Field(1, description="Divide every channel count by this")

    @field_validator("width_divisor")
    @classmethod
    def _check_divisor(cls, value: int) -> int:
        if value not in ALLOWED_WIDTH_DIVISORS:
            raise ValueError(f"width_divisor must be one of {ALLOWED_WIDTH_DIVISORS}")
        return value

    @model_validator(mode="after")
    def _pretrained_needs_full_width(self) -> "BackboneConfig":
        if self.pretrained and self.width_divisor != 1:
            raise ValueError("pretrained weights only exist for width_divisor=1")
        return self


class TrainConfig(BaseModel):
    """Optimizer, schedule, data and architecture hyperparameters.

    Defaults follow the published recipe: AdamW, lr 5e-4, weight decay 0.0025,
    batch size 8, 50 epochs. Unknown keys are rejected.
    """

    model_config = ConfigDict(extra="forbid")

    learning_rate: PositiveFloat = 5e-4
    weight_decay: PositiveFloat = 0.0025
    batch_size: PositiveInt = 8
    epochs: PositiveInt = 50
    seed: NonNegativeInt = 42
    dataset_root: Path = Path("data/prepared/LEVIR-CD")
    dataset_id: str = Field("LEVIR-CD", description="Dataset name recorded in reports")
    output_dir: Path = Path("runs/levir_cd")
    pretrained: bool = True
    freeze_backbone: bool = False
    tile_size: PositiveInt = 256
    width_divisor: int = 1
    num_workers: NonNegativeInt = 0
    augment: bool = False
    threshold: float = Field(0.5, gt=0.0, lt=1.0)
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: PositiveFloat = 1e-8
    device: str = Field("auto", pattern="^(auto|cpu|cuda)$")
    max_steps: Optional[PositiveInt] = Field(
        None, description="Stop after this many optimizer steps (desk-scale runs)"
    )

    @model_validator(mode="after")
    def _check_architecture(self) -> "TrainConfig":
        # Reuses the backbone rules so both entry points agree
        self.backbone_config()
        if self.tile_size % 16:
            raise ValueError("tile_size must be divisible by 16")
        return self

    def backbone_config(self) -> BackboneConfig:
        return BackboneConfig(
            pretrained=self.pretrained,
            frozen=self.freeze_backbone,
            width_divisor=self.width_divisor,
        )


class DatasetManifest(BaseModel):
    """Sample ids of one prepared split, in lexicographic order."""

    root: Path = Field(..., description="Prepared dataset root")
    split: str = Field(..., description="Split name (train/val/test)")
    ids: List[str] = Field(default_factory=list, description="Sorted sample ids")

    @property
    def count(self) -> int:
        return len(self.ids)

    def sample_paths(self, sample_id: str) -> tuple[Path, Path, Path]:
        """Return the (A, B, label) PNG paths of a sample."""
        base = self.root / self.split
        name = f"{sample_id}.png"
        return base / "A" / name, base / "B" / name, base / "label" / name


class ConfusionMatrix(BaseModel):
    """Pixel agreement counts. Addition is the associative merge."""

    model_config = ConfigDict(frozen=True)

    tp: NonNegativeInt = 0
    fp: NonNegativeInt = 0
    tn: NonNegativeInt = 0
    fn: NonNegativeInt = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            tn=self.tn + other.tn,
            fn=self.fn + other.fn,
        )

    def __radd__(self, other: object) -> "ConfusionMatrix":
        # Lets builtin sum() start from 0
        if other == 0:
            return self
        return NotImplemented


class MetricReport(BaseModel):
    """F1, precision, recall, overall accuracy and IoU as fractions in [0, 1]."""

    model_config = ConfigDict(frozen=True)

    f1: float = Field(..., ge=0.0, le=1.0)
    precision: float = Field(..., ge=0.0, le=1.0)
    recall: float = Field(..., ge=0.0, le=1.0)
    oa: float = Field(..., ge=0.0, le=1.0)
    iou: float = Field(..., ge=0.0, le=1.0)

    def as_percent(self) -> dict[str, float]:
        """Percentages rounded to 2 decimals, as printed in result tables."""
        return {name: round(value * 100.0, 2) for name, value in self.model_dump().items()}


class EvaluationReport(BaseModel):
    """Machine-readable result of one evaluation run."""

    dataset: str
    split: str
    checkpoint: str
    counts: ConfusionMatrix
    scores: MetricReport
    evaluated_at: datetime = Field(default_factory=datetime.now)


class CheckpointMeta(BaseModel):
    """Metadata stored next to checkpoint payloads."""

    epoch: NonNegativeInt
    step: NonNegativeInt
    best_val_f1: Optional[float] = Field(None, description="None without a validation split")
    val_scores: Optional[MetricReport] = None
    params_digest: str = Field(..., description="sha256 over name-ordered tensor bytes")
    config: TrainConfig
    created_at: datetime = Field(default_factory=datetime.now)
