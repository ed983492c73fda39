"""Training and evaluation orchestration."""

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import torch
from rich.console import Console
from torch import nn
from torch.utils.data import DataLoader

from src.core.config_io import write_yaml
from src.core.errors import EmptySplitError, NonFiniteLossError, RasterShapeError
from src.core.raster_io import read_label
from src.core.schemas import (
    CheckpointMeta,
    ConfusionMatrix,
    DatasetManifest,
    EvaluationReport,
    MetricReport,
    TrainConfig,
)
from src.core.seed import seed_everything
from src.data.dataset import ChangeDetectionDataset, check_disjoint, load_manifest
from src.models.decoder import predict_binary
from src.models.hcgmnet import build_model
from src.training.checkpoint import load_checkpoint, save_checkpoint
from src.training.losses import LOG_COLUMNS, total_loss
from src.training.metrics import accumulate, merge_all, scores

console = Console()

TRAIN_LOG = "train_log.csv"
VAL_LOG = "val_log.csv"
VAL_COLUMNS = ("epoch", "step", "f1", "precision", "recall", "oa", "iou")
BEST_DIR = "best"
LAST_DIR = "last"


@dataclass(frozen=True)
class TrainResult:
    best_checkpoint: Path
    last_checkpoint: Path
    best_val_f1: Optional[float]  # None without a validation split
    steps: int
    train_log: Path
    val_log: Path


def resolve_device(name: str) -> torch.device:
    if name == "auto":
        return torch.device("cuda" if torch.cuda.is_available() else "cpu")
    return torch.device(name)


def make_loader(
    manifest: DatasetManifest,
    config: TrainConfig,
    train: bool,
    generator: Optional[torch.Generator] = None,
) -> DataLoader:
    dataset = ChangeDetectionDataset(
        manifest, augment=config.augment and train, seed=config.seed
    )
    return DataLoader(
        dataset,
        batch_size=config.batch_size,
        shuffle=train,
        num_workers=config.num_workers,
        generator=generator,
    )


def steps_per_epoch(num_samples: int, batch_size: int) -> int:
    return math.ceil(num_samples / batch_size)


def check_tile_size(manifest: DatasetManifest, tile_size: int) -> None:
    """Compare the split's first sample with the configured tile edge.

    Raises:
        RasterShapeError: If the sample is not tile_size × tile_size
    """
    if manifest.count == 0:
        return
    sample_id = manifest.ids[0]
    shape = read_label(manifest.sample_paths(sample_id)[2]).shape
    if shape != (tile_size, tile_size):
        raise RasterShapeError(
            f"Split '{manifest.split}' holds {shape[0]}x{shape[1]} tiles "
            f"('{sample_id}'), config expects {tile_size}x{tile_size}",
            sample_id=sample_id,
        )


def build_optimizer(model: nn.Module, config: TrainConfig) -> torch.optim.AdamW:
    """AdamW with decoupled weight decay over the trainable parameters only."""
    return torch.optim.AdamW(
        [p for p in model.parameters() if p.requires_grad],
        lr=config.learning_rate,
        betas=config.betas,
        eps=config.eps,
        weight_decay=config.weight_decay,
    )


@torch.no_grad()
def evaluate_model(
    model: nn.Module,
    loader: DataLoader,
    threshold: float = 0.5,
    device: torch.device = torch.device("cpu"),
) -> ConfusionMatrix:
    """Micro-averaged confusion counts of the final map in inference mode."""
    model.eval()
    matrices = []
    for batch in loader:
        output = model(batch["image_a"].to(device), batch["image_b"].to(device))
        pred = predict_binary(output.final, threshold).squeeze(1)
        matrices.append(accumulate(pred, batch["label"]))
    return merge_all(matrices)


def train(config: TrainConfig) -> TrainResult:
    """Optimize with AdamW at a constant learning rate, validating each epoch.

    The best-F1 and the last checkpoint are written under ``output_dir``, along
    with the per-step loss log and the per-epoch validation log.

    Raises:
        SplitNotFoundError: If the prepared train or val split is missing
        EmptySplitError: If the train split has no samples
        NonFiniteLossError: If the loss becomes NaN/inf (the step is logged)
        RasterShapeError: If the tiles are not tile_size × tile_size
    """
    generator = seed_everything(config.seed)
    device = resolve_device(config.device)
    train_manifest = load_manifest(config.dataset_root, "train")
    val_manifest = load_manifest(config.dataset_root, "val")
    if train_manifest.count == 0:
        raise EmptySplitError(f"No training samples under {config.dataset_root}")
    check_disjoint([train_manifest, val_manifest])
    check_tile_size(train_manifest, config.tile_size)
    check_tile_size(val_manifest, config.tile_size)

    model = build_model(config).to(device)
    optimizer = build_optimizer(model, config)
    train_loader = make_loader(train_manifest, config, train=True, generator=generator)
    val_loader = make_loader(val_manifest, config, train=False)

    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_yaml(out_dir / "config.yaml", config)
    train_log, val_log = out_dir / TRAIN_LOG, out_dir / VAL_LOG

    console.log(
        f"train={train_manifest.count} val={val_manifest.count} "
        f"steps/epoch={steps_per_epoch(train_manifest.count, config.batch_size)} device={device}"
    )

    step = 0
    best_f1: Optional[float] = None
    with train_log.open("w", newline="") as tf, val_log.open("w", newline="") as vf:
        step_writer = csv.DictWriter(tf, fieldnames=LOG_COLUMNS)
        val_writer = csv.DictWriter(vf, fieldnames=VAL_COLUMNS)
        step_writer.writeheader()
        val_writer.writeheader()

        for epoch in range(1, config.epochs + 1):
            model.train()
            train_loader.dataset.set_epoch(epoch)
            for batch in train_loader:
                output = model(batch["image_a"].to(device), batch["image_b"].to(device))
                losses = total_loss(output.coarse, output.final, batch["label"].to(device))
                loss = losses.total
                step_writer.writerow(losses.as_row(step))
                if not torch.isfinite(loss):
                    tf.flush()
                    raise NonFiniteLossError(step, float(loss.detach()))
                optimizer.zero_grad(set_to_none=True)
                loss.backward()
                optimizer.step()
                step += 1
                if config.max_steps and step >= config.max_steps:
                    break

            report: Optional[MetricReport] = None
            if val_manifest.count:
                report = scores(evaluate_model(model, val_loader, config.threshold, device))
                val_writer.writerow({"epoch": epoch, "step": step, **report.model_dump()})
                vf.flush()

            # Without a validation split every epoch counts as the best so far
            improved = report is None or best_f1 is None or report.f1 > best_f1
            if report is not None and improved:
                best_f1 = report.f1
            meta = CheckpointMeta(
                epoch=epoch,
                step=step,
                best_val_f1=best_f1,
                val_scores=report,
                params_digest="",
                config=config,
            )
            if improved:
                save_checkpoint(out_dir / BEST_DIR, model, meta, optimizer)
            save_checkpoint(out_dir / LAST_DIR, model, meta, optimizer)

            console.log(
                f"epoch {epoch}/{config.epochs} step {step} "
                f"loss {float(loss.detach()):.4f}"
                + (f" val F1 {report.f1:.4f}" if report else "")
            )
            if config.max_steps and step >= config.max_steps:
                break

    return TrainResult(
        best_checkpoint=out_dir / BEST_DIR,
        last_checkpoint=out_dir / LAST_DIR,
        best_val_f1=best_f1,
        steps=step,
        train_log=train_log,
        val_log=val_log,
    )


def run_evaluation(
    checkpoint: str | Path,
    split: str,
    dataset_root: Optional[str | Path] = None,
    report_path: Optional[str | Path] = None,
) -> EvaluationReport:
    """Evaluate a checkpoint on a split and optionally write ``report.yaml``.

    Raises:
        SplitNotFoundError: If the split doesn't exist
        EmptySplitError: If the split has no samples
        RasterShapeError: If the tiles are not tile_size × tile_size
        CheckpointMismatchError: If the checkpoint doesn't fit the model
    """
    model, meta = load_checkpoint(checkpoint)
    config = meta.config
    root = Path(dataset_root) if dataset_root is not None else config.dataset_root
    manifest = load_manifest(root, split)
    if manifest.count == 0:
        raise EmptySplitError(f"Split '{split}' under {root} has no samples")
    check_tile_size(manifest, config.tile_size)

    device = resolve_device(config.device)
    model.to(device)
    cm = evaluate_model(model, make_loader(manifest, config, train=False), config.threshold, device)
    report = EvaluationReport(
        dataset=config.dataset_id,
        split=split,
        checkpoint=str(checkpoint),
        counts=cm,
        scores=scores(cm),
    )
    if report_path is not None:
        write_yaml(report_path, report)
    return report


def evaluate(checkpoint: str | Path, split: str, dataset_root: Optional[str | Path] = None) -> MetricReport:
    return run_evaluation(checkpoint, split, dataset_root).scores
