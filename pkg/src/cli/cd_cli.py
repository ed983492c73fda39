"""CLI for the change-detection pipeline.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 runtime/numeric error.
"""

from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

import typer
import yaml
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from src.cli.cd_service import predict_pair, prepare_dataset, visualize
from src.core.config_io import load_train_config
from src.core.errors import (
    CheckpointMismatchError,
    ConfigError,
    EmptySplitError,
    NonFiniteLossError,
    PretrainedWeightsUnavailableError,
    RasterShapeError,
)
from src.core.schemas import ConfusionMatrix, EvaluationReport
from src.core.seed import RANDOM_SEED, write_synthetic_dataset
from src.training.trainer import run_evaluation, train

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

app = typer.Typer(help="Bi-temporal change detection (HCGMNet)")
console = Console()


@contextmanager
def exit_on_error() -> Iterator[None]:
    """Print domain errors in red and exit with their code."""
    try:
        yield
    except (ConfigError, yaml.YAMLError) as e:
        console.print(f"[red]Config error: {escape(str(e))}[/red]")
        raise typer.Exit(EXIT_USAGE)
    except (FileNotFoundError, RasterShapeError, EmptySplitError) as e:
        console.print(f"[red]Data error: {escape(str(e))}[/red]")
        raise typer.Exit(EXIT_DATA)
    except (
        NonFiniteLossError,
        CheckpointMismatchError,
        PretrainedWeightsUnavailableError,
        RuntimeError,
    ) as e:
        console.print(f"[red]Runtime error: {escape(str(e))}[/red]")
        raise typer.Exit(EXIT_RUNTIME)
    except ValueError as e:
        console.print(f"[red]Invalid argument: {escape(str(e))}[/red]")
        raise typer.Exit(EXIT_USAGE)


def _counts_table(title: str, counts: dict[str, int]) -> Table:
    table = Table(title=title)
    table.add_column("Split", style="cyan")
    table.add_column("Count", style="green", justify="right")
    for name, count in counts.items():
        table.add_row(name, str(count))
    return table


def _confusion_table(cm: ConfusionMatrix) -> Table:
    table = Table(title="Confusion matrix")
    for name in ("TP", "FP", "TN", "FN"):
        table.add_column(name, justify="right")
    table.add_row(str(cm.tp), str(cm.fp), str(cm.tn), str(cm.fn))
    return table


def _report_table(report: EvaluationReport) -> Table:
    table = Table(title=f"{report.dataset} / {report.split}")
    for name in ("F1", "Pre.", "Rec.", "OA", "IoU"):
        table.add_column(name, justify="right")
    pct = report.scores.as_percent()
    table.add_row(*(f"{pct[k]:.2f}" for k in ("f1", "precision", "recall", "oa", "iou")))
    return table


@app.command()
def health() -> None:
    """Quick check that the CLI and its imports load."""
    console.print("[green]✅ change-detection CLI is reachable[/green]")


@app.command()
def synth(
    out: Path = typer.Option(..., "--out", help="Raw dataset root to create"),
    train_count: int = typer.Option(8, "--train", help="Training pairs"),
    val_count: int = typer.Option(2, "--val", help="Validation pairs"),
    test_count: int = typer.Option(2, "--test", help="Test pairs"),
    size: int = typer.Option(256, "--size", help="Height and width of each pair"),
    seed: int = typer.Option(RANDOM_SEED, "--seed", help="Random seed"),
) -> None:
    """Write a deterministic synthetic dataset in the raw layout."""
    with exit_on_error():
        counts = write_synthetic_dataset(
            out, {"train": train_count, "val": val_count, "test": test_count}, size, size, seed
        )
    console.print(_counts_table("Synthetic pairs", counts))


@app.command()
def prepare(
    root: Path = typer.Option(..., "--root", help="Raw dataset root (<split>/{A,B,label})"),
    out: Path = typer.Option(..., "--out", help="Prepared dataset root"),
    tile_size: int = typer.Option(256, "--tile-size", min=1, help="Tile edge in pixels"),
) -> None:
    """Tile raw pairs into non-overlapping patches and write split manifests."""
    with exit_on_error():
        counts = prepare_dataset(root, out, tile_size)
    if not counts:
        console.print("[yellow]No splits found, count 0[/yellow]")
        return
    console.print(_counts_table(f"Prepared tiles ({tile_size}×{tile_size})", counts))


@app.command("train")
def train_command(
    config: Path = typer.Option(..., "--config", help="Flat YAML training config"),
) -> None:
    """Train with the configured recipe and keep the best-F1 checkpoint."""
    with exit_on_error():
        train_config = load_train_config(config)
        result = train(train_config)
    best_f1 = "n/a" if result.best_val_f1 is None else f"{result.best_val_f1:.4f}"
    console.print(f"[green]✓[/green] {result.steps} steps, best val F1 {best_f1}")
    console.print(f"  best checkpoint: {result.best_checkpoint}")
    console.print(f"  training log:    {result.train_log}")


@app.command("eval")
def eval_command(
    checkpoint: Path = typer.Option(..., "--checkpoint", help="Checkpoint directory"),
    split: str = typer.Option("test", "--split", help="Split to evaluate"),
    root: Optional[Path] = typer.Option(None, "--root", help="Override the prepared dataset root"),
    report: Optional[Path] = typer.Option(None, "--report", help="Write report.yaml here"),
) -> None:
    """Evaluate a checkpoint on a split (micro-averaged, threshold from config)."""
    with exit_on_error():
        result = run_evaluation(checkpoint, split, root, report)
    console.print(_report_table(result))
    console.print(_confusion_table(result.counts))


@app.command()
def predict(
    image_a: Path = typer.Option(..., "--a", help="First-date image"),
    image_b: Path = typer.Option(..., "--b", help="Second-date image"),
    checkpoint: Path = typer.Option(..., "--checkpoint", help="Checkpoint directory"),
    out: Path = typer.Option(..., "--out", help="Output PNG ({0, 255})"),
    threshold: Optional[float] = typer.Option(
        None, "--threshold", help="Open interval (0, 1); defaults to the checkpoint config"
    ),
) -> None:
    """Predict the binary change map of one pair."""
    with exit_on_error():
        binary = predict_pair(image_a, image_b, checkpoint, out, threshold)
    console.print(
        f"[green]✓[/green] wrote {out} ({binary.shape[0]}×{binary.shape[1]}, "
        f"{int(binary.sum())} changed pixels)"
    )


@app.command("visualize")
def visualize_command(
    pred: Path = typer.Option(..., "--pred", help="Predicted binary map PNG"),
    label: Path = typer.Option(..., "--label", help="Ground-truth label PNG"),
    out: Path = typer.Option(..., "--out", help="Error map PNG"),
) -> None:
    """Render TP white, FP red, TN black, FN blue."""
    with exit_on_error():
        cm = visualize(pred, label, out)
    console.print(f"[green]✓[/green] wrote {out}")
    console.print(_confusion_table(cm))


if __name__ == "__main__":
    app()
