from pathlib import Path
from typing import Optional

import typer
from rich.table import Table

from guidenet.commands.options import console, exits_on_error, load_config_file, output_dir, resolve_generator
from guidenet.models.records import ManifestSummary
from guidenet.services.data_generator import generate_dataset


def summary_table(summary: ManifestSummary) -> Table:
    table = Table("Split", "Samples", "Label 0", "Label 1", "Distractor/label corr.", title=summary.manifest_path)
    for name, split in summary.splits.items():
        corr = split.distractor_label_correlation
        table.add_row(
            name,
            str(split.total),
            str(split.label_counts.get(0, 0)),
            str(split.label_counts.get(1, 0)),
            "n/a" if corr is None else f"{corr:+.3f}",
        )
    return table


@exits_on_error
def command(
    n: Optional[int] = typer.Option(None, "--n", help="Number of samples."),
    seed: Optional[int] = typer.Option(None, help="Root seed for the data and split streams."),
    out: Optional[Path] = typer.Option(None, "--out", help="Dataset directory (default: <output_dir>/data)."),
    image_size: Optional[int] = typer.Option(None, help="Image side in pixels."),
    cue_probability: Optional[float] = typer.Option(None, help="Probability of label 1."),
    rho_train: Optional[float] = typer.Option(None, help="Distractor/label co-occurrence in train."),
    rho_test: Optional[float] = typer.Option(None, help="Distractor/label co-occurrence in test."),
    decoy_probability: Optional[float] = typer.Option(None, help="Probability of a decoy square."),
    split_ratio: Optional[float] = typer.Option(None, help="Train fraction."),
    config: Optional[Path] = typer.Option(None, "--config", help="JSON config file."),
):
    """Generate the synthetic image-caption dataset."""
    generator = resolve_generator(
        load_config_file(config),
        n_samples=n,
        seed=seed,
        image_size=image_size,
        cue_probability=cue_probability,
        rho_train=rho_train,
        rho_test=rho_test,
        decoy_probability=decoy_probability,
        split_ratio=split_ratio,
    )
    summary = generate_dataset(generator, out if out is not None else output_dir(None) / "data")
    console.print(summary_table(summary))
