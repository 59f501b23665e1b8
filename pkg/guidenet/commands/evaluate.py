from pathlib import Path
from typing import Optional

import typer

from guidenet.commands.options import console, exits_on_error, output_dir
from guidenet.core.errors import ConfigError
from guidenet.models.config import ForwardMode
from guidenet.services.checkpoint import load_checkpoint
from guidenet.services.dataset import load_split, load_vocab
from guidenet.services.evaluator import evaluate
from guidenet.services.latency import bench_latency
from guidenet.services.report import metrics_table, write_json


@exits_on_error
def command(
    checkpoint: Path = typer.Option(..., help="GNET checkpoint."),
    manifest: Path = typer.Option(..., help="Dataset manifest.jsonl."),
    split: str = typer.Option("test", help="Split to score."),
    mode: ForwardMode = typer.Option(ForwardMode.INFERENCE, help="Forward path; 'inference' needs no captions."),
    bench: bool = typer.Option(False, "--bench", help="Also time single-sample forwards."),
    bench_runs: int = typer.Option(1000, help="Timed runs for --bench."),
    bench_warmup: int = typer.Option(100, help="Discarded warmup runs for --bench."),
    audit: bool = typer.Option(True, help="Fail if the inference path touches text-side operations."),
    out: Optional[Path] = typer.Option(None, "--out", help="JSON report path (default: <output_dir>/eval.json)."),
):
    """Score a checkpoint on a manifest split."""
    if split not in ("train", "test"):
        raise ConfigError(f"--split must be 'train' or 'test', got '{split}'")
    if not manifest.is_file():
        raise ConfigError(f"manifest not found: {manifest}")
    model = load_checkpoint(checkpoint)
    data = load_split(manifest, split, model.config.max_seq_len, load_vocab(manifest.parent).check_fits(model.config.vocab_size))

    report = evaluate(model, data, mode, audit=audit)
    if bench:
        tokens = data.tokens[0] if mode is ForwardMode.GUIDED else None
        report = report.with_latency(bench_latency(model, mode, data.image(0), bench_warmup, bench_runs, tokens=tokens))

    console.print(metrics_table([(checkpoint.stem, report)], title=f"{split} split, {mode.value} path"))
    path = write_json(report.model_dump(), out if out is not None else output_dir(None) / "eval.json")
    console.print(f"Report written to {path}")
