from pathlib import Path
from typing import Optional

import typer
from rich.table import Table

from guidenet.commands.options import (
    console,
    exits_on_error,
    load_config_file,
    output_dir,
    parse_seeds,
    resolve_comparison,
    resolve_generator,
    resolve_model,
    resolve_train,
)
from guidenet.services.comparison import plan_comparison, run_comparison
from guidenet.services.report import comparison_table, deltas_table, experiment_payload, write_json


@exits_on_error
def command(
    seeds: Optional[str] = typer.Option(None, help="Comma-separated seeds, e.g. 1,2,3."),
    n: Optional[int] = typer.Option(None, "--n", help="Samples per seed's dataset."),
    epochs: Optional[int] = typer.Option(None, help="Training epochs per regime."),
    model_preset: Optional[str] = typer.Option(None, "--preset", help="Model preset (desk, paper, tiny)."),
    bench_runs: Optional[int] = typer.Option(None, help="Timed single-sample runs per regime."),
    bench_warmup: Optional[int] = typer.Option(None, help="Discarded warmup runs."),
    zero_shot: Optional[bool] = typer.Option(None, "--zero-shot/--no-zero-shot", help="Add the zero-shot cosine row."),
    workers: Optional[int] = typer.Option(None, help="Seeds run in parallel processes."),
    dry_run: bool = typer.Option(False, "--dry-run", help="Print the plan and stop."),
    out: Optional[Path] = typer.Option(None, "--out", help="Experiment directory."),
    config: Optional[Path] = typer.Option(None, "--config", help="JSON config file."),
):
    """Run the baseline vs. guided comparison and write the report."""
    file_cfg = load_config_file(config)
    generator = resolve_generator(file_cfg, n_samples=n)
    train_config = resolve_train(file_cfg, epochs=epochs, preset=model_preset)
    comparison = resolve_comparison(
        file_cfg,
        generator,
        train_config,
        seeds=parse_seeds(seeds),
        bench_runs=bench_runs,
        bench_warmup=bench_warmup,
        zero_shot=zero_shot,
        workers=workers,
    )
    model_config = resolve_model(file_cfg, train_config.preset)
    target = output_dir(out)

    if dry_run:
        plan = Table("Seed", "Regimes", "Directory", title=f"Plan ({train_config.epochs} epoch(s), preset {train_config.preset})")
        for step in plan_comparison(comparison, target):
            plan.add_row(str(step["seed"]), ", ".join(step["regimes"]), step["dir"])
        console.print(plan)
        return

    result = run_comparison(comparison, model_config, target)
    console.print(comparison_table(result))
    console.print(deltas_table(result))
    path = write_json(experiment_payload(result), target / "report.json")
    console.print(f"Report written to {path}")
