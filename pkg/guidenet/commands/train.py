from pathlib import Path
from typing import Optional

import orjson
import typer

from guidenet.commands.options import console, exits_on_error, load_config_file, output_dir, resolve_model, resolve_train
from guidenet.core.errors import ConfigError
from guidenet.models.config import Regime
from guidenet.services.checkpoint import save_checkpoint
from guidenet.services.dataset import load_split, load_vocab
from guidenet.services.trainer import build_model, train


@exits_on_error
def command(
    manifest: Path = typer.Option(..., help="Dataset manifest.jsonl."),
    regime: Optional[Regime] = typer.Option(None, help="Training regime."),
    epochs: Optional[int] = typer.Option(None, help="Number of epochs."),
    batch_size: Optional[int] = typer.Option(None, help="Minibatch size."),
    lr: Optional[float] = typer.Option(None, "--lr", help="Adam learning rate."),
    seed: Optional[int] = typer.Option(None, help="Root seed for init and shuffling."),
    model_preset: Optional[str] = typer.Option(None, "--preset", help="Model preset (desk, paper, tiny)."),
    out: Optional[Path] = typer.Option(None, "--out", help="Output directory for checkpoint and history."),
    config: Optional[Path] = typer.Option(None, "--config", help="JSON config file."),
):
    """Train one regime and write its checkpoint and loss history."""
    file_cfg = load_config_file(config)
    train_config = resolve_train(
        file_cfg, regime=regime, epochs=epochs, batch_size=batch_size, learning_rate=lr, seed=seed, preset=model_preset
    )
    model_config = resolve_model(file_cfg, train_config.preset)
    if not manifest.is_file():
        raise ConfigError(f"manifest not found: {manifest}")

    data = load_split(manifest, "train", model_config.max_seq_len, load_vocab(manifest.parent).check_fits(model_config.vocab_size))
    model, history = train(build_model(model_config, train_config.seed), data, train_config)

    target = output_dir(out)
    name = train_config.regime.value
    checkpoint = save_checkpoint(model, target / f"{name}.gnet")
    history_path = target / f"{name}.history.json"
    try:
        history_path.write_bytes(orjson.dumps(history.model_dump(), option=orjson.OPT_INDENT_2))
    except OSError as e:
        raise ConfigError(f"cannot write {history_path}: {e}") from e

    console.print(f"[green]Saved[/green] {checkpoint} (final loss {history.loss[-1]:.4f}, train acc {history.train_accuracy[-1]:.4f})")
