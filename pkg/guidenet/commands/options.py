"""Config resolution shared by the commands: flags > JSON config file > preset defaults."""
import functools
from pathlib import Path
from typing import Any, Callable, Optional, TypeVar

import orjson
import typer
from rich.console import Console
from rich.markup import escape

from guidenet.core.errors import ConfigError, GuidenetError
from guidenet.core.logging import configure_logging
from guidenet.core.settings import get_settings
from guidenet.models.config import (
    ComparisonConfig,
    GeneratorConfig,
    ModelConfig,
    TrainConfig,
    parse_config,
    preset,
)

console = Console()
err_console = Console(stderr=True)

SECTIONS = ("generator", "model", "train", "comparison")

F = TypeVar("F", bound=Callable[..., Any])


# --- ERROR BOUNDARY ---
def exits_on_error(fn: F) -> F:
    """Report a GuidenetError on stderr and exit with its code."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        configure_logging(get_settings().log_level)
        try:
            return fn(*args, **kwargs)
        except GuidenetError as e:
            err_console.print(f"[bold red]{type(e).__name__}:[/bold red] {escape(str(e))}")
            raise typer.Exit(code=e.exit_code)

    return wrapper  # type: ignore[return-value]


# --- CONFIG FILE ---
def load_config_file(path: Optional[Path]) -> dict[str, dict[str, Any]]:
    if path is None:
        return {}
    try:
        data = orjson.loads(Path(path).read_bytes())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except orjson.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(data) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown config sections in {path}: {', '.join(unknown)} (expected {', '.join(SECTIONS)})")
    bad = sorted(name for name in SECTIONS if data.get(name) is not None and not isinstance(data[name], dict))
    if bad:
        raise ConfigError(f"config sections in {path} must be JSON objects: {', '.join(bad)}")
    return {name: dict(data.get(name) or {}) for name in SECTIONS}


def given(**flags: Any) -> dict[str, Any]:
    """Flags the user actually passed (typer hands us None for the rest)."""
    return {k: v for k, v in flags.items() if v is not None}


def resolve_generator(file_cfg: dict, **flags: Any) -> GeneratorConfig:
    return parse_config(GeneratorConfig, {**file_cfg.get("generator", {}), **given(**flags)})


def resolve_train(file_cfg: dict, **flags: Any) -> TrainConfig:
    return parse_config(TrainConfig, {**file_cfg.get("train", {}), **given(**flags)})


def resolve_model(file_cfg: dict, preset_name: str) -> ModelConfig:
    return preset(preset_name, **file_cfg.get("model", {}))


def resolve_comparison(file_cfg: dict, generator: GeneratorConfig, train: TrainConfig, **flags: Any) -> ComparisonConfig:
    data = {**file_cfg.get("comparison", {}), **given(**flags)}
    return parse_config(ComparisonConfig, {**data, "generator": generator.model_dump(), "train": train.model_dump()})


def parse_seeds(text: Optional[str]) -> Optional[tuple[int, ...]]:
    if text is None:
        return None
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"--seeds expects comma-separated integers, got '{text}'") from None


def output_dir(flag: Optional[Path]) -> Path:
    return flag if flag is not None else get_settings().output_dir
