import logging

from rich.logging import RichHandler

from guidenet.core.settings import get_settings

_ROOT = "guidenet"
_configured = False


def configure_logging(level: str | None = None) -> None:
    global _configured
    root = logging.getLogger(_ROOT)
    if not _configured:
        handler = RichHandler(show_path=False, rich_tracebacks=True)
        handler.setFormatter(logging.Formatter("%(message)s", datefmt="[%X]"))
        root.addHandler(handler)
        root.propagate = False
        _configured = True
    root.setLevel((level or get_settings().log_level).upper())


def get_logger(name: str) -> logging.Logger:
    if not _configured:
        configure_logging()
    return logging.getLogger(name if name.startswith(_ROOT) else f"{_ROOT}.{name}")
