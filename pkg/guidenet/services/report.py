from pathlib import Path
from statistics import median
from typing import Any, Optional, Sequence, Union

import orjson
from rich.table import Table

from guidenet.core.errors import ConfigError
from guidenet.models.records import ExperimentResult, MetricsReport, RegimeResult

COLUMNS = ("Model", "Precision", "Recall", "Accuracy", "Latency")
SEED_FIELDS = ("seed", "tp", "fp", "tn", "fn", "precision", "recall", "accuracy", "latency_median_s")


def fmt_percent(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{100 * value:.2f}%"


def fmt_latency(seconds: Optional[float]) -> str:
    return "n/a" if seconds is None else f"{1000 * seconds:.3f}ms"


def _median(values: Sequence[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    return float(median(present)) if present else None


def metrics_table(rows: Sequence[tuple[str, MetricsReport]], title: str = "") -> Table:
    table = Table(*COLUMNS, title=title or None)
    for name, m in rows:
        table.add_row(name, fmt_percent(m.precision), fmt_percent(m.recall), fmt_percent(m.accuracy), fmt_latency(m.latency_median))
    return table


def regime_row(regime: RegimeResult) -> list[str]:
    """Medians across seeds."""
    return [
        regime.name,
        fmt_percent(_median([s.precision for s in regime.seeds])),
        fmt_percent(_median([s.recall for s in regime.seeds])),
        fmt_percent(regime.median_accuracy),
        fmt_latency(_median([s.latency_median_s for s in regime.seeds])),
    ]


def comparison_table(result: ExperimentResult) -> Table:
    n_seeds = len(result.regimes[0].seeds) if result.regimes else 0
    table = Table(*COLUMNS, title=f"Median over {n_seeds} seed(s)")
    for regime in result.regimes:
        table.add_row(*regime_row(regime))
    return table


def deltas_table(result: ExperimentResult) -> Table:
    table = Table("Model", "Seed", "Accuracy delta vs baseline", title="Paired per-seed deltas")
    for d in result.paired_deltas:
        table.add_row(d.regime, str(d.seed), f"{100 * d.accuracy_delta:+.2f} pp")
    return table


def experiment_payload(result: ExperimentResult) -> dict[str, Any]:
    return {
        "regimes": [
            {"name": r.name, "seeds": [s.model_dump(include=set(SEED_FIELDS)) for s in r.seeds]}
            for r in result.regimes
        ],
        "paired_deltas": [d.model_dump() for d in result.paired_deltas],
    }


def write_json(payload: Any, path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(orjson.dumps(payload, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS))
    except OSError as e:
        raise ConfigError(f"cannot write report {path}: {e}") from e
    return path
