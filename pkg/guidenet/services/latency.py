import time
from typing import Callable, Mapping, Optional

import numpy as np

from guidenet.core.errors import ConfigError
from guidenet.core.tensor import Tensor, no_grad
from guidenet.models.config import ForwardMode
from guidenet.models.records import LatencyStats
from guidenet.nn.guidance import GuidanceModel

MIN_RUNS = 30


def summarize_latency(samples: list[float]) -> LatencyStats:
    values = np.asarray(samples)
    return LatencyStats(median=float(np.median(values)), p95=float(np.percentile(values, 95)), samples=samples)


def bench_interleaved(forwards: Mapping[str, Callable[[], object]], n_warmup: int = 100, n_runs: int = 1000) -> dict[str, LatencyStats]:
    """Time each callable ``n_runs`` times, alternating between them so drift hits all equally."""
    if n_runs < MIN_RUNS:
        raise ConfigError(f"n_runs must be >= {MIN_RUNS}, got {n_runs}")
    if n_warmup < 0:
        raise ConfigError(f"n_warmup must be >= 0, got {n_warmup}")
    for _ in range(n_warmup):
        for fn in forwards.values():
            fn()
    samples: dict[str, list[float]] = {name: [] for name in forwards}
    for _ in range(n_runs):
        for name, fn in forwards.items():
            start = time.perf_counter()
            fn()
            samples[name].append(time.perf_counter() - start)
    return {name: summarize_latency(values) for name, values in samples.items()}


def single_sample_forward(
    model: GuidanceModel, mode: ForwardMode, image: Tensor, tokens: Optional[np.ndarray] = None
) -> Callable[[], object]:
    model.eval()

    def run():
        with no_grad():
            return model.forward(image, tokens, mode)

    return run


def bench_latency(
    model: GuidanceModel,
    mode: ForwardMode,
    image: Tensor,
    n_warmup: int = 100,
    n_runs: int = 1000,
    tokens: Optional[np.ndarray] = None,
) -> LatencyStats:
    """Wall-clock seconds per single-sample forward; warmup runs are discarded."""
    return bench_interleaved({mode.value: single_sample_forward(model, mode, image, tokens)}, n_warmup, n_runs)[mode.value]
