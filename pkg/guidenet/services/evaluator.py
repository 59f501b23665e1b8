from typing import Optional

import numpy as np
from tqdm import tqdm

from guidenet.core.errors import ConfigError, ContractError, DimensionError
from guidenet.core.logging import get_logger
from guidenet.core.settings import get_settings
from guidenet.core.tensor import Graph, no_grad
from guidenet.models.config import ForwardMode
from guidenet.models.records import MetricsReport
from guidenet.nn.guidance import GuidanceModel
from guidenet.services.dataset import SplitData

logger = get_logger(__name__)

# scopes that must never run when the caption is unavailable
TEXT_PATH_SCOPES = frozenset({"text", "fusion", "attention"})


def metrics_from_predictions(predictions: np.ndarray, labels: np.ndarray) -> MetricsReport:
    """Confusion counts with label 1 as the positive class."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise DimensionError(f"{predictions.shape[0]} predictions for {labels.shape[0]} labels")
    if labels.size == 0:
        raise ConfigError("cannot score an empty test set")
    pos, neg = predictions == 1, predictions == 0
    return MetricsReport.from_counts(
        tp=int((pos & (labels == 1)).sum()),
        fp=int((pos & (labels == 0)).sum()),
        tn=int((neg & (labels == 0)).sum()),
        fn=int((neg & (labels == 1)).sum()),
    )


def predict(
    model: GuidanceModel,
    data: SplitData,
    mode: ForwardMode = ForwardMode.INFERENCE,
    batch_size: int = 64,
    audit: Optional[Graph] = None,
) -> np.ndarray:
    """Argmax class per sample (ties go to the lowest index). ``audit`` records the first batch."""
    model.eval()
    show = get_settings().progress
    out = []
    with no_grad():
        for start in tqdm(range(0, len(data), batch_size), desc="Evaluating", unit="batch", disable=not show, leave=False):
            images, tokens, _ = data.batch(np.arange(start, min(start + batch_size, len(data))))
            if audit is not None and start == 0:
                with audit.record():
                    logits = model.forward(images, tokens, mode)
            else:
                logits = model.forward(images, tokens, mode)
            out.append(logits.data.argmax(axis=1))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def evaluate(
    model: GuidanceModel,
    data: SplitData,
    mode: ForwardMode = ForwardMode.INFERENCE,
    audit: bool = False,
    batch_size: int = 64,
) -> MetricsReport:
    """Score ``data``. With ``audit`` the inference path is checked for text-side operations."""
    if len(data) == 0:
        raise ConfigError("test split is empty")
    graph = Graph() if audit else None
    report = metrics_from_predictions(predict(model, data, mode, batch_size, audit=graph), data.labels)
    if graph is not None and mode is ForwardMode.INFERENCE:
        touched = sorted(graph.scopes() & TEXT_PATH_SCOPES)
        if touched:
            raise ContractError(f"inference path ran text-side scopes: {', '.join(touched)}")
    logger.info("Evaluated %d samples (%s): accuracy %.4f", report.total, mode.value, report.accuracy)
    return report
