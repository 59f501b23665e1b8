from typing import Optional

import numpy as np
from tqdm import tqdm

from guidenet.core import ops
from guidenet.core.errors import ConfigError, NumericAbortError
from guidenet.core.logging import get_logger
from guidenet.core.optim import Adam
from guidenet.core.seeding import stream_rng
from guidenet.core.settings import get_settings
from guidenet.core.tensor import Tensor
from guidenet.models.config import ForwardMode, ModelConfig, Regime, TrainConfig
from guidenet.models.records import TrainHistory
from guidenet.nn.guidance import GuidanceModel
from guidenet.services.dataset import SplitData

logger = get_logger(__name__)


def build_model(config: ModelConfig, seed: int) -> GuidanceModel:
    """Fresh model from the ``init`` stream; every regime of a seed starts from these weights."""
    return GuidanceModel(config, stream_rng(seed, "init"))


def trainable_parameters(model: GuidanceModel, regime: Regime) -> list[Tensor]:
    if regime is Regime.BASELINE:
        return model.baseline_parameters()
    if regime is Regime.GUIDED_FROZEN:
        frozen = {id(p) for p in model.text_parameters()}
        return [p for p in model.parameters() if id(p) not in frozen]
    return model.parameters()


def batch_bounds(n: int, batch_size: int) -> list[tuple[int, int]]:
    """Minibatch slices over ``n`` samples; a trailing batch of one joins the batch before it."""
    bounds = [(start, min(start + batch_size, n)) for start in range(0, n, batch_size)]
    if batch_size > 1 and len(bounds) > 1 and bounds[-1][1] - bounds[-1][0] == 1:
        bounds[-2:] = [(bounds[-2][0], n)]
    return bounds


def train(
    model: GuidanceModel,
    data: SplitData,
    config: TrainConfig,
    progress: Optional[bool] = None,
) -> tuple[GuidanceModel, TrainHistory]:
    """Seeded minibatch Adam on cross-entropy; returns the trained model and per-epoch history."""
    n = len(data)
    if n == 0:
        raise ConfigError("training split is empty")
    show = get_settings().progress if progress is None else progress

    model.set_text_frozen(config.text_frozen)
    model.train()
    optimizer = Adam(trainable_parameters(model, config.regime), lr=config.learning_rate)
    shuffle = stream_rng(config.seed, "shuffle")
    mode = config.forward_mode
    history = TrainHistory(regime=config.regime.value)

    for epoch in range(1, config.epochs + 1):
        order = shuffle.permutation(n)
        total_loss = 0.0
        correct = 0
        batches = batch_bounds(n, config.batch_size)
        bar = tqdm(batches, desc=f"{config.regime.value} epoch {epoch}", unit="batch", disable=not show, leave=False)
        for batch_no, (start, stop) in enumerate(bar, start=1):
            idx = order[start:stop]
            images, tokens, labels = data.batch(idx)

            model.zero_grad()
            logits = model.forward(images, tokens if mode is ForwardMode.GUIDED else None, mode)
            loss = ops.cross_entropy(logits, labels)
            value = loss.item()
            if not np.isfinite(value):
                raise NumericAbortError(epoch, batch_no, value)
            loss.backward()
            optimizer.step()

            total_loss += value * len(idx)
            correct += int((logits.data.argmax(axis=1) == labels).sum())
            logger.debug("epoch %d batch %d loss %.6f", epoch, batch_no, value)

        history.loss.append(total_loss / n)
        history.train_accuracy.append(correct / n)
        logger.info(
            "[%s] epoch %d/%d loss %.4f train acc %.4f",
            config.regime.value, epoch, config.epochs, history.loss[-1], history.train_accuracy[-1],
        )

    model.eval()
    return model, history
