"""Cosine zero-shot classification in the fusion space of a trained guided model.

Each class is described by a caption of its cue words. A caption is embedded by fusing
its text block with an all-zero image block; an image by fusing its image block with an
all-zero text block. Both are global-average-pooled, and the image is assigned the class
whose caption embedding has the highest cosine similarity.
"""
from typing import Sequence

import numpy as np

from guidenet.core import ops
from guidenet.core.errors import ConfigError, NumericError
from guidenet.core.tensor import Tensor, no_grad
from guidenet.models.config import CUE_WORDS
from guidenet.models.records import MetricsReport
from guidenet.nn.guidance import GuidanceModel, fuse
from guidenet.nn.text import Vocab, tokenize
from guidenet.services.dataset import SplitData
from guidenet.services.evaluator import metrics_from_predictions


def zero_shot_classify(image_embedding: np.ndarray, class_embeddings: Sequence[np.ndarray]) -> int:
    """Index of the most cosine-similar class; exact ties resolve to the lowest index."""
    image = np.asarray(image_embedding, dtype=np.float64).reshape(-1)
    classes = np.asarray(class_embeddings, dtype=np.float64)
    if classes.ndim != 2 or classes.shape[0] < 2:
        raise ConfigError(f"need at least 2 class embeddings, got {classes.shape[0] if classes.ndim else 0}")
    image_norm = np.linalg.norm(image)
    class_norms = np.linalg.norm(classes, axis=1)
    if image_norm == 0:
        raise NumericError("image embedding has zero norm")
    if (class_norms == 0).any():
        raise NumericError(f"class embedding {int(np.argmax(class_norms == 0))} has zero norm")
    similarity = (classes @ image) / (class_norms * image_norm)
    return int(np.argmax(similarity))


def class_captions() -> list[str]:
    return [" ".join(CUE_WORDS[label]) for label in sorted(CUE_WORDS)]


def embed_captions(model: GuidanceModel, captions: Sequence[str], vocab: Vocab) -> np.ndarray:
    config = model.config
    vocab.check_fits(config.vocab_size)
    tokens = np.stack([tokenize(c, vocab, config.max_seq_len) for c in captions])
    model.eval()
    with no_grad():
        text_block = model.encode_text(tokens)
        blank = Tensor.zeros(len(captions), config.image_embed_channels, config.side, config.side)
        return ops.global_avg_pool(fuse(text_block, blank, model)).data


def embed_images(model: GuidanceModel, images: Tensor) -> np.ndarray:
    config = model.config
    model.eval()
    with no_grad():
        image_block = model.encode_image(images)
        blank = Tensor.zeros(images.shape[0], config.text_hidden_dim, config.side, config.side)
        return ops.global_avg_pool(fuse(blank, image_block, model)).data


def zero_shot_evaluate(model: GuidanceModel, data: SplitData, vocab: Vocab, batch_size: int = 64) -> MetricsReport:
    if len(data) == 0:
        raise ConfigError("test split is empty")
    classes = embed_captions(model, class_captions(), vocab)
    predictions = []
    for start in range(0, len(data), batch_size):
        images, _, _ = data.batch(np.arange(start, min(start + batch_size, len(data))))
        predictions.extend(zero_shot_classify(e, classes) for e in embed_images(model, images))
    return metrics_from_predictions(np.asarray(predictions), data.labels)
