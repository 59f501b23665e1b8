"""Gradient checks over every primitive and over whole guided models.

Primitive cases project their output onto a fixed random tensor so every output
element contributes to the scalar loss. Block names are ``<case>.<input>`` for
primitives and ``<preset>.<parameter path>`` for models.
"""
from typing import Callable, Optional

import numpy as np

from guidenet.core import ops
from guidenet.core.gradcheck import BlockResult, GradCheckReport, grad_check
from guidenet.core.logging import get_logger
from guidenet.core.seeding import stream_rng
from guidenet.core.tensor import Tensor
from guidenet.models.config import ForwardMode, preset
from guidenet.nn.guidance import GuidanceModel

logger = get_logger(__name__)

Case = tuple[Callable[[], Tensor], dict[str, Tensor]]


def _leaf(rng: np.random.Generator, *shape: int, away_from_zero: bool = False) -> Tensor:
    data = rng.standard_normal(shape)
    if away_from_zero:
        # keep relu inputs off the kink
        data = np.sign(data) * (np.abs(data) + 0.1)
    return Tensor(data, requires_grad=True)


def _case(rng: np.random.Generator, op: Callable[..., Tensor], params: dict[str, Tensor], out_shape: tuple[int, ...]) -> Case:
    """Loss = <op(**params), W> for a fixed random W; params are bound here, not looked up later."""
    weights = Tensor(rng.standard_normal(out_shape))
    return (lambda: ops.sum_all(ops.mul(op(**params), weights))), params


def primitive_cases(rng: np.random.Generator) -> dict[str, Case]:
    ids = np.array([[0, 2, 2], [5, 1, 0]])
    labels = np.array([0, 2, 1, 2])
    logits = _leaf(rng, 4, 3)
    return {
        "add": _case(rng, lambda a, b: ops.add(a, b), {"a": _leaf(rng, 3, 4), "b": _leaf(rng, 4)}, (3, 4)),
        "mul": _case(rng, lambda a, b: ops.mul(a, b), {"a": _leaf(rng, 3, 4), "b": _leaf(rng, 3, 1)}, (3, 4)),
        "matmul": _case(rng, lambda a, b: ops.matmul(a, b), {"a": _leaf(rng, 2, 3, 4), "b": _leaf(rng, 4, 5)}, (2, 3, 5)),
        "relu": _case(rng, lambda input: ops.relu(input), {"input": _leaf(rng, 4, 5, away_from_zero=True)}, (4, 5)),
        "conv2d": _case(
            rng,
            lambda input, kernel: ops.conv2d(input, kernel, stride=2, padding=1),
            {"input": _leaf(rng, 2, 2, 5, 5), "kernel": _leaf(rng, 3, 2, 3, 3)},
            (2, 3, 3, 3),
        ),
        "batchnorm2d": _case(
            rng,
            lambda input, gamma, beta: ops.batchnorm2d(input, gamma, beta, ops.RunningStats.fresh(2), mode="train"),
            {"input": _leaf(rng, 3, 2, 3, 3), "gamma": _leaf(rng, 2), "beta": _leaf(rng, 2)},
            (3, 2, 3, 3),
        ),
        "softmax_rows": _case(rng, lambda input: ops.softmax_rows(input), {"input": _leaf(rng, 2, 4, 5)}, (2, 4, 5)),
        "concat_channels": _case(
            rng, lambda a, b: ops.concat_channels(a, b), {"a": _leaf(rng, 2, 3, 2, 2), "b": _leaf(rng, 2, 1, 2, 2)}, (2, 4, 2, 2)
        ),
        "embedding": _case(rng, lambda table: ops.embedding(table, ids), {"table": _leaf(rng, 6, 3)}, (2, 3, 3)),
        "adaptive_avg_pool2d": _case(
            rng, lambda input: ops.adaptive_avg_pool2d(input, (3, 3)), {"input": _leaf(rng, 1, 2, 5, 5)}, (1, 2, 3, 3)
        ),
        "global_avg_pool": _case(rng, lambda input: ops.global_avg_pool(input), {"input": _leaf(rng, 2, 3, 2, 2)}, (2, 3)),
        "transpose": _case(rng, lambda input: ops.transpose(input, (0, 2, 1)), {"input": _leaf(rng, 2, 3, 4)}, (2, 4, 3)),
        "cross_entropy": (lambda: ops.cross_entropy(logits, labels), {"logits": logits}),
    }


def model_case(preset_name: str, rng: np.random.Generator, batch: int = 2, image_size: int = 32) -> Case:
    config = preset(preset_name)
    model = GuidanceModel(config, rng)
    model.train()
    images = Tensor(rng.uniform(0.0, 1.0, size=(batch, config.image_channels_in, image_size, image_size)))
    tokens = rng.integers(0, config.vocab_size, size=(batch, config.max_seq_len))
    labels = np.arange(batch) % config.num_classes

    def loss():
        return ops.cross_entropy(model.forward(images, tokens, ForwardMode.GUIDED), labels)

    return loss, dict(model.named_parameters())


def _prefixed(report: GradCheckReport, prefix: str) -> list[BlockResult]:
    return [b.model_copy(update={"name": f"{prefix}.{b.name}"}) for b in report.blocks]


def run_grad_suite(
    tolerance: float = 1e-4,
    fraction: float = 0.05,
    max_per_block: Optional[int] = 20,
    seed: int = 0,
    presets: tuple[str, ...] = ("desk",),
) -> GradCheckReport:
    """All primitives in full, then each model preset on a random ``fraction`` of every parameter block."""
    blocks: list[BlockResult] = []
    rng = stream_rng(seed, "init")
    for name, (loss_fn, params) in primitive_cases(rng).items():
        report = grad_check(loss_fn, params, tolerance=tolerance)
        blocks.extend(_prefixed(report, name))
        logger.debug("%s: max rel err %.3e", name, report.max_relative_error)

    for preset_name in presets:
        loss_fn, params = model_case(preset_name, rng)
        report = grad_check(
            loss_fn, params, tolerance=tolerance, fraction=fraction, max_per_block=max_per_block, rng=stream_rng(seed, "bench")
        )
        blocks.extend(_prefixed(report, preset_name))
        logger.info("%s model: %d blocks, max rel err %.3e", preset_name, len(report.blocks), report.max_relative_error)

    return GradCheckReport(tolerance=tolerance, blocks=blocks)
