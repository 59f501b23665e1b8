"""Analytic-vs-central-difference gradient comparison.

The relative error of a block is norm-wise, ``||a - n|| / max(||a||, ||n||, 1e-10)``,
so elements whose true gradient is ~0 do not dominate. Disagreement is reported,
never raised.
"""
from typing import Callable, Mapping, Optional

import numpy as np
from pydantic import BaseModel

from guidenet.core.errors import ContractError
from guidenet.core.tensor import Tensor, no_grad

DEFAULT_STEP = 1e-5
_FLOOR = 1e-10


class BlockResult(BaseModel):
    name: str
    checked: int
    relative_error: float
    passed: bool


class GradCheckReport(BaseModel):
    tolerance: float
    blocks: list[BlockResult]

    @property
    def max_relative_error(self) -> float:
        return max((b.relative_error for b in self.blocks), default=0.0)

    @property
    def passed(self) -> bool:
        return all(b.passed for b in self.blocks)

    @property
    def offenders(self) -> list[str]:
        return [b.name for b in self.blocks if not b.passed]


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), _FLOOR)
    return float(np.linalg.norm(analytic - numeric) / denom)


def grad_check(
    loss_fn: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    tolerance: float = 1e-4,
    step: float = DEFAULT_STEP,
    fraction: float = 1.0,
    max_per_block: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> GradCheckReport:
    """Compare backward() gradients of ``loss_fn`` against central differences.

    ``loss_fn`` is re-evaluated for every perturbed element, so it must be a pure
    function of ``params``. ``fraction``/``max_per_block`` subsample each block.
    """
    if tolerance <= 0:
        raise ContractError(f"tolerance must be > 0, got {tolerance}")
    rng = rng if rng is not None else np.random.default_rng(0)

    for p in params.values():
        p.zero_grad()
    loss = loss_fn()
    loss.backward()
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data)) for name, p in params.items()}

    blocks = []
    for name, p in params.items():
        size = p.data.size
        count = size if fraction >= 1.0 else max(1, int(round(fraction * size)))
        if max_per_block is not None:
            count = min(count, max_per_block)
        indices = np.arange(size) if count == size else np.sort(rng.choice(size, size=count, replace=False))

        flat = p.data.reshape(-1)
        numeric = np.empty(len(indices))
        with no_grad():
            for k, idx in enumerate(indices):
                original = flat[idx]
                flat[idx] = original + step
                f_plus = loss_fn().item()
                flat[idx] = original - step
                f_minus = loss_fn().item()
                flat[idx] = original
                numeric[k] = (f_plus - f_minus) / (2 * step)

        err = relative_error(analytic[name].reshape(-1)[indices], numeric)
        blocks.append(BlockResult(name=name, checked=len(indices), relative_error=err, passed=err < tolerance))
        p.zero_grad()

    return GradCheckReport(tolerance=tolerance, blocks=blocks)
