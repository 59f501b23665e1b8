from typing import Iterator

import numpy as np

from guidenet.core import ops
from guidenet.core.errors import CheckpointFormatError
from guidenet.core.tensor import Tensor


def init_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, name: str = "") -> Tensor:
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)


class Module:
    """Parameter container. Tensor attributes are parameters, Module attributes children."""

    def __init__(self):
        self.training = True

    # --- TRAVERSAL ---
    def children(self) -> Iterator[tuple[str, "Module"]]:
        for key, value in vars(self).items():
            if isinstance(value, Module):
                yield key, value
            elif isinstance(value, (list, tuple)) and value and all(isinstance(v, Module) for v in value):
                for i, child in enumerate(value):
                    yield f"{key}.{i}", child

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for key, value in vars(self).items():
            if isinstance(value, Tensor):
                yield f"{prefix}{key}", value
        for key, child in self.children():
            yield from child.named_parameters(f"{prefix}{key}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def buffer_slots(self, prefix: str = "") -> Iterator[tuple[str, "Module", str]]:
        for key, child in self.children():
            yield from child.buffer_slots(f"{prefix}{key}.")

    def named_buffers(self) -> Iterator[tuple[str, np.ndarray]]:
        for name, owner, leaf in self.buffer_slots():
            yield name, owner.get_buffer(leaf)

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    # --- MODES ---
    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for _, child in self.children():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def requires_grad_(self, flag: bool) -> "Module":
        for p in self.parameters():
            p.requires_grad = flag
            if not flag:
                p.zero_grad()
        return self

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    # --- STATE ---
    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: p.data.copy() for name, p in self.named_parameters()}
        state.update({name: buf.copy() for name, buf in self.named_buffers()})
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        buffers = {name: (owner, leaf) for name, owner, leaf in self.buffer_slots()}
        expected = set(params) | set(buffers)
        if set(state) != expected:
            missing = sorted(expected - set(state))
            unexpected = sorted(set(state) - expected)
            raise CheckpointFormatError(f"state mismatch: missing {missing[:5]}, unexpected {unexpected[:5]}")
        for name, p in params.items():
            if state[name].shape != p.shape:
                raise CheckpointFormatError(f"shape mismatch for {name}: {state[name].shape} vs {p.shape}")
            p.data[...] = state[name]
        for name, (owner, leaf) in buffers.items():
            owner.set_buffer(leaf, state[name])

    def get_buffer(self, name: str) -> np.ndarray:
        raise CheckpointFormatError(f"{type(self).__name__} has no buffer '{name}'")

    def set_buffer(self, name: str, value: np.ndarray) -> None:
        raise CheckpointFormatError(f"{type(self).__name__} has no buffer '{name}'")


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.weight = init_uniform(rng, (in_features, out_features), in_features)
        if bias:
            self.bias = Tensor(np.zeros(out_features), requires_grad=True)
        self.has_bias = bias

    def __call__(self, x: Tensor) -> Tensor:
        out = ops.matmul(x, self.weight)
        return ops.add(out, self.bias) if self.has_bias else out


class Conv2d(Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        padding: int = 0,
        bias: bool = False,
    ):
        super().__init__()
        fan_in = in_channels * kernel_size * kernel_size
        self.kernel = init_uniform(rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in)
        if bias:
            self.bias = Tensor(np.zeros(out_channels), requires_grad=True)
        self.has_bias = bias
        self.stride = stride
        self.padding = padding

    def __call__(self, x: Tensor) -> Tensor:
        out = ops.conv2d(x, self.kernel, stride=self.stride, padding=self.padding)
        if self.has_bias:
            out = ops.add(out, ops.reshape(self.bias, (-1, 1, 1)))
        return out


class BatchNorm2d(Module):
    def __init__(self, channels: int, momentum: float = ops.BN_MOMENTUM, eps: float = ops.BN_EPS):
        super().__init__()
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)
        self.stats = ops.RunningStats.fresh(channels, momentum)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        mode = "train" if self.training else "eval"
        return ops.batchnorm2d(x, self.gamma, self.beta, self.stats, mode=mode, eps=self.eps)

    def buffer_slots(self, prefix: str = "") -> Iterator[tuple[str, Module, str]]:
        yield f"{prefix}running_mean", self, "running_mean"
        yield f"{prefix}running_var", self, "running_var"

    def get_buffer(self, name: str) -> np.ndarray:
        if name == "running_mean":
            return self.stats.mean
        if name == "running_var":
            return self.stats.var
        return super().get_buffer(name)

    def set_buffer(self, name: str, value: np.ndarray) -> None:
        if name == "running_mean":
            self.stats.mean = value.copy()
        elif name == "running_var":
            self.stats.var = value.copy()
        else:
            super().set_buffer(name, value)


class Embedding(Module):
    def __init__(self, num_embeddings: int, dim: int, rng: np.random.Generator):
        super().__init__()
        self.table = Tensor(rng.standard_normal((num_embeddings, dim)), requires_grad=True)

    def __call__(self, ids: np.ndarray) -> Tensor:
        return ops.embedding(self.table, ids)
