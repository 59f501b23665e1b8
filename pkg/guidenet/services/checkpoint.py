"""GNET checkpoints.

Layout (little-endian): ``b"GNET"``, u32 version, u32 config length, canonical JSON
ModelConfig, then tensors until end of file, each as u32 name length, UTF-8 name,
u32 rank, u64 dims, row-major float64 values. Batch-norm running statistics are
stored as ordinary tensors named ``<layer>.running_mean`` / ``<layer>.running_var``.
"""
import math
import struct
from pathlib import Path
from typing import Union

import numpy as np
import orjson

from guidenet.core.errors import CheckpointFormatError, ConfigError
from guidenet.core.logging import get_logger
from guidenet.models.config import ModelConfig, parse_config
from guidenet.nn.guidance import GuidanceModel

logger = get_logger(__name__)

MAGIC = b"GNET"
VERSION = 1


def canonical_config(config: ModelConfig) -> bytes:
    return orjson.dumps(config.model_dump(mode="json"), option=orjson.OPT_SORT_KEYS)


def encode_checkpoint(model: GuidanceModel) -> bytes:
    config_bytes = canonical_config(model.config)
    parts = [MAGIC, struct.pack("<II", VERSION, len(config_bytes)), config_bytes]
    for name, value in model.state_dict().items():
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<I", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack(f"<I{value.ndim}Q", value.ndim, *value.shape))
        parts.append(np.ascontiguousarray(value, dtype="<f8").tobytes())
    return b"".join(parts)


def save_checkpoint(model: GuidanceModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_checkpoint(model))
    except OSError as e:
        raise ConfigError(f"cannot write checkpoint {path}: {e}") from e
    logger.debug("Saved checkpoint %s", path)
    return path


class _Reader:
    def __init__(self, payload: bytes, source: str):
        self.payload = payload
        self.offset = 0
        self.source = source

    @property
    def exhausted(self) -> bool:
        return self.offset >= len(self.payload)

    @property
    def remaining(self) -> int:
        return len(self.payload) - self.offset

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.payload):
            raise CheckpointFormatError(f"{self.source}: truncated at byte {self.offset}")
        chunk = self.payload[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(payload: bytes, source: str = "<bytes>") -> tuple[ModelConfig, dict[str, np.ndarray]]:
    reader = _Reader(payload, source)
    magic = reader.take(len(MAGIC))
    if magic != MAGIC:
        raise CheckpointFormatError(f"{source}: bad magic {magic!r}, expected {MAGIC!r}")
    (version,) = reader.unpack("<I")
    if version != VERSION:
        raise CheckpointFormatError(f"{source}: unsupported checkpoint version {version} (expected {VERSION})")

    (config_len,) = reader.unpack("<I")
    try:
        config = parse_config(ModelConfig, orjson.loads(reader.take(config_len)))
    except (orjson.JSONDecodeError, ConfigError) as e:
        raise CheckpointFormatError(f"{source}: unreadable model config ({e})") from None

    state: dict[str, np.ndarray] = {}
    while not reader.exhausted:
        (name_len,) = reader.unpack("<I")
        try:
            name = reader.take(name_len).decode("utf-8")
        except UnicodeDecodeError:
            raise CheckpointFormatError(f"{source}: tensor name is not UTF-8") from None
        (rank,) = reader.unpack("<I")
        dims = reader.unpack(f"<{rank}Q")
        count = math.prod(dims)
        if 8 * count > reader.remaining:
            raise CheckpointFormatError(f"{source}: tensor '{name}' declares {count} values but only {reader.remaining} bytes remain")
        values = np.frombuffer(reader.take(8 * count), dtype="<f8")
        try:
            state[name] = values.astype(np.float64).reshape(dims)
        except ValueError as e:
            raise CheckpointFormatError(f"{source}: tensor '{name}' has unusable shape {dims} ({e})") from None
    return config, state


def read_checkpoint(path: Union[str, Path]) -> tuple[ModelConfig, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"checkpoint not found: {path}")
    return decode_checkpoint(path.read_bytes(), str(path))


def load_checkpoint(path: Union[str, Path]) -> GuidanceModel:
    config, state = read_checkpoint(path)
    # weights are overwritten below; the rng only shapes the throwaway init
    model = GuidanceModel(config, np.random.default_rng(0))
    model.load_state_dict(state)
    model.eval()
    return model
