from typing import Iterable, Sequence

import numpy as np

from guidenet.core import ops
from guidenet.core.errors import ConfigError, ContractError, DimensionError
from guidenet.core.tensor import Tensor, no_grad, scope
from guidenet.models.config import RESERVED_TOKENS, ModelConfig
from guidenet.nn.layers import Embedding, Linear, Module

PAD_ID = 0
UNK_ID = 1


class Vocab:
    """Word -> id map with ``<pad>`` = 0 and ``<unk>`` = 1; other words follow in sorted order."""

    def __init__(self, words: Iterable[str]):
        ordered = sorted({w.lower() for w in words} - set(RESERVED_TOKENS))
        self.tokens: list[str] = [*RESERVED_TOKENS, *ordered]
        self.ids: dict[str, int] = {tok: i for i, tok in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def check_fits(self, vocab_size: int) -> "Vocab":
        if len(self) > vocab_size:
            raise ConfigError(f"dataset vocabulary has {len(self)} tokens but the model embeds only vocab_size={vocab_size}")
        return self

    def lookup(self, word: str) -> int:
        return self.ids.get(word, UNK_ID)

    def to_json(self) -> list[str]:
        return list(self.tokens)

    @classmethod
    def from_json(cls, tokens: Sequence[str]) -> "Vocab":
        if list(tokens[:2]) != list(RESERVED_TOKENS):
            raise ContractError(f"vocab must start with {RESERVED_TOKENS}, got {list(tokens[:2])}")
        return cls(tokens[2:])


def tokenize(caption: str, vocab: Vocab, max_seq_len: int) -> np.ndarray:
    """Lowercase, whitespace-split, map to ids (UNK for misses), then truncate or PAD to length."""
    ids = [vocab.lookup(word) for word in caption.lower().split()][:max_seq_len]
    ids.extend([PAD_ID] * (max_seq_len - len(ids)))
    return np.asarray(ids, dtype=np.int64)


class TextEncoder(Module):
    """Token embeddings refined by two position-wise linear+ReLU layers, laid out on an s×s grid."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        super().__init__()
        d = config.text_hidden_dim
        self.embedding = Embedding(config.vocab_size, d, rng)
        self.refine1 = Linear(d, d, rng)
        self.refine2 = Linear(d, d, rng)
        self.seq_len = config.max_seq_len
        self.side = config.side
        self.hidden = d

    def __call__(self, tokens: np.ndarray) -> Tensor:
        tokens = np.asarray(tokens, dtype=np.int64)
        single = tokens.ndim == 1
        batch = tokens[None] if single else tokens
        if batch.shape[-1] != self.seq_len:
            raise DimensionError(f"expected {self.seq_len} tokens per caption, got {batch.shape[-1]}")
        n = batch.shape[0]

        x = self.embedding(batch)                       # [N, L, D]
        x = ops.relu(self.refine1(x))
        x = ops.relu(self.refine2(x))
        x = ops.transpose(x, (0, 2, 1))                 # [N, D, L]
        # token i lands in cell (i // s, i % s)
        block = ops.reshape(x, (n, self.hidden, self.side, self.side))
        return ops.reshape(block, block.shape[1:]) if single else block


def text_encode(tokens: np.ndarray, encoder: TextEncoder, frozen: bool) -> Tensor:
    """[D, s, s] (or [N, D, s, s]) text block; with ``frozen`` no gradient reaches the encoder."""
    with scope("text"):
        if frozen:
            with no_grad():
                return encoder(tokens)
        return encoder(tokens)
