import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, TypeVar, Union

import numpy as np
import orjson
from pydantic import ValidationError

from guidenet.core.errors import (
    ConfigError,
    DimensionError,
    DuplicateRecordError,
    ManifestError,
    ManifestParseError,
    ReferentialError,
)
from guidenet.core.logging import get_logger
from guidenet.core.seeding import stream_rng
from guidenet.core.tensor import Tensor
from guidenet.models.config import DEFAULT_WORDS
from guidenet.models.records import SampleRecord
from guidenet.nn.text import Vocab, tokenize
from guidenet.services.image_io import read_pixels

logger = get_logger(__name__)

T = TypeVar("T")

MANIFEST_NAME = "manifest.jsonl"
ATTRIBUTES_NAME = "attributes.jsonl"
VOCAB_NAME = "vocab.json"
IMAGES_DIR = "images"


# --- SPLIT ---
def train_size(n: int, ratio: float) -> int:
    return int(np.floor(ratio * n + 0.5))


def split_dataset(items: Sequence[T], ratio: float, seed: int) -> tuple[list[T], list[T]]:
    """Seeded shuffle, then the first round(ratio·n) items train and the rest test."""
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio must be in (0, 1), got {ratio}")
    n = len(items)
    if n < 2:
        raise ConfigError(f"need at least 2 records to split, got {n}")
    order = stream_rng(seed, "split").permutation(n)
    cut = train_size(n, ratio)
    return [items[i] for i in order[:cut]], [items[i] for i in order[cut:]]


# --- MANIFEST ---
def write_jsonl(rows: Sequence[dict], path: Union[str, Path]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            for row in rows:
                f.write(orjson.dumps(row))
                f.write(b"\n")
    except OSError as e:
        raise ConfigError(f"cannot write {path}: {e}") from e


def write_manifest(records: Sequence[SampleRecord], path: Union[str, Path]) -> None:
    write_jsonl([r.model_dump() for r in records], path)


def load_manifest(path: Union[str, Path], check_images: bool = True) -> list[SampleRecord]:
    """Parse and validate every line; image paths are checked relative to the manifest's folder."""
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")

    records: list[SampleRecord] = []
    seen: set[str] = set()
    with open(path, "rb") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = SampleRecord.model_validate(orjson.loads(line))
            except orjson.JSONDecodeError as e:
                raise ManifestParseError(path, line_no, f"invalid JSON ({e})") from None
            except ValidationError as e:
                fields = ", ".join(".".join(map(str, err["loc"])) or "record" for err in e.errors())
                raise ManifestParseError(path, line_no, f"invalid record fields: {fields}") from None
            if record.id in seen:
                raise DuplicateRecordError(record.id)
            seen.add(record.id)
            records.append(record)

    if check_images:
        missing = [r.id for r in records if not resolve_image(path, r).is_file()]
        if missing:
            raise ReferentialError(missing)
    return records


def resolve_image(manifest_path: Union[str, Path], record: SampleRecord) -> Path:
    return Path(manifest_path).parent / Path(*record.image_path.split("/"))


def load_vocab(dataset_dir: Union[str, Path]) -> Vocab:
    vocab_path = Path(dataset_dir) / VOCAB_NAME
    if not vocab_path.is_file():
        return Vocab(DEFAULT_WORDS)
    return Vocab.from_json(orjson.loads(vocab_path.read_bytes()))


def ids_digest(ids: Sequence[str]) -> str:
    return hashlib.sha256("\n".join(ids).encode("utf-8")).hexdigest()


# --- LOADED SPLITS ---
@dataclass
class SplitData:
    """One split held in memory: uint8 images, padded token ids, labels, ids."""

    ids: list[str]
    images: np.ndarray          # [N, 3, H, W] uint8
    tokens: np.ndarray          # [N, L] int64
    labels: np.ndarray          # [N] int64

    def __len__(self) -> int:
        return len(self.ids)

    def batch(self, indices: np.ndarray) -> tuple[Tensor, np.ndarray, np.ndarray]:
        return Tensor(self.images[indices] / 255.0), self.tokens[indices], self.labels[indices]

    def image(self, index: int) -> Tensor:
        return Tensor(self.images[index] / 255.0)

    @property
    def digest(self) -> str:
        return ids_digest(self.ids)


def load_split(
    manifest_path: Union[str, Path],
    split: str,
    max_seq_len: int,
    vocab: Optional[Vocab] = None,
    readers: int = 4,
) -> SplitData:
    manifest_path = Path(manifest_path)
    records = [r for r in load_manifest(manifest_path) if r.split == split]
    vocab = vocab if vocab is not None else load_vocab(manifest_path.parent)

    # records are immutable, so decoding can fan out over reader threads
    with ThreadPoolExecutor(max_workers=max(1, readers)) as pool:
        pixels = list(pool.map(lambda r: read_pixels(resolve_image(manifest_path, r)), records))

    shapes = {p.shape for p in pixels}
    if len(shapes) > 1:
        raise DimensionError(f"images in split '{split}' differ in size: {sorted(shapes)}")
    images = np.stack(pixels) if pixels else np.zeros((0, 3, 0, 0), dtype=np.uint8)
    tokens = np.stack([tokenize(r.caption, vocab, max_seq_len) for r in records]) if records else np.zeros((0, max_seq_len), dtype=np.int64)

    logger.debug("Loaded %d '%s' samples from %s", len(records), split, manifest_path)
    return SplitData(
        ids=[r.id for r in records],
        images=images,
        tokens=tokens,
        labels=np.asarray([r.label for r in records], dtype=np.int64),
    )
