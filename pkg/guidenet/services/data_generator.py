"""Synthetic stand-in for labeled stream thumbnails with captions.

Every image carries a background texture, a label-independent bright square ("decoy"),
and, only for label 1, a bright cross: the true cue. A striped "distractor" background
follows the label in a fraction rho of each split (rho_train in train, rho_test in test),
so a model that leans on texture fits the training split but not the test split. The
caption always names a cue word of the right class, so text alone determines the label.

Pixel values are produced with integer arithmetic only.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import orjson
from tqdm import tqdm

from guidenet.core.errors import ConfigError
from guidenet.core.logging import get_logger
from guidenet.core.seeding import stream_rng
from guidenet.core.settings import get_settings
from guidenet.models.config import CUE_WORDS, DEVICE_WORDS, SCENE_WORDS, GeneratorConfig
from guidenet.models.records import ManifestSummary, SampleRecord, SplitSummary
from guidenet.nn.text import Vocab
from guidenet.services.dataset import (
    ATTRIBUTES_NAME,
    IMAGES_DIR,
    MANIFEST_NAME,
    VOCAB_NAME,
    split_dataset,
    train_size,
    write_jsonl,
    write_manifest,
)
from guidenet.services.image_io import encode_image

logger = get_logger(__name__)

CUE_COLOUR = np.array([250, 235, 210], dtype=np.uint8)
STRIPE_COLOUR = np.array([40, 110, 190], dtype=np.uint8)
BACKGROUND_MAX = 64
OPENERS = ("live", "ranked", "night", "today")


@dataclass(frozen=True)
class SampleAttributes:
    id: str
    label: int
    split: str
    distractor: bool
    cue_row: Optional[int]
    cue_col: Optional[int]
    decoy: bool

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "distractor": self.distractor,
            "cue_row": self.cue_row,
            "cue_col": self.cue_col,
            "decoy": self.decoy,
        }


# --- DRAWING ---
def cross_geometry(size: int) -> tuple[int, int]:
    """Arm length and bar thickness of the cue cross for a given image side."""
    return max(2, size // 10), max(1, size // 32)


def draw_background(rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.integers(0, BACKGROUND_MAX, size=(3, size, size), dtype=np.uint8)


def draw_stripes(image: np.ndarray, period: int = 4) -> None:
    rows = (np.arange(image.shape[1]) // (period // 2)) % 2 == 0
    image[:, rows, :] = STRIPE_COLOUR[:, None, None]


def draw_cross(image: np.ndarray, row: int, col: int, arm: int, thick: int) -> None:
    image[:, row:row + thick, col - arm:col + arm + thick] = CUE_COLOUR[:, None, None]
    image[:, row - arm:row + arm + thick, col:col + thick] = CUE_COLOUR[:, None, None]


def draw_square(image: np.ndarray, row: int, col: int, side: int) -> None:
    image[:, row:row + side, col:col + side] = CUE_COLOUR[:, None, None]


def render_sample(
    rng: np.random.Generator, size: int, label: int, distractor: bool, decoy: bool
) -> tuple[np.ndarray, Optional[tuple[int, int]]]:
    image = draw_background(rng, size)
    if distractor:
        draw_stripes(image)
    arm, thick = cross_geometry(size)
    if decoy:
        side = arm + thick
        r, c = rng.integers(0, size - side + 1, size=2)
        draw_square(image, int(r), int(c), side)
    position = None
    if label == 1:
        r, c = rng.integers(arm, size - arm - thick + 1, size=2)
        position = (int(r), int(c))
        draw_cross(image, *position, arm, thick)
    return image, position


def make_caption(rng: np.random.Generator, label: int) -> str:
    """Stream title (with a cue word), scene category and device, as one caption."""
    opener = OPENERS[rng.integers(len(OPENERS))]
    cue = CUE_WORDS[label][rng.integers(len(CUE_WORDS[label]))]
    title = f"{opener} {cue} stream"
    if rng.integers(2):
        title += " with friends"
    scene = SCENE_WORDS[rng.integers(len(SCENE_WORDS))]
    device = DEVICE_WORDS[rng.integers(len(DEVICE_WORDS))]
    return f"{title} category {scene} device {device}"


# --- SUMMARY ---
def point_biserial(flags: np.ndarray, labels: np.ndarray) -> Optional[float]:
    """Pearson correlation of two 0/1 variables; None when either is constant."""
    if len(labels) < 2 or flags.std() == 0 or labels.std() == 0:
        return None
    return float(np.corrcoef(flags.astype(np.float64), labels.astype(np.float64))[0, 1])


def summarize(manifest_path: Path, attributes: list[SampleAttributes]) -> ManifestSummary:
    splits = {}
    for split in ("train", "test"):
        rows = [a for a in attributes if a.split == split]
        labels = np.array([a.label for a in rows], dtype=np.int64)
        flags = np.array([a.distractor for a in rows], dtype=np.int64)
        splits[split] = SplitSummary(
            total=len(rows),
            label_counts={0: int((labels == 0).sum()), 1: int((labels == 1).sum())},
            distractor_label_correlation=point_biserial(flags, labels),
        )
    return ManifestSummary(manifest_path=str(manifest_path), n_samples=len(attributes), splits=splits)


# --- DISTRACTORS ---
def assign_distractors(
    rng: np.random.Generator, labels: np.ndarray, splits: np.ndarray, rho: dict[str, float]
) -> np.ndarray:
    """Stripes follow the label for round(rho·k) of the k samples of each (split, label) group
    and contradict it for the rest; which samples follow is a seeded draw."""
    distractors = np.zeros(len(labels), dtype=bool)
    for split, split_rho in rho.items():
        for label in (0, 1):
            group = np.flatnonzero((splits == split) & (labels == label))
            follow = rng.permutation(group)[:train_size(len(group), split_rho)]
            distractors[group] = not label
            distractors[follow] = bool(label)
    return distractors


# --- GENERATION ---
def generate_dataset(config: GeneratorConfig, out_dir: Union[str, Path]) -> ManifestSummary:
    """Write ``images/*.ppm``, ``manifest.jsonl``, ``attributes.jsonl`` and ``vocab.json``."""
    out_dir = Path(out_dir)
    image_dir = out_dir / IMAGES_DIR
    try:
        image_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"cannot create dataset directory {out_dir}: {e}") from e

    rng = stream_rng(config.seed, "data")
    n = config.n_samples
    width = max(5, len(str(n - 1)))
    ids = [f"s{i:0{width}d}" for i in range(n)]
    labels = (rng.random(n) < config.cue_probability).astype(np.int64)

    train_ids, _ = split_dataset(ids, config.split_ratio, config.seed)
    train_set = set(train_ids)
    splits = np.array(["train" if i in train_set else "test" for i in ids])
    distractors = assign_distractors(rng, labels, splits, {"train": config.rho_train, "test": config.rho_test})

    records: list[SampleRecord] = []
    attributes: list[SampleAttributes] = []
    for i in tqdm(range(n), desc="Generating", unit="img", disable=not get_settings().progress, leave=False):
        label = int(labels[i])
        split = str(splits[i])
        distractor = bool(distractors[i])
        decoy = bool(rng.random() < config.decoy_probability)
        image, position = render_sample(rng, config.image_size, label, distractor, decoy)

        image_path = f"{IMAGES_DIR}/{ids[i]}.ppm"
        try:
            encode_image(image, out_dir / IMAGES_DIR / f"{ids[i]}.ppm")
        except OSError as e:
            raise ConfigError(f"cannot write image {image_path}: {e}") from e

        records.append(SampleRecord(id=ids[i], label=label, caption=make_caption(rng, label), image_path=image_path, split=split))
        attributes.append(
            SampleAttributes(
                id=ids[i],
                label=label,
                split=split,
                distractor=distractor,
                cue_row=position[0] if position else None,
                cue_col=position[1] if position else None,
                decoy=decoy,
            )
        )

    manifest_path = out_dir / MANIFEST_NAME
    write_manifest(records, manifest_path)
    write_jsonl([a.to_json() for a in attributes], out_dir / ATTRIBUTES_NAME)
    try:
        (out_dir / VOCAB_NAME).write_bytes(orjson.dumps(Vocab(config.vocab).to_json()))
    except OSError as e:
        raise ConfigError(f"cannot write vocab to {out_dir}: {e}") from e

    summary = summarize(manifest_path, attributes)
    logger.info(
        "Wrote %d samples to %s (train %d / test %d)",
        n, out_dir, summary.splits["train"].total, summary.splits["test"].total,
    )
    return summary


def load_attributes(dataset_dir: Union[str, Path]) -> dict[str, dict]:
    path = Path(dataset_dir) / ATTRIBUTES_NAME
    with open(path, "rb") as f:
        rows = [orjson.loads(line) for line in f if line.strip()]
    return {row["id"]: row for row in rows}
