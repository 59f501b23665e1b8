import math
from enum import Enum
from typing import Any, Literal, Optional, Type, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from guidenet.core.errors import ConfigError

T = TypeVar("T", bound=BaseModel)


def parse_config(model_cls: Type[T], data: dict[str, Any]) -> T:
    """Validate ``data`` into ``model_cls``; any validation problem becomes a ConfigError."""
    try:
        return model_cls.model_validate(data)
    except ValidationError as e:
        details = "; ".join(f"{'.'.join(map(str, err['loc'])) or model_cls.__name__}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"Invalid {model_cls.__name__}: {details}") from None


# --- ENUMS ---
class Regime(str, Enum):
    BASELINE = "baseline"
    GUIDED_FROZEN = "guided_frozen"
    GUIDED_UNFROZEN = "guided_unfrozen"

    @property
    def guided(self) -> bool:
        return self is not Regime.BASELINE


class ForwardMode(str, Enum):
    BASELINE = "baseline"
    GUIDED = "guided"
    INFERENCE = "inference"


# --- VOCABULARY WORDS ---
# Cue words are disjoint per label, so the cue token alone determines the label.
CUE_WORDS = {0: ("calm", "chat", "peaceful"), 1: ("cross", "fight", "attack")}
SCENE_WORDS = ("arena", "lobby", "street", "studio", "forest")
DEVICE_WORDS = ("pc", "console", "mobile")
FILLER_WORDS = ("live", "stream", "today", "with", "friends", "ranked", "night", "category", "device")
DEFAULT_WORDS = tuple(sorted({*CUE_WORDS[0], *CUE_WORDS[1], *SCENE_WORDS, *DEVICE_WORDS, *FILLER_WORDS}))
RESERVED_TOKENS = ("<pad>", "<unk>")


# --- MODEL ---
class ModelConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    max_seq_len: int = Field(16, gt=0)
    text_hidden_dim: int = Field(64, gt=0)
    vocab_size: int = Field(len(DEFAULT_WORDS) + len(RESERVED_TOKENS), ge=len(RESERVED_TOKENS))
    image_channels_in: int = Field(3, gt=0)
    image_embed_channels: int = Field(128, gt=0)
    image_encoder_widths: tuple[int, int, int, int] = (16, 32, 64, 64)
    fusion_channels: int = Field(128, gt=0)
    fusion_hidden_channels: Optional[tuple[int, int]] = None
    attention_dim: int = Field(32, gt=0)
    num_classes: int = Field(2, ge=2)
    inference_attention: Literal["none", "image-self"] = "none"
    text_frozen: bool = False

    @field_validator("max_seq_len")
    @classmethod
    def _perfect_square(cls, v: int) -> int:
        if math.isqrt(v) ** 2 != v:
            raise ConfigError(f"max_seq_len must be a perfect square, got {v}")
        return v

    @model_validator(mode="after")
    def _image_self_needs_matching_channels(self) -> "ModelConfig":
        if self.inference_attention == "image-self" and self.image_embed_channels != self.fusion_channels:
            raise ConfigError(
                "inference_attention='image-self' needs image_embed_channels == fusion_channels "
                f"({self.image_embed_channels} != {self.fusion_channels})"
            )
        return self

    @property
    def side(self) -> int:
        return math.isqrt(self.max_seq_len)

    @property
    def fusion_in_channels(self) -> int:
        return self.text_hidden_dim + self.image_embed_channels

    @property
    def fusion_plan(self) -> tuple[int, int, int, int]:
        hidden = self.fusion_hidden_channels
        if hidden is None:
            mid = round(max(self.fusion_channels, self.fusion_in_channels) / 2)
            hidden = (mid, mid)
        return (self.fusion_in_channels, hidden[0], hidden[1], self.fusion_channels)

    def with_overrides(self, **overrides: Any) -> "ModelConfig":
        return parse_config(ModelConfig, {**self.model_dump(), **overrides})


PRESETS: dict[str, ModelConfig] = {
    "desk": ModelConfig(),
    "paper": ModelConfig(
        max_seq_len=121, text_hidden_dim=768, image_embed_channels=256, fusion_channels=1024, attention_dim=64
    ),
    "tiny": ModelConfig(
        max_seq_len=4,
        text_hidden_dim=8,
        image_embed_channels=8,
        image_encoder_widths=(4, 4, 8, 8),
        fusion_channels=8,
        attention_dim=4,
    ),
}
PRESET_ALIASES = {"large": "paper"}


def preset(name: str, **overrides: Any) -> ModelConfig:
    name = PRESET_ALIASES.get(name, name)
    if name not in PRESETS:
        raise ConfigError(f"Unknown model preset '{name}' (choose from {', '.join(PRESETS)})")
    return PRESETS[name].with_overrides(**overrides) if overrides else PRESETS[name]


# --- DATA ---
class GeneratorConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_samples: int = Field(10000, ge=10)
    image_size: int = Field(64, ge=16)
    cue_probability: float = Field(0.5, ge=0.0, le=1.0)
    rho_train: float = Field(0.85, ge=0.0, le=1.0)
    rho_test: float = Field(0.5, ge=0.0, le=1.0)
    decoy_probability: float = Field(0.5, ge=0.0, le=1.0)
    split_ratio: float = Field(0.85, gt=0.0, lt=1.0)
    vocab: tuple[str, ...] = DEFAULT_WORDS
    seed: int = 7

    @field_validator("vocab")
    @classmethod
    def _vocab_covers_caption_words(cls, v: tuple[str, ...]) -> tuple[str, ...]:
        missing = set(DEFAULT_WORDS) - set(v)
        if missing:
            raise ConfigError(f"vocab is missing caption words: {', '.join(sorted(missing))}")
        return tuple(sorted(set(v)))


# --- TRAINING ---
class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    epochs: int = Field(3, ge=1)
    batch_size: int = Field(32, ge=1)
    learning_rate: float = Field(1e-3, gt=0.0)
    seed: int = 1
    regime: Regime = Regime.BASELINE
    preset: str = "desk"

    @property
    def text_frozen(self) -> bool:
        return self.regime is Regime.GUIDED_FROZEN

    @property
    def forward_mode(self) -> ForwardMode:
        return ForwardMode.GUIDED if self.regime.guided else ForwardMode.BASELINE


class ComparisonConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    regimes: tuple[Regime, ...] = (Regime.BASELINE, Regime.GUIDED_FROZEN, Regime.GUIDED_UNFROZEN)
    generator: GeneratorConfig = GeneratorConfig()
    train: TrainConfig = TrainConfig()
    zero_shot: bool = False
    bench_warmup: int = Field(100, ge=0)
    bench_runs: int = Field(1000, ge=30)
    workers: int = Field(1, ge=1)

    @field_validator("seeds")
    @classmethod
    def _non_empty(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        if not v:
            raise ConfigError("at least one seed is required")
        return v

    @field_validator("regimes")
    @classmethod
    def _all_regimes(cls, v: tuple[Regime, ...]) -> tuple[Regime, ...]:
        missing = set(Regime) - set(v)
        if missing:
            raise ConfigError(f"comparison needs every regime, missing: {', '.join(r.value for r in missing)}")
        return v
