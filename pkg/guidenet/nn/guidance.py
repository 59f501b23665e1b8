"""The guidance network.

Training (guided): text block and image block are channel-concatenated, fused by a
3-layer CNN, and self-attention over the fused s×s grid yields an s²×s² map. That map
re-weights the *image* block alone, and only the re-weighted image block reaches the
classifier. Inference needs the image alone: by default the attention machinery is
dropped and the guided-trained image encoder + classifier run by themselves.
"""
import math
from typing import Callable, Optional

import numpy as np

from guidenet.core import ops
from guidenet.core.errors import ConfigError, DimensionError
from guidenet.core.tensor import Tensor, scope
from guidenet.models.config import ForwardMode, ModelConfig
from guidenet.nn.image import ImageEncoder, image_encode
from guidenet.nn.layers import BatchNorm2d, Conv2d, Linear, Module
from guidenet.nn.text import TextEncoder, text_encode

AttentionHook = Callable[[Tensor], Tensor]


class FusionCNN(Module):
    """Three 3×3 convs (stride 1, pad 1), each followed by ReLU then BatchNorm."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        super().__init__()
        plan = config.fusion_plan
        self.convs = [Conv2d(c_in, c_out, 3, rng, padding=1) for c_in, c_out in zip(plan[:-1], plan[1:])]
        self.norms = [BatchNorm2d(c_out) for c_out in plan[1:]]
        self.in_channels = plan[0]

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[1] != self.in_channels:
            raise DimensionError(f"fusion expects {self.in_channels} input channels, got {x.shape[1]}")
        for conv, norm in zip(self.convs, self.norms):
            x = norm(ops.relu(conv(x)))
        return x


# --- STAGES ---
def _batched(block: Tensor) -> tuple[Tensor, bool]:
    if block.ndim == 3:
        return ops.reshape(block, (1, *block.shape)), True
    if block.ndim != 4:
        raise DimensionError(f"expected a [C,s,s] or [N,C,s,s] block, got {block.shape}")
    return block, False


def _tokens(block: Tensor) -> Tensor:
    """[N, C, s, s] -> [N, s², C]; grid cell (i, j) becomes token i*s + j."""
    n, c, h, w = block.shape
    return ops.transpose(ops.reshape(block, (n, c, h * w)), (0, 2, 1))


def fuse(text_block: Tensor, image_block: Tensor, model: "GuidanceModel") -> Tensor:
    """Concat (text first) -> FusionCNN. BatchNorm follows the model's train/eval mode."""
    with scope("fusion"):
        text, single = _batched(text_block)
        image, _ = _batched(image_block)
        fused = model.fusion(ops.concat_channels(text, image))
        return ops.reshape(fused, fused.shape[1:]) if single else fused


def self_attention(tokens: Tensor, q_proj: Linear, k_proj: Linear, attention_dim: int) -> Tensor:
    q = q_proj(tokens)
    k = k_proj(tokens)
    scores = ops.scale(ops.matmul(q, ops.swap_last(k)), 1.0 / math.sqrt(attention_dim))
    return ops.softmax_rows(scores)


def attention_map(fusion: Tensor, model: "GuidanceModel") -> Tensor:
    """Row-stochastic [s², s²] map (or [N, s², s²]) from self-attention over fusion tokens."""
    with scope("attention"):
        block, single = _batched(fusion)
        attn = self_attention(_tokens(block), model.q_proj, model.k_proj, model.config.attention_dim)
        return ops.reshape(attn, attn.shape[1:]) if single else attn


def reweight(attn: Tensor, image_block: Tensor) -> Tensor:
    """Apply the attention map to image tokens; no value projection, so C_img is kept."""
    with scope("reweight"):
        block, single = _batched(image_block)
        n, c, h, w = block.shape
        weights = ops.reshape(attn, (1, *attn.shape)) if attn.ndim == 2 else attn
        if weights.shape[-2:] != (h * w, h * w) or weights.shape[0] not in (1, n):
            raise DimensionError(f"attention map {attn.shape} does not fit image block {image_block.shape}")
        mixed = ops.matmul(weights, _tokens(block))                    # [N, s², C]
        out = ops.reshape(ops.transpose(mixed, (0, 2, 1)), (n, c, h, w))
        return ops.reshape(out, out.shape[1:]) if single else out


# --- MODEL ---
class GuidanceModel(Module):
    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.config = config
        self.text = TextEncoder(config, rng)
        self.image = ImageEncoder(config, rng)
        self.fusion = FusionCNN(config, rng)
        self.q_proj = Linear(config.fusion_channels, config.attention_dim, rng, bias=False)
        self.k_proj = Linear(config.fusion_channels, config.attention_dim, rng, bias=False)
        self.classifier = Linear(config.image_embed_channels, config.num_classes, rng)
        # test hook: replaces the computed attention map (e.g. with the identity)
        self.attention_hook: Optional[AttentionHook] = None
        self.text.requires_grad_(not config.text_frozen)

    # --- CONFIG ---
    def set_text_frozen(self, frozen: bool) -> None:
        self.config = self.config.model_copy(update={"text_frozen": frozen})
        self.text.requires_grad_(not frozen)

    def text_parameters(self) -> list[Tensor]:
        return self.text.parameters()

    def baseline_parameters(self) -> list[Tensor]:
        return self.image.parameters() + self.classifier.parameters()

    # --- PIECES ---
    def classify(self, image_block: Tensor) -> Tensor:
        with scope("classifier"):
            block, single = _batched(image_block)
            logits = self.classifier(ops.global_avg_pool(block))
            return ops.reshape(logits, (logits.shape[1],)) if single else logits

    def encode_image(self, images: Tensor) -> Tensor:
        return image_encode(images, self.image)

    def encode_text(self, tokens: np.ndarray) -> Tensor:
        return text_encode(tokens, self.text, frozen=self.config.text_frozen)

    def guidance_map(self, text_block: Tensor, image_block: Tensor) -> Tensor:
        attn = attention_map(fuse(text_block, image_block, self), self)
        return self.attention_hook(attn) if self.attention_hook is not None else attn

    # --- FORWARD MODES ---
    def forward_guided(self, images: Tensor, tokens: np.ndarray) -> Tensor:
        image_block = self.encode_image(images)
        attn = self.guidance_map(self.encode_text(tokens), image_block)
        return self.classify(reweight(attn, image_block))

    def forward_baseline(self, images: Tensor) -> Tensor:
        return self.classify(self.encode_image(images))

    def forward_inference(self, images: Tensor) -> Tensor:
        mode = self.config.inference_attention
        if mode == "none":
            return self.forward_baseline(images)
        if self.config.image_embed_channels != self.config.fusion_channels:
            raise ConfigError("image-self inference needs image_embed_channels == fusion_channels")
        image_block = self.encode_image(images)
        with scope("image_attention"):
            block, _ = _batched(image_block)
            attn = self_attention(_tokens(block), self.q_proj, self.k_proj, self.config.attention_dim)
        return self.classify(reweight(attn, image_block))

    def forward(self, images: Tensor, tokens: Optional[np.ndarray], mode: ForwardMode) -> Tensor:
        if mode is ForwardMode.GUIDED:
            if tokens is None:
                raise ConfigError("guided forward needs caption tokens")
            return self.forward_guided(images, tokens)
        if mode is ForwardMode.BASELINE:
            return self.forward_baseline(images)
        return self.forward_inference(images)