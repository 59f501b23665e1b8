import numpy as np

from guidenet.core import ops
from guidenet.core.errors import DimensionError
from guidenet.core.tensor import Tensor, scope
from guidenet.models.config import ModelConfig
from guidenet.nn.layers import BatchNorm2d, Conv2d, Module

MIN_IMAGE_SIDE = 16


class ConvBlock(Module):
    """3×3 stride-2 conv -> BatchNorm -> ReLU; halves the spatial grid."""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator):
        super().__init__()
        self.conv = Conv2d(in_channels, out_channels, 3, rng, stride=2, padding=1)
        self.norm = BatchNorm2d(out_channels)

    def __call__(self, x: Tensor) -> Tensor:
        return ops.relu(self.norm(self.conv(x)))


class ImageEncoder(Module):
    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        super().__init__()
        widths = (config.image_channels_in, *config.image_encoder_widths)
        self.blocks = [ConvBlock(c_in, c_out, rng) for c_in, c_out in zip(widths[:-1], widths[1:])]
        self.project = Conv2d(widths[-1], config.image_embed_channels, 1, rng, bias=True)
        self.side = config.side
        self.channels_in = config.image_channels_in

    def __call__(self, images: Tensor) -> Tensor:
        single = images.ndim == 3
        x = ops.reshape(images, (1, *images.shape)) if single else images
        if x.ndim != 4 or x.shape[1] != self.channels_in:
            raise DimensionError(f"expected [{self.channels_in},H,W] images, got {images.shape}")
        if x.shape[2] < MIN_IMAGE_SIDE or x.shape[3] < MIN_IMAGE_SIDE:
            raise DimensionError(f"images must be at least {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}, got {x.shape[2]}x{x.shape[3]}")
        for block in self.blocks:
            x = block(x)
        x = ops.adaptive_avg_pool2d(self.project(x), (self.side, self.side))
        return ops.reshape(x, x.shape[1:]) if single else x


def image_encode(images: Tensor, encoder: ImageEncoder) -> Tensor:
    """[C_img, s, s] (or [N, C_img, s, s]) image block, whatever the input resolution."""
    with scope("image"):
        return encoder(images)
