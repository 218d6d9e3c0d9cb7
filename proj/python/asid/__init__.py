"""Python face of the ASID super-resolution core."""

from ._core import (
    bicubic_resize,
    build_weights,
    conv2d,
    count,
    matmul,
    pixel_shuffle,
    psnr,
    softmax,
    ssim,
    upscale,
    upscale_file,
)

__all__ = [
    "bicubic_resize",
    "build_weights",
    "conv2d",
    "count",
    "matmul",
    "pixel_shuffle",
    "psnr",
    "softmax",
    "ssim",
    "upscale",
    "upscale_file",
]
