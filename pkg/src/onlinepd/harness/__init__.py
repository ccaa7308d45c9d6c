"""Configuration, image I/O, metrics and the command line runner."""
from .config import ConfigError, ExperimentConfig, load_config, parse_config, snapshot
from .imageio import ImageFormatError, decode_pgm, encode_pgm, load_image, save_image
from .metrics import psnr, ssim

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "snapshot",
    "ImageFormatError",
    "decode_pgm",
    "encode_pgm",
    "load_image",
    "save_image",
    "psnr",
    "ssim",
]
