# SPDX-License-Identifier: Apache-2.0
"""Cinemagraph pipeline: synthetic data, recurrent generation, metrics."""

from cinemagen._core import (
    ConfigError,
    DimensionError,
    IoError,
    evaluate,
    gen_dataset,
    generate_frames,
    pattern_length,
    pattern_names,
    psnr,
    read_png,
    ssim,
    synth_sample,
    texture,
    train,
    write_gif,
    write_png,
)

__all__ = [
    "ConfigError",
    "DimensionError",
    "IoError",
    "evaluate",
    "gen_dataset",
    "generate_frames",
    "pattern_length",
    "pattern_names",
    "psnr",
    "read_png",
    "ssim",
    "synth_sample",
    "texture",
    "train",
    "write_gif",
    "write_png",
]
