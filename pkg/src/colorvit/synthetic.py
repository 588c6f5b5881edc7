"""Synthetic grayscale corpus with class-dependent geometry.

Four shape classes (horizontal bars, centered cross, filled disk,
hollow square) rendered as noisy 8-bit grayscale PNGs. Bright
foreground on a dark background, with jittered position and size, so a
classifier must read shape rather than a single pixel. Every image is
seeded independently from (seed, split, class, index), which makes the
corpus identical no matter the generation order.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

CLASS_NAMES = ("bars", "cross", "disk", "square")

_BG_MEAN, _BG_STD = 30.0, 15.0
_FG_MEAN, _FG_STD = 220.0, 15.0


def _render(class_name: str, size: int, rng: np.random.Generator) -> np.ndarray:
    ys, xs = np.mgrid[0:size, 0:size]
    cy = size / 2 + rng.integers(-4, 5)
    cx = size / 2 + rng.integers(-4, 5)

    if class_name == "bars":
        band = 8
        phase = int(rng.integers(0, band))
        mask = ((ys + phase) // band) % 2 == 0
    elif class_name == "cross":
        width = 5 + int(rng.integers(-1, 2))
        mask = (np.abs(xs - cx) < width) | (np.abs(ys - cy) < width)
    elif class_name == "disk":
        radius = size * 0.28 + rng.integers(-2, 3)
        mask = (xs - cx) ** 2 + (ys - cy) ** 2 < radius**2
    elif class_name == "square":
        radius = size * 0.30 + rng.integers(-2, 3)
        thickness = 5 + int(rng.integers(-1, 2))
        cheb = np.maximum(np.abs(xs - cx), np.abs(ys - cy))
        mask = (cheb <= radius) & (cheb > radius - thickness)
    else:
        raise ValueError(f"unknown class {class_name!r}")

    pixels = rng.normal(_BG_MEAN, _BG_STD, (size, size))
    pixels[mask] = rng.normal(_FG_MEAN, _FG_STD, int(mask.sum()))
    return np.clip(np.round(pixels), 0, 255).astype(np.uint8)


def write_toy_corpus(root, n_train: int = 400, n_test: int = 100,
                     size: int = 64, seed: int = 0) -> tuple[str, str]:
    """Write train/ and test/ class-per-directory trees; returns their roots."""
    root = os.fspath(root)
    splits = (("train", n_train), ("test", n_test))
    for split_id, (split, total) in enumerate(splits):
        if total % len(CLASS_NAMES) != 0:
            raise ValueError(
                f"{split} count {total} is not divisible by {len(CLASS_NAMES)} classes"
            )
        per_class = total // len(CLASS_NAMES)
        for class_idx, class_name in enumerate(CLASS_NAMES):
            class_dir = os.path.join(root, split, class_name)
            os.makedirs(class_dir, exist_ok=True)
            for i in range(per_class):
                rng = np.random.default_rng(
                    np.random.SeedSequence([seed, split_id, class_idx, i])
                )
                image = _render(class_name, size, rng)
                Image.fromarray(image, mode="L").save(
                    os.path.join(class_dir, f"{class_name}_{i:04d}.png")
                )
    return os.path.join(root, "train"), os.path.join(root, "test")
