"""Jet pseudo-color preprocessing for grayscale images.

Pipeline: resize the intensity field to the model input size with bilinear
interpolation (half-pixel centers), scale intensities from [0, 255] to
[0, 1], map each scalar through the jet colormap, and stack the RGB result
channel-first. The whole path is a deterministic pure function of the input
bytes, so preprocessing the same file twice yields bit-identical tensors.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np
from PIL import Image

# Classic piecewise-linear jet segment anchors, one (position, value) list
# per channel. Each channel is linearly interpolated between its anchors.
JET_ANCHORS = {
    "red": ((0.0, 0.0), (0.35, 0.0), (0.66, 1.0), (0.89, 1.0), (1.0, 0.5)),
    "green": ((0.0, 0.0), (0.125, 0.0), (0.375, 1.0), (0.64, 1.0), (0.91, 0.0), (1.0, 0.0)),
    "blue": ((0.0, 0.5), (0.11, 1.0), (0.34, 1.0), (0.65, 0.0), (1.0, 0.0)),
}

LUT_SIZE = 256


def jet(v) -> np.ndarray:
    """Map intensities in [0, 1] to jet RGB triples in [0, 1]^3.

    Accepts a scalar or array; returns an array with a trailing axis of 3.
    """
    arr = np.asarray(v, dtype=np.float64)
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"jet input must lie in [0, 1], got range [{arr.min()}, {arr.max()}]")
    channels = []
    for name in ("red", "green", "blue"):
        anchors = JET_ANCHORS[name]
        xs = np.array([a[0] for a in anchors])
        ys = np.array([a[1] for a in anchors])
        channels.append(np.interp(arr, xs, ys))
    return np.stack(channels, axis=-1)


@lru_cache(maxsize=None)
def jet_lut() -> np.ndarray:
    """256-entry jet lookup table; entry k equals jet(k/255)."""
    lut = jet(np.arange(LUT_SIZE) / (LUT_SIZE - 1))
    lut.setflags(write=False)
    return lut


_COLORMAPS: dict[str, Callable[[], np.ndarray]] = {"jet": jet_lut}


def register_colormap(name: str, lut_factory: Callable[[], np.ndarray]) -> None:
    """Register an alternative 256x3 colormap LUT under ``name``."""
    _COLORMAPS[name] = lut_factory


def colormap_lut(name: str) -> np.ndarray:
    try:
        return _COLORMAPS[name]()
    except KeyError:
        raise ValueError(f"unknown colormap {name!r}; registered: {sorted(_COLORMAPS)}") from None


def normalize_intensity(pixels) -> np.ndarray:
    """Scale 8-bit intensities to [0, 1] by dividing by 255."""
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise ValueError(
            f"intensities must lie in [0, 255], got range [{arr.min()}, {arr.max()}]"
        )
    return arr / 255.0


def resize_bilinear(field, out_height: int, out_width: int) -> np.ndarray:
    """Bilinear resize with half-pixel centers (align-corners false).

    Source coordinates outside the grid clamp to the edge pixel. A
    same-size resize reproduces the input exactly.
    """
    src = np.asarray(field, dtype=np.float64)
    if src.ndim != 2:
        raise ValueError(f"expected a 2-d field, got shape {src.shape}")
    h, w = src.shape
    if h < 1 or w < 1:
        raise ValueError(f"source dimensions must be >= 1, got {src.shape}")
    if out_height < 1 or out_width < 1:
        raise ValueError(f"target dimensions must be >= 1, got {out_height}x{out_width}")

    ys = (np.arange(out_height) + 0.5) * (h / out_height) - 0.5
    xs = (np.arange(out_width) + 0.5) * (w / out_width) - 0.5
    y0 = np.floor(ys)
    x0 = np.floor(xs)
    fy = ys - y0
    fx = xs - x0
    y0i = np.clip(y0.astype(np.int64), 0, h - 1)
    y1i = np.clip(y0.astype(np.int64) + 1, 0, h - 1)
    x0i = np.clip(x0.astype(np.int64), 0, w - 1)
    x1i = np.clip(x0.astype(np.int64) + 1, 0, w - 1)

    top = src[np.ix_(y0i, x0i)] * (1.0 - fx) + src[np.ix_(y0i, x1i)] * fx
    bot = src[np.ix_(y1i, x0i)] * (1.0 - fx) + src[np.ix_(y1i, x1i)] * fx
    return top * (1.0 - fy)[:, None] + bot * fy[:, None]


def preprocess(image, size: int = 224, colormap: str = "jet", dtype=np.float32) -> np.ndarray:
    """Grayscale image [0, 255] -> channel-first pseudo-color tensor (3, size, size).

    Multi-channel inputs are collapsed to grayscale by channel mean before
    the colormap; the map is only meaningful on a scalar field. LUT lookup
    quantizes the normalized intensity to 256 levels via round(v * 255).
    """
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr.mean(axis=-1)
    if arr.ndim != 2:
        raise ValueError(f"expected a grayscale image, got shape {np.shape(image)}")
    if arr.size == 0:
        raise ValueError("empty image")
    if arr.min() < 0 or arr.max() > 255:
        raise ValueError(
            f"intensities must lie in [0, 255], got range [{arr.min()}, {arr.max()}]"
        )
    lut = colormap_lut(colormap)
    resized = resize_bilinear(arr, size, size)
    norm = normalize_intensity(resized)
    idx = np.rint(norm * (LUT_SIZE - 1)).astype(np.int64)
    rgb = lut[idx]  # (size, size, 3)
    return np.ascontiguousarray(rgb.transpose(2, 0, 1)).astype(dtype)


def load_grayscale(path) -> np.ndarray:
    """Read a raster file as a float intensity field in [0, 255]."""
    with Image.open(path) as img:
        arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr[..., :3].mean(axis=-1)  # drop alpha, collapse channels
    if arr.ndim != 2:
        raise ValueError(f"{path}: unsupported image layout with shape {arr.shape}")
    if arr.min() < 0 or arr.max() > 255:
        raise ValueError(f"{path}: intensities outside [0, 255]")
    return arr
