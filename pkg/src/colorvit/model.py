"""Vision transformer classifier built on the autodiff Tensor graph.

The network follows the standard recipe: non-overlapping patches are
flattened and linearly embedded, a learned class token is prepended,
learned positional embeddings are added, and a stack of pre-norm
encoder blocks (multi-head self-attention, then a GELU feed-forward,
each wrapped in a residual connection) feeds a final linear head that
reads the class token.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from . import autodiff as ad

VARIANTS = {
    "base": dict(embed_dim=768, depth=12, num_heads=12, ffn_dim=3072),
    "tiny": dict(embed_dim=192, depth=12, num_heads=3, ffn_dim=768),
}

INIT_STD = 0.02


@dataclass(frozen=True)
class ModelConfig:
    image_size: int = 224
    patch_size: int = 16
    channels: int = 3
    num_classes: int = 4
    embed_dim: int = 768
    depth: int = 12
    num_heads: int = 12
    ffn_dim: int = 3072
    norm: str = "pre"               # "pre" | "none"
    attn_scale: str = "per_head"    # "per_head" | "full_dim"
    cls_positional: bool = True

    def __post_init__(self):
        if self.image_size % self.patch_size != 0:
            raise ValueError(
                f"image size {self.image_size} is not a multiple of patch size {self.patch_size}"
            )
        if self.embed_dim % self.num_heads != 0:
            raise ValueError(
                f"embed dim {self.embed_dim} is not divisible by {self.num_heads} heads"
            )
        if self.norm not in ("pre", "none"):
            raise ValueError(f"norm must be 'pre' or 'none', got {self.norm!r}")
        if self.attn_scale not in ("per_head", "full_dim"):
            raise ValueError(
                f"attn_scale must be 'per_head' or 'full_dim', got {self.attn_scale!r}"
            )

    @property
    def num_patches(self) -> int:
        side = self.image_size // self.patch_size
        return side * side

    @property
    def patch_dim(self) -> int:
        return self.channels * self.patch_size * self.patch_size

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.num_heads

    def to_config_dict(self) -> dict[str, str]:
        out = {}
        for key, value in self.__dict__.items():
            out[key] = str(value)
        return out

    @classmethod
    def from_config_dict(cls, raw: Mapping[str, str]) -> "ModelConfig":
        kwargs = {}
        for f in cls.__dataclass_fields__.values():
            if f.name not in raw:
                continue
            text = raw[f.name]
            if f.type == "int":
                kwargs[f.name] = int(text)
            elif f.type == "bool":
                kwargs[f.name] = text == "True"
            else:
                kwargs[f.name] = text
        return cls(**kwargs)


def config_from_variant(name: str, **overrides) -> ModelConfig:
    if name not in VARIANTS:
        raise ValueError(f"unknown variant {name!r}; choose from {sorted(VARIANTS)}")
    return ModelConfig(**{**VARIANTS[name], **overrides})


def patchify(images: np.ndarray, patch_size: int) -> np.ndarray:
    """Cut (B, C, H, W) images into flattened non-overlapping patches.

    Patches are ordered row-major over the patch grid; within a patch
    the channel axis varies slowest, so the flat vector is all of
    channel 0's P*P pixels, then channel 1's, and so on.
    """
    if images.ndim != 4:
        raise ad.ShapeError(f"expected a (B, C, H, W) batch, got shape {images.shape}")
    b, c, h, w = images.shape
    p = patch_size
    if h % p != 0 or w % p != 0:
        raise ad.ShapeError(f"image size {h}x{w} is not a multiple of patch size {p}")
    grid_h, grid_w = h // p, w // p
    patches = images.reshape(b, c, grid_h, p, grid_w, p)
    patches = patches.transpose(0, 2, 4, 1, 3, 5)
    return np.ascontiguousarray(patches).reshape(b, grid_h * grid_w, c * p * p)


def trunc_normal(rng: np.random.Generator, shape, std: float = INIT_STD) -> np.ndarray:
    """Normal(0, std) with values beyond two deviations resampled."""
    out = rng.normal(0.0, std, size=shape)
    bound = 2.0 * std
    bad = np.abs(out) > bound
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > bound
    return out


@dataclass
class ForwardOutput:
    logits: ad.Tensor
    probabilities: np.ndarray
    attention: list[np.ndarray] = field(default_factory=list)

    def predictions(self) -> np.ndarray:
        # argmax resolves ties toward the lowest class index
        return np.argmax(self.probabilities, axis=-1)


class VisionTransformer:
    """Patch-embedding transformer classifier with named parameters."""

    def __init__(self, config: ModelConfig, seed: int = 0, dtype=np.float32):
        self.config = config
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(np.random.SeedSequence([seed]))
        self.params: "OrderedDict[str, ad.Tensor]" = OrderedDict()
        for name, value in self._initial_arrays(rng).items():
            self.params[name] = ad.Tensor(
                value.astype(self.dtype), requires_grad=True
            )

    def _initial_arrays(self, rng) -> "OrderedDict[str, np.ndarray]":
        cfg = self.config
        d, f = cfg.embed_dim, cfg.ffn_dim
        arrays: "OrderedDict[str, np.ndarray]" = OrderedDict()

        def weight(name, shape):
            arrays[name] = trunc_normal(rng, shape)

        def zeros(name, shape):
            arrays[name] = np.zeros(shape)

        def ones(name, shape):
            arrays[name] = np.ones(shape)

        weight("patch_embed.weight", (cfg.patch_dim, d))
        zeros("patch_embed.bias", (d,))
        zeros("cls_token", (1, 1, d))
        weight("pos_embed", (1, cfg.num_patches + 1, d))
        for i in range(cfg.depth):
            prefix = f"blocks.{i}"
            ones(f"{prefix}.norm1.gain", (d,))
            zeros(f"{prefix}.norm1.bias", (d,))
            for proj in ("q", "k", "v", "out"):
                weight(f"{prefix}.attn.{proj}.weight", (d, d))
                zeros(f"{prefix}.attn.{proj}.bias", (d,))
            ones(f"{prefix}.norm2.gain", (d,))
            zeros(f"{prefix}.norm2.bias", (d,))
            weight(f"{prefix}.ffn.fc1.weight", (d, f))
            zeros(f"{prefix}.ffn.fc1.bias", (f,))
            weight(f"{prefix}.ffn.fc2.weight", (f, d))
            zeros(f"{prefix}.ffn.fc2.bias", (d,))
        ones("norm.gain", (d,))
        zeros("norm.bias", (d,))
        weight("head.weight", (d, cfg.num_classes))
        zeros("head.bias", (cfg.num_classes,))
        return arrays

    # -- parameter plumbing -------------------------------------------------

    def parameters(self, trainable_only: bool = False) -> "OrderedDict[str, ad.Tensor]":
        if not trainable_only:
            return self.params
        return OrderedDict(
            (name, p) for name, p in self.params.items() if p.requires_grad
        )

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def freeze_backbone(self) -> None:
        """Mark everything except the classification head as fixed."""
        for name, p in self.params.items():
            p.requires_grad = name.startswith("head.")

    def state_arrays(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((name, p.data.copy()) for name, p in self.params.items())

    def load_arrays(self, arrays: Mapping[str, np.ndarray]) -> None:
        """Replace all parameters; the name set must match exactly."""
        expected = set(self.params)
        given = set(arrays)
        missing = expected - given
        extra = given - expected
        if missing or extra:
            parts = []
            if missing:
                parts.append(f"missing {sorted(missing)}")
            if extra:
                parts.append(f"unexpected {sorted(extra)}")
            raise KeyError("parameter names do not match: " + "; ".join(parts))
        for name, value in arrays.items():
            tensor = self.params[name]
            value = np.asarray(value, dtype=self.dtype)
            if value.shape != tensor.data.shape:
                raise ad.ShapeError(
                    f"parameter {name!r}: stored shape {value.shape} does not match "
                    f"model shape {tensor.data.shape}"
                )
            tensor.data = value.copy()
            tensor.grad = None

    def astype(self, dtype) -> "VisionTransformer":
        """Return a copy of this model with parameters cast to dtype."""
        clone = VisionTransformer.__new__(VisionTransformer)
        clone.config = self.config
        clone.dtype = np.dtype(dtype)
        clone.params = OrderedDict(
            (name, ad.Tensor(p.data.astype(clone.dtype), requires_grad=p.requires_grad))
            for name, p in self.params.items()
        )
        return clone

    # -- forward pass -------------------------------------------------------

    def _maybe_norm(self, x: ad.Tensor, gain: ad.Tensor, bias: ad.Tensor) -> ad.Tensor:
        if self.config.norm == "none":
            return x
        return ad.layer_norm(x, gain, bias)

    def _attention(self, x: ad.Tensor, prefix: str, collect: list | None) -> ad.Tensor:
        cfg = self.config
        p = self.params
        b, t, d = x.shape
        h, dh = cfg.num_heads, cfg.head_dim

        def split_heads(proj):
            w = p[f"{prefix}.{proj}.weight"]
            bias = p[f"{prefix}.{proj}.bias"]
            y = ad.matmul(x, w) + bias
            return y.reshape((b, t, h, dh)).transpose((0, 2, 1, 3))

        q = split_heads("q")
        k = split_heads("k")
        v = split_heads("v")

        if cfg.attn_scale == "per_head":
            scale = 1.0 / np.sqrt(dh)
        else:
            scale = 1.0 / np.sqrt(d)
        scores = ad.matmul(q, k.transpose((0, 1, 3, 2))) * scale
        weights = ad.softmax(scores, axis=-1)
        if collect is not None:
            collect.append(weights.data.copy())
        mixed = ad.matmul(weights, v)
        mixed = mixed.transpose((0, 2, 1, 3)).reshape((b, t, d))
        return ad.matmul(mixed, p[f"{prefix}.out.weight"]) + p[f"{prefix}.out.bias"]

    def _ffn(self, x: ad.Tensor, prefix: str) -> ad.Tensor:
        p = self.params
        hidden = ad.matmul(x, p[f"{prefix}.fc1.weight"]) + p[f"{prefix}.fc1.bias"]
        hidden = ad.gelu(hidden)
        return ad.matmul(hidden, p[f"{prefix}.fc2.weight"]) + p[f"{prefix}.fc2.bias"]

    def encoder_block(self, z: ad.Tensor, index: int,
                      collect: list | None = None) -> ad.Tensor:
        """One residual block: attention then feed-forward, each pre-normed."""
        p = self.params
        prefix = f"blocks.{index}"
        normed = self._maybe_norm(z, p[f"{prefix}.norm1.gain"], p[f"{prefix}.norm1.bias"])
        z = z + self._attention(normed, f"{prefix}.attn", collect)
        normed = self._maybe_norm(z, p[f"{prefix}.norm2.gain"], p[f"{prefix}.norm2.bias"])
        return z + self._ffn(normed, f"{prefix}.ffn")

    def embed(self, images: np.ndarray) -> ad.Tensor:
        """Patch-embed a batch and prepend the class token: (B, N + 1, d).

        Row 0 is the class token; rows 1..N are the linearly projected
        patches, in row-major patch order, with positions added.
        """
        cfg = self.config
        p = self.params
        images = np.asarray(images, dtype=self.dtype)
        if images.ndim == 3:
            images = images[None]
        b = images.shape[0]
        expected = (cfg.channels, cfg.image_size, cfg.image_size)
        if images.shape[1:] != expected:
            raise ad.ShapeError(
                f"expected image batch of shape (B, {expected[0]}, {expected[1]}, "
                f"{expected[2]}), got {images.shape}"
            )

        patches = ad.Tensor(patchify(images, cfg.patch_size))
        tokens = ad.matmul(patches, p["patch_embed.weight"]) + p["patch_embed.bias"]

        cls = p["cls_token"].broadcast_to((b, 1, cfg.embed_dim))
        z = ad.concat([cls, tokens], axis=1)
        if cfg.cls_positional:
            return z + p["pos_embed"]
        zeros = ad.Tensor(np.zeros((1, 1, cfg.embed_dim), dtype=self.dtype))
        pos = ad.concat([zeros, p["pos_embed"][:, 1:, :]], axis=1)
        return z + pos

    def forward(self, images: np.ndarray, return_attention: bool = False) -> ForwardOutput:
        cfg = self.config
        p = self.params
        z = self.embed(images)

        attention: list[np.ndarray] = []
        collect = attention if return_attention else None
        for i in range(cfg.depth):
            z = self.encoder_block(z, i, collect)

        z = self._maybe_norm(z, p["norm.gain"], p["norm.bias"])
        cls_final = z[:, 0, :]
        logits = ad.matmul(cls_final, p["head.weight"]) + p["head.bias"]
        probabilities = ad.softmax_array(logits.data)
        return ForwardOutput(logits=logits, probabilities=probabilities, attention=attention)

    __call__ = forward
