"""Pseudo-color vision transformer pipeline for grayscale image classification.

The package turns single-channel images into jet-colormapped RGB
tensors, trains a from-scratch vision transformer on them with a small
reverse-mode autodiff engine, and evaluates with multi-class metrics
(confusion matrix, macro precision/recall/F1, one-vs-rest ROC/AUC).
"""

from . import autodiff, data, metrics, model, plots, pseudocolor, store, synthetic, train
from .autodiff import NonFiniteError, ShapeError, Tensor
from .model import ModelConfig, VisionTransformer, config_from_variant
from .train import Adam, TrainConfig, cross_entropy

__version__ = "0.1.0"

__all__ = [
    "autodiff",
    "data",
    "metrics",
    "model",
    "plots",
    "pseudocolor",
    "store",
    "synthetic",
    "train",
    "Tensor",
    "ShapeError",
    "NonFiniteError",
    "ModelConfig",
    "VisionTransformer",
    "config_from_variant",
    "Adam",
    "TrainConfig",
    "cross_entropy",
    "__version__",
]
