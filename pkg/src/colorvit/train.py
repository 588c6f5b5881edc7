"""Loss, optimizer, training loop with early stopping, and checkpoints.

The loop keeps the best-scoring model on disk rather than in memory:
every strict improvement of monitored accuracy overwrites the
checkpoint, and when patience runs out the best weights are loaded
back, so the returned model is the best one seen, not the last one.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from . import data, store
from .model import ModelConfig, VisionTransformer

PROB_FLOOR = 1e-12


def cross_entropy(logits: ad.Tensor, labels, mode: str = "fused") -> ad.Tensor:
    """Mean negative log-likelihood of the true classes.

    mode="fused" goes through log-softmax directly. mode="literal"
    materializes the probabilities, clamps them at a tiny floor, and
    takes the log, which is the naive reading of the formula. The two
    agree to well under 1e-5 whenever no probability hits the floor.
    """
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ad.ShapeError(f"expected (N, C) logits, got shape {logits.shape}")
    n, c = logits.shape
    if labels.shape != (n,):
        raise ad.ShapeError(f"expected {n} labels, got shape {labels.shape}")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"labels out of range for {c} classes")
    if mode == "fused":
        log_probs = ad.log_softmax(logits, axis=-1)
    elif mode == "literal":
        probs = ad.softmax(logits, axis=-1)
        log_probs = probs.clamp_min(PROB_FLOOR).log()
    else:
        raise ValueError(f"mode must be 'fused' or 'literal', got {mode!r}")
    picked = log_probs[np.arange(n), labels]
    return -picked.mean()


class Adam:
    """Adaptive moment optimizer with bias-corrected estimates.

    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps), where the eps
    sits outside the square root.
    """

    def __init__(self, params, lr: float = 1e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self._v = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, p in self.params.items():
            grad = p.grad
            if grad is None:
                continue
            if not np.isfinite(grad).all():
                raise ad.NonFiniteError(f"gradient for {name!r} is not finite")
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            m_hat = m / bc1
            v_hat = v / bc2
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()


# -- evaluation helpers ------------------------------------------------------


def evaluate_scores(model: VisionTransformer, loader, batch_size: int = 32):
    """Class probabilities and true labels over a whole loader, in order."""
    if len(loader) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    probs = []
    for batch in data.batches(len(loader), batch_size):
        images, _ = loader.gather(batch)
        probs.append(model.forward(images).probabilities)
    return np.concatenate(probs, axis=0), np.asarray(loader.labels)


def evaluate_accuracy(model: VisionTransformer, loader, batch_size: int = 32) -> float:
    probs, labels = evaluate_scores(model, loader, batch_size)
    predictions = np.argmax(probs, axis=-1)
    return float(np.mean(predictions == labels))


# -- checkpoints -------------------------------------------------------------


def save_checkpoint(model: VisionTransformer, path, class_names=(),
                    meta: dict | None = None) -> None:
    store.write_container(
        path,
        model.state_arrays(),
        kind="checkpoint",
        config=model.config.to_config_dict(),
        class_names=class_names,
        meta=dict(meta or {}),
    )


def load_checkpoint(path, dtype=None) -> tuple[VisionTransformer, store.Container]:
    """Rebuild a model from a checkpoint container."""
    container = store.read_container(path)
    if container.kind != "checkpoint":
        raise store.StoreError(f"{path}: kind {container.kind!r}, expected 'checkpoint'")
    config = ModelConfig.from_config_dict(container.config)
    if container.class_names and len(container.class_names) != config.num_classes:
        raise store.StoreError(
            f"{path}: model expects {config.num_classes} classes but the "
            f"checkpoint names {len(container.class_names)}"
        )
    stored = container.tensors()
    if dtype is None:
        dtype = next(iter(stored.values())).dtype if stored else np.float32
    model = VisionTransformer(config, seed=0, dtype=dtype)
    model.load_arrays(stored)
    return model, container


# -- training loop -----------------------------------------------------------


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-4
    patience: int = 15
    seed: int = 0
    loss_mode: str = "fused"
    head_only: bool = False
    clip_norm: float | None = None


def clip_gradients(params, max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most max_norm."""
    if max_norm <= 0:
        raise ValueError(f"clip norm must be positive, got {max_norm}")
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float(np.sum(p.grad.astype(np.float64) ** 2))
    norm = float(np.sqrt(total))
    if norm > max_norm:
        scale = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad = p.grad * scale
    return norm


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    eval_accuracy: float
    is_best: bool


@dataclass
class TrainResult:
    best_epoch: int
    best_accuracy: float
    stopped_epoch: int
    history: list[EpochRecord] = field(default_factory=list)
    checkpoint_path: str = ""


def format_history(records: Sequence[EpochRecord]) -> str:
    lines = ["epoch,train_loss,eval_accuracy,is_best"]
    for r in records:
        lines.append(
            f"{r.epoch},{r.train_loss!r},{r.eval_accuracy!r},{int(r.is_best)}"
        )
    return "\n".join(lines) + "\n"


def save_history(records: Sequence[EpochRecord], path) -> None:
    tmp = os.fspath(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(format_history(records))
    os.replace(tmp, os.fspath(path))


def load_history(path) -> list[EpochRecord]:
    with open(os.fspath(path), encoding="utf-8") as f:
        lines = [line.strip() for line in f if line.strip()]
    if not lines or lines[0] != "epoch,train_loss,eval_accuracy,is_best":
        raise ValueError(f"{path}: unexpected history header")
    records = []
    for line in lines[1:]:
        epoch, loss, acc, best = line.split(",")
        records.append(EpochRecord(int(epoch), float(loss), float(acc), best == "1"))
    return records


def train(
    model: VisionTransformer,
    train_loader,
    monitor_loader,
    config: TrainConfig,
    checkpoint_path,
    eval_fn: Callable[[VisionTransformer, int], float] | None = None,
    progress: Callable[[EpochRecord], None] | None = None,
) -> TrainResult:
    """Fit with per-epoch monitoring and patience-based early stopping.

    Improvement is strict: a tie with the best accuracy so far does not
    reset patience and does not replace the saved checkpoint. Training
    halts once `patience` consecutive epochs fail to improve, and the
    best checkpoint is loaded back into the model before returning.

    eval_fn overrides the monitoring metric; by default it is accuracy
    on monitor_loader.
    """
    if config.patience < 1:
        raise ValueError(f"patience must be at least 1, got {config.patience}")
    if config.epochs < 1:
        raise ValueError(f"epochs must be at least 1, got {config.epochs}")
    checkpoint_path = os.fspath(checkpoint_path)

    if config.head_only:
        model.freeze_backbone()
    trainable = model.parameters(trainable_only=True)
    optimizer = Adam(trainable, lr=config.lr)

    if eval_fn is None:
        def eval_fn(m, epoch):
            return evaluate_accuracy(m, monitor_loader, config.batch_size)

    class_names = getattr(train_loader, "class_names", ())
    n = len(train_loader)
    best_accuracy = -np.inf
    best_epoch = 0
    history: list[EpochRecord] = []
    stopped_epoch = 0

    for epoch in range(1, config.epochs + 1):
        rng = data.derive_epoch_seed(config.seed, epoch)
        loss_total = 0.0
        for batch_index, batch in enumerate(data.batches(n, config.batch_size, rng)):
            images, labels = train_loader.gather(batch)
            try:
                optimizer.zero_grad()
                loss = cross_entropy(
                    model.forward(images).logits, labels, config.loss_mode
                )
                ad.backward(loss)
                if config.clip_norm is not None:
                    clip_gradients(trainable, config.clip_norm)
                optimizer.step()
            except ad.NonFiniteError as err:
                raise ad.NonFiniteError(
                    f"epoch {epoch}, batch {batch_index}: {err}"
                ) from err
            loss_total += loss.item() * len(batch)
        train_loss = loss_total / n

        accuracy = float(eval_fn(model, epoch))
        improved = accuracy > best_accuracy
        if improved:
            best_accuracy = accuracy
            best_epoch = epoch
            save_checkpoint(
                model,
                checkpoint_path,
                class_names=class_names,
                meta={
                    "best_epoch": str(best_epoch),
                    "best_accuracy": repr(best_accuracy),
                    "seed": str(config.seed),
                },
            )
        record = EpochRecord(epoch, train_loss, accuracy, improved)
        history.append(record)
        if progress is not None:
            progress(record)
        stopped_epoch = epoch
        if epoch - best_epoch >= config.patience:
            break

    best_model, _ = load_checkpoint(checkpoint_path, dtype=model.dtype)
    model.load_arrays(best_model.state_arrays())
    return TrainResult(
        best_epoch=best_epoch,
        best_accuracy=float(best_accuracy),
        stopped_epoch=stopped_epoch,
        history=history,
        checkpoint_path=checkpoint_path,
    )
