"""Batch command-line entry point.

Subcommands: preprocess, train, evaluate, predict, plot. Configuration
comes from three layers with strict precedence: command-line flags win
over the --config file, which wins over built-in defaults. Every run
that owns an output directory echoes the fully resolved configuration
there, including the defaults that applied implicitly, so a run can be
reproduced from its artifacts alone.

Diagnostics go to stderr; data goes to files or stdout. Exit code 0
means no error was recorded.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import data, metrics, plots, pseudocolor
from . import train as training
from .model import VARIANTS, VisionTransformer, config_from_variant

OUT_ENV = "COLORVIT_OUT"


@dataclass
class RunConfig:
    # model
    variant: str = "base"
    image_size: int = 224
    norm: str = "pre"
    attn_scale: str = "per_head"
    cls_positional: bool = True
    # training
    epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-4
    patience: int = 15
    seed: int = 0
    val_fraction: float = 0.0
    head_only: bool = False
    loss_mode: str = "fused"
    # run
    data_root: str = ""
    out: str = ""
    colormap: str = "jet"
    device: str = "auto"

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {sorted(VARIANTS)}, got {self.variant!r}")
        if self.device not in ("auto", "cpu"):
            raise ValueError(f"device must be 'auto' or 'cpu', got {self.device!r}")
        if self.loss_mode not in ("fused", "literal"):
            raise ValueError(f"loss_mode must be 'fused' or 'literal', got {self.loss_mode!r}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError(f"val_fraction must lie in [0, 1), got {self.val_fraction}")
        for name in ("epochs", "batch_size", "patience"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")

    @property
    def resolved_device(self) -> str:
        # auto-detection degrades to the only device there is
        return "cpu"


_SECTIONS = {
    "model": ("variant", "image_size", "norm", "attn_scale", "cls_positional"),
    "train": ("epochs", "batch_size", "lr", "patience", "seed",
              "val_fraction", "head_only", "loss_mode"),
    "run": ("data_root", "out", "colormap", "device"),
}
_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_KEY_SECTION = {key: section for section, keys in _SECTIONS.items() for key in keys}


def _convert(key: str, text: str):
    kind = _FIELD_TYPES[key]
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    if kind == "bool":
        lowered = text.strip().lower()
        if lowered in ("true", "yes", "on", "1"):
            return True
        if lowered in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"config key {key!r}: {text!r} is not a boolean")
    return text


def load_config_file(path) -> dict:
    parser = configparser.ConfigParser()
    read = parser.read(os.fspath(path))
    if not read:
        raise FileNotFoundError(f"config file {path!r} not found")
    overrides = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ValueError(f"config file {path}: unknown section [{section}]")
        for key, value in parser.items(section):
            if key not in _SECTIONS[section]:
                raise ValueError(f"config file {path}: unknown key {key!r} in [{section}]")
            overrides[key] = _convert(key, value)
    return overrides


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    explicit: set[str] = set()
    if getattr(args, "config", None):
        for key, value in load_config_file(args.config).items():
            setattr(cfg, key, value)
            explicit.add(key)
    for key in _FIELD_TYPES:
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            setattr(cfg, key, cli_value)
            explicit.add(key)
    if not cfg.out:
        cfg.out = os.environ.get(OUT_ENV, "")
    cfg.validate()
    cfg.explicit_keys = explicit
    return cfg


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def resolved_config_text(cfg: RunConfig) -> str:
    lines = []
    for section, keys in _SECTIONS.items():
        lines.append(f"[{section}]")
        for key in keys:
            value = cfg.resolved_device if key == "device" else getattr(cfg, key)
            lines.append(f"{key} = {_format_value(value)}")
        lines.append("")
    return "\n".join(lines)


def write_resolved_config(cfg: RunConfig, out_dir) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(os.fspath(out_dir), "resolved_config.ini")
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(resolved_config_text(cfg))
    os.replace(tmp, path)
    return path


# -- data plumbing -------------------------------------------------------------


def _load_corpus_or_archive(root_or_file: str, cfg: RunConfig):
    """A class-per-directory tree or a .cvt archive, as one loader type."""
    if os.path.isfile(root_or_file):
        return data.ArchiveLoader(root_or_file)
    manifest = data.scan_corpus(root_or_file)
    return data.PreprocessLoader(manifest, cfg.image_size, cfg.colormap)


def _load_split(cfg: RunConfig, split: str):
    archive = os.path.join(cfg.data_root, f"{split}.cvt")
    if os.path.isfile(archive):
        return data.ArchiveLoader(archive)
    split_dir = os.path.join(cfg.data_root, split)
    return _load_corpus_or_archive(split_dir, cfg)


def _adopt_archive_size(cfg: RunConfig, loader, what: str) -> None:
    """Keep the model's input size in lock-step with preprocessed data.

    An archive remembers the size it was preprocessed at. If the user
    never asked for a particular size, inherit the archive's; if they
    did and it conflicts, that is an error, not a silent override.
    """
    size = getattr(loader, "image_size", None)
    if size is None or size == cfg.image_size:
        return
    if "image_size" in getattr(cfg, "explicit_keys", set()):
        raise ValueError(
            f"{what} was preprocessed at image size {size}, which conflicts "
            f"with the configured image size {cfg.image_size}"
        )
    cfg.image_size = size


def _require(value: str, flag: str) -> str:
    if not value:
        raise ValueError(f"{flag} is required (flag, config file, or {OUT_ENV})")
    return value


# -- commands ------------------------------------------------------------------


def cmd_preprocess(args) -> int:
    cfg = resolve_config(args)
    _require(cfg.data_root, "--data-root")
    _require(cfg.out, "--out")
    manifest = data.scan_corpus(cfg.data_root)
    loader = data.PreprocessLoader(manifest, cfg.image_size, cfg.colormap)
    split_name = os.path.basename(os.path.normpath(cfg.data_root)) or "archive"
    os.makedirs(cfg.out, exist_ok=True)
    archive_path = os.path.join(cfg.out, f"{split_name}.cvt")
    manifest_path = os.path.join(cfg.out, f"{split_name}.tsv")
    data.write_archive(loader, archive_path)
    data.save_manifest(manifest, manifest_path)
    write_resolved_config(cfg, cfg.out)
    for name, count in manifest.class_counts().items():
        print(f"{name}\t{count}")
    print(f"archive\t{archive_path}")
    print(f"manifest\t{manifest_path}")
    return 0


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    _require(cfg.data_root, "--data-root")
    _require(cfg.out, "--out")
    train_loader = _load_split(cfg, "train")
    _adopt_archive_size(cfg, train_loader, "the train split")
    if cfg.val_fraction > 0:
        kept, held = data.stratified_split_indices(
            train_loader.labels, len(train_loader.class_names),
            cfg.val_fraction, cfg.seed,
        )
        monitor_loader = data.SubsetLoader(train_loader, held)
        train_loader = data.SubsetLoader(train_loader, kept)
    else:
        monitor_loader = _load_split(cfg, "test")
        if tuple(monitor_loader.class_names) != tuple(train_loader.class_names):
            raise ValueError(
                f"train classes {list(train_loader.class_names)} do not match "
                f"test classes {list(monitor_loader.class_names)}"
            )
        monitor_size = getattr(monitor_loader, "image_size", None)
        if monitor_size is not None and monitor_size != cfg.image_size:
            raise ValueError(
                f"the test split was preprocessed at image size {monitor_size}, "
                f"the train split at {cfg.image_size}"
            )

    model_config = config_from_variant(
        cfg.variant,
        image_size=cfg.image_size,
        norm=cfg.norm,
        attn_scale=cfg.attn_scale,
        cls_positional=cfg.cls_positional,
        num_classes=len(train_loader.class_names),
    )
    model = VisionTransformer(model_config, seed=cfg.seed)

    os.makedirs(cfg.out, exist_ok=True)
    write_resolved_config(cfg, cfg.out)
    checkpoint_path = os.path.join(cfg.out, "checkpoint.cvt")
    history_path = os.path.join(cfg.out, "history.csv")

    def progress(record):
        star = " *" if record.is_best else ""
        print(
            f"epoch {record.epoch}: loss {record.train_loss:.6f} "
            f"accuracy {record.eval_accuracy:.4f}{star}",
            file=sys.stderr,
        )

    result = training.train(
        model,
        train_loader,
        monitor_loader,
        training.TrainConfig(
            epochs=cfg.epochs,
            batch_size=cfg.batch_size,
            lr=cfg.lr,
            patience=cfg.patience,
            seed=cfg.seed,
            loss_mode=cfg.loss_mode,
            head_only=cfg.head_only,
        ),
        checkpoint_path,
        progress=progress,
    )
    training.save_history(result.history, history_path)
    print(f"best_epoch\t{result.best_epoch}")
    print(f"best_accuracy\t{result.best_accuracy!r}")
    print(f"stopped_epoch\t{result.stopped_epoch}")
    print(f"checkpoint\t{checkpoint_path}")
    print(f"history\t{history_path}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = resolve_config(args)
    _require(cfg.data_root, "--data-root")
    _require(cfg.out, "--out")
    model, container = training.load_checkpoint(args.checkpoint)
    loader = _load_corpus_or_archive(cfg.data_root, _cfg_for_model(cfg, model))
    loader_size = getattr(loader, "image_size", None)
    if loader_size is not None and loader_size != model.config.image_size:
        raise ValueError(
            f"archive was preprocessed at image size {loader_size}, but the "
            f"checkpoint expects {model.config.image_size}"
        )
    if tuple(loader.class_names) != tuple(container.class_names):
        raise ValueError(
            f"checkpoint classes {list(container.class_names)} do not match "
            f"corpus classes {list(loader.class_names)}"
        )
    scores, labels = training.evaluate_scores(model, loader, cfg.batch_size)
    report = metrics.full_report(scores, labels, container.class_names)
    os.makedirs(cfg.out, exist_ok=True)
    write_resolved_config(cfg, cfg.out)
    written = metrics.write_report(report, cfg.out)
    written += plots.write_plots(report, cfg.out)
    print(f"n\t{report.n}")
    print(f"accuracy\t{report.accuracy!r}")
    print(f"macro_f1\t{report.macro_f1!r}")
    macro_auc = "undefined" if report.macro_auc is None else repr(report.macro_auc)
    print(f"macro_auc\t{macro_auc}")
    for path in written:
        print(f"wrote\t{path}")
    return 0


def _cfg_for_model(cfg: RunConfig, model: VisionTransformer) -> RunConfig:
    # evaluation and prediction must preprocess exactly as training did
    out = RunConfig(**{f.name: getattr(cfg, f.name) for f in fields(RunConfig)})
    out.image_size = model.config.image_size
    return out


def cmd_predict(args) -> int:
    cfg = resolve_config(args)
    model, container = training.load_checkpoint(args.checkpoint)
    class_names = container.class_names or tuple(
        str(i) for i in range(model.config.num_classes)
    )
    failures = 0
    for path in args.images:
        try:
            gray = pseudocolor.load_grayscale(path)
            image = pseudocolor.preprocess(
                gray, size=model.config.image_size, colormap=cfg.colormap
            )
            probabilities = model.forward(image).probabilities[0]
        except Exception as err:
            print(f"error: {path}: {err}", file=sys.stderr)
            failures += 1
            continue
        predicted = class_names[int(np.argmax(probabilities))]
        prob_text = " ".join(repr(float(p)) for p in probabilities)
        print(f"{path}\t{predicted}\t{prob_text}")
    return 1 if failures else 0


def cmd_plot(args) -> int:
    report = metrics.read_report(args.report_dir)
    out_dir = args.out or args.report_dir
    for path in plots.write_plots(report, out_dir):
        print(f"wrote\t{path}")
    return 0


# -- argument parsing ----------------------------------------------------------


def _add_config_flags(parser, *, model=False, trainish=False):
    parser.add_argument("--config", help="key/value config file (sections: model, train, run)")
    parser.add_argument("--data-root", dest="data_root", help="dataset root directory")
    parser.add_argument("--out", help=f"output directory (default from ${OUT_ENV})")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--colormap")
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    if model:
        parser.add_argument("--variant", choices=sorted(VARIANTS))
        parser.add_argument("--image-size", dest="image_size", type=int)
        parser.add_argument("--norm", choices=("pre", "none"))
        parser.add_argument("--attn-scale", dest="attn_scale",
                            choices=("per_head", "full_dim"))
    if trainish:
        parser.add_argument("--epochs", type=int)
        parser.add_argument("--lr", type=float)
        parser.add_argument("--patience", type=int)
        parser.add_argument("--val-fraction", dest="val_fraction", type=float)
        parser.add_argument("--head-only", dest="head_only", action="store_const", const=True)
        parser.add_argument("--loss-mode", dest="loss_mode", choices=("fused", "literal"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="colorvit",
        description="Pseudo-color vision transformer pipeline for grayscale image classification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="convert a corpus into a preprocessed archive")
    _add_config_flags(p, model=True)
    p.set_defaults(fn=cmd_preprocess)

    p = sub.add_parser("train", help="fit a model with early stopping")
    _add_config_flags(p, model=True, trainish=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on a labeled corpus")
    p.add_argument("checkpoint", help="checkpoint file")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("predict", help="classify individual images")
    p.add_argument("checkpoint", help="checkpoint file")
    p.add_argument("images", nargs="+", help="image files to classify")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("plot", help="render report files as SVG figures")
    p.add_argument("report_dir", help="directory written by evaluate")
    p.add_argument("--out", help="destination directory (default: the report directory)")
    p.set_defaults(fn=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except BrokenPipeError:
        return 1
    except Exception as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
