"""Image corpus discovery, manifests, splits, and batch iteration.

A corpus is a directory whose immediate subdirectories are class names,
each holding image files. Class indices are assigned by sorted class
name, and examples are ordered by sorted relative path, so the same tree
always yields the same manifest.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from . import pseudocolor, store

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


@dataclass(frozen=True)
class Manifest:
    """An ordered list of (relative path, class index) pairs plus class names."""

    root: str
    class_names: tuple[str, ...]
    paths: tuple[str, ...]
    labels: tuple[int, ...]
    warnings: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.paths)

    def class_counts(self) -> dict[str, int]:
        counts = dict.fromkeys(self.class_names, 0)
        for label in self.labels:
            counts[self.class_names[label]] += 1
        return counts

    def subset(self, indices: Sequence[int]) -> "Manifest":
        return Manifest(
            root=self.root,
            class_names=self.class_names,
            paths=tuple(self.paths[i] for i in indices),
            labels=tuple(self.labels[i] for i in indices),
            warnings=self.warnings,
        )


def scan_corpus(root, expected_classes: Sequence[str] | None = None) -> Manifest:
    """Build a manifest from a class-per-subdirectory tree.

    expected_classes pins the class set and ordering; a mismatch between
    it and the directories actually present is an error, not a warning,
    so label indices can never silently shift between runs.
    """
    root = os.fspath(root)
    if not os.path.isdir(root):
        raise FileNotFoundError(f"corpus root {root!r} is not a directory")
    found = sorted(
        name
        for name in os.listdir(root)
        if os.path.isdir(os.path.join(root, name)) and not name.startswith(".")
    )
    if expected_classes is not None:
        expected = list(expected_classes)
        missing = sorted(set(expected) - set(found))
        extra = sorted(set(found) - set(expected))
        if missing:
            raise ValueError(f"corpus root {root!r} is missing class directories {missing}")
        if extra:
            raise ValueError(f"corpus root {root!r} has unexpected class directories {extra}")
        class_names = tuple(expected)
    else:
        class_names = tuple(found)
    if not class_names:
        raise ValueError(f"corpus root {root!r} contains no class directories")

    index_of = {name: i for i, name in enumerate(class_names)}
    paths: list[str] = []
    labels: list[int] = []
    recorded: list[str] = []
    for name in class_names:
        class_dir = os.path.join(root, name)
        files = sorted(
            fn
            for fn in os.listdir(class_dir)
            if fn.lower().endswith(IMAGE_EXTENSIONS)
        )
        if not files:
            message = f"class directory {name!r} contains no images"
            recorded.append(message)
            warnings.warn(f"{root}: {message}")
        for fn in files:
            paths.append(f"{name}/{fn}")
            labels.append(index_of[name])
    if not paths:
        raise ValueError(f"corpus root {root!r} contains no image files")
    order = sorted(range(len(paths)), key=lambda i: paths[i])
    return Manifest(
        root=root,
        class_names=class_names,
        paths=tuple(paths[i] for i in order),
        labels=tuple(labels[i] for i in order),
        warnings=tuple(recorded),
    )


def save_manifest(manifest: Manifest, path) -> None:
    """Write a manifest as a small TSV: path, label, class name per line."""
    lines = ["# classes\t" + "\t".join(manifest.class_names)]
    for message in manifest.warnings:
        lines.append(f"# warning\t{message}")
    for rel, label in zip(manifest.paths, manifest.labels):
        lines.append(f"{rel}\t{label}\t{manifest.class_names[label]}")
    tmp = os.fspath(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    os.replace(tmp, os.fspath(path))


def load_manifest(path, root) -> Manifest:
    with open(os.fspath(path), encoding="utf-8") as f:
        lines = [line.rstrip("\n") for line in f if line.strip()]
    if not lines or not lines[0].startswith("# classes\t"):
        raise ValueError(f"{path}: missing class-name header line")
    class_names = tuple(lines[0].split("\t")[1:])
    recorded: list[str] = []
    paths: list[str] = []
    labels: list[int] = []
    for line in lines[1:]:
        if line.startswith("# warning\t"):
            recorded.append(line.split("\t", 1)[1])
            continue
        rel, label_text, class_name = line.rsplit("\t", 2)
        label = int(label_text)
        if not 0 <= label < len(class_names):
            raise ValueError(f"{path}: label {label} out of range for {len(class_names)} classes")
        if class_names[label] != class_name:
            raise ValueError(f"{path}: label {label} does not map to class {class_name!r}")
        paths.append(rel)
        labels.append(label)
    return Manifest(
        root=os.fspath(root),
        class_names=class_names,
        paths=tuple(paths),
        labels=tuple(labels),
        warnings=tuple(recorded),
    )


def stratified_split_indices(
    labels, num_classes: int, fraction: float, seed: int
) -> tuple[list[int], list[int]]:
    """Seeded per-class split of range(len(labels)); returns (kept, held out).

    Per class, ceil(fraction * count) indices go to the held-out side,
    capped so at least one example always stays kept. Both sides come
    back sorted, so downstream ordering is stable.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"validation fraction must lie in (0, 1), got {fraction}")
    labels = np.asarray(labels)
    rng = np.random.default_rng(np.random.SeedSequence([seed, labels.size]))
    kept: list[int] = []
    held: list[int] = []
    for c in range(num_classes):
        members = np.flatnonzero(labels == c)
        rng.shuffle(members)
        take = int(np.ceil(fraction * len(members)))
        if take >= len(members) and len(members) > 0:
            take = len(members) - 1
        held.extend(members[:take].tolist())
        kept.extend(members[take:].tolist())
    return sorted(kept), sorted(held)


def split_validation(manifest: Manifest, fraction: float, seed: int) -> tuple[Manifest, Manifest]:
    """Split a manifest into stratified (train, validation) halves."""
    kept, held = stratified_split_indices(
        manifest.labels, len(manifest.class_names), fraction, seed
    )
    return manifest.subset(kept), manifest.subset(held)


class SubsetLoader:
    """Index-remapped view over any loader, for validation splits."""

    def __init__(self, base, indices: Sequence[int]):
        self.base = base
        self.indices = tuple(int(i) for i in indices)

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def class_names(self) -> tuple[str, ...]:
        return self.base.class_names

    @property
    def labels(self) -> np.ndarray:
        return np.asarray(self.base.labels)[list(self.indices)]

    def example(self, index: int) -> np.ndarray:
        return self.base.example(self.indices[index])

    def gather(self, indices) -> tuple[np.ndarray, np.ndarray]:
        return self.base.gather([self.indices[int(i)] for i in indices])


def derive_epoch_seed(seed: int, epoch: int) -> np.random.Generator:
    """Per-epoch generator: same (seed, epoch) pair, same shuffle, always."""
    return np.random.default_rng(np.random.SeedSequence([seed, epoch]))


def batches(
    n: int, batch_size: int, rng: np.random.Generator | None = None
) -> Iterator[np.ndarray]:
    """Yield index batches over range(n); shuffled when a generator is given.

    The final batch keeps the remainder rather than dropping it, so the
    union of the batches is always exactly range(n).
    """
    if batch_size <= 0:
        raise ValueError(f"batch size must be positive, got {batch_size}")
    if n <= 0:
        raise ValueError("cannot batch an empty dataset")
    order = np.arange(n)
    if rng is not None:
        rng.shuffle(order)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


class PreprocessLoader:
    """Loads images through the pseudo-color pipeline, caching results.

    The cache holds the channel-first float arrays keyed by manifest
    index, so repeated epochs pay the resize + colormap cost once.
    """

    def __init__(self, manifest: Manifest, image_size: int, colormap: str = "jet",
                 dtype=np.float32):
        self.manifest = manifest
        self.image_size = image_size
        self.colormap = colormap
        self.dtype = np.dtype(dtype)
        self._cache: dict[int, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self.manifest)

    @property
    def class_names(self) -> tuple[str, ...]:
        return self.manifest.class_names

    @property
    def labels(self) -> np.ndarray:
        return np.asarray(self.manifest.labels, dtype=np.int64)

    def example(self, index: int) -> np.ndarray:
        cached = self._cache.get(index)
        if cached is None:
            path = os.path.join(self.manifest.root, self.manifest.paths[index])
            gray = pseudocolor.load_grayscale(path)
            cached = pseudocolor.preprocess(
                gray, size=self.image_size, colormap=self.colormap, dtype=self.dtype
            )
            self._cache[index] = cached
        return cached

    def gather(self, indices) -> tuple[np.ndarray, np.ndarray]:
        images = np.stack([self.example(int(i)) for i in indices])
        labels = np.asarray([self.manifest.labels[int(i)] for i in indices], dtype=np.int64)
        return images, labels


def write_archive(loader: PreprocessLoader, path) -> None:
    """Preprocess a whole manifest into one tensor container on disk.

    Each image becomes one named tensor, keyed by its manifest-relative
    path, so the archive is self-describing: class labels fall out of
    the "class/file" path prefix.
    """
    manifest = loader.manifest
    tensors = {
        rel: loader.example(i).astype(loader.dtype)
        for i, rel in enumerate(manifest.paths)
    }
    store.write_container(
        path,
        tensors,
        kind="archive",
        config={
            "image_size": str(loader.image_size),
            "colormap": loader.colormap,
            "count": str(len(manifest)),
        },
        class_names=manifest.class_names,
    )


class ArchiveLoader:
    """Serves preprocessed examples out of a tensor container.

    Matches the PreprocessLoader interface so training code does not
    care which one it was handed. Tensors are read lazily and cached,
    so only the examples actually touched occupy memory.
    """

    def __init__(self, path):
        container = store.read_container(path)
        if container.kind != "archive":
            raise store.StoreError(f"{path}: kind {container.kind!r}, expected 'archive'")
        self._container = container
        self.class_names = container.class_names
        self.image_size = int(container.config["image_size"])
        self.colormap = container.config["colormap"]
        self.paths = tuple(container.tensor_names())
        index_of = {name: i for i, name in enumerate(self.class_names)}
        try:
            self._labels = np.asarray(
                [index_of[rel.split("/", 1)[0]] for rel in self.paths], dtype=np.int64
            )
        except KeyError as err:
            raise store.StoreError(
                f"{path}: tensor {err.args[0]!r} does not start with a known class name"
            ) from None
        self._cache: dict[int, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self.paths)

    @property
    def labels(self) -> np.ndarray:
        return self._labels

    def example(self, index: int) -> np.ndarray:
        cached = self._cache.get(index)
        if cached is None:
            cached = self._container.tensor(self.paths[index])
            self._cache[index] = cached
        return cached

    def gather(self, indices) -> tuple[np.ndarray, np.ndarray]:
        images = np.stack([self.example(int(i)) for i in indices])
        labels = self._labels[np.asarray(indices, dtype=np.int64)]
        return images, labels
