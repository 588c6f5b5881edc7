"""Small fixtures-in-code shared by several test modules."""

import numpy as np
from PIL import Image

CLASSES = ("glioma", "healthy", "meningioma", "pituitary")


def make_image_corpus(root, classes=CLASSES, per_class=10, size=12, seed=0):
    """Write a class-per-directory tree of small random grayscale PNGs."""
    rng = np.random.default_rng(seed)
    for name in classes:
        class_dir = root / name
        class_dir.mkdir(parents=True)
        for i in range(per_class):
            arr = rng.integers(0, 256, (size, size), dtype=np.uint8)
            Image.fromarray(arr, mode="L").save(class_dir / f"{name}_{i:03d}.png")
    return root


class ArrayLoader:
    """Loader over in-memory arrays; mirrors the dataset loader protocol."""

    def __init__(self, images, labels, class_names=("a", "b", "c", "d")):
        self.images = np.asarray(images)
        self._labels = np.asarray(labels, dtype=np.int64)
        self.class_names = tuple(class_names)

    def __len__(self):
        return len(self.images)

    @property
    def labels(self):
        return self._labels

    def example(self, index):
        return self.images[index]

    def gather(self, indices):
        idx = np.asarray(indices, dtype=np.int64)
        return self.images[idx], self._labels[idx]


class StubModel:
    """Fake model whose forward returns canned probability rows."""

    class _Out:
        def __init__(self, probabilities):
            self.probabilities = probabilities

    def __init__(self, prob_rows):
        self.prob_rows = np.asarray(prob_rows, dtype=np.float64)
        self._cursor = 0

    def forward(self, images):
        n = len(images)
        rows = self.prob_rows[self._cursor : self._cursor + n]
        self._cursor += n
        return self._Out(rows)


def separable_images(n_per_class, num_classes=4, size=16, seed=0, dtype=np.float32):
    """Images whose mean intensity encodes the class, plus mild noise."""
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for c in range(num_classes):
        level = (c + 1) / (num_classes + 1)
        for _ in range(n_per_class):
            img = level + 0.05 * rng.standard_normal((3, size, size))
            images.append(np.clip(img, 0.0, 1.0))
            labels.append(c)
    order = rng.permutation(len(images))
    images = np.stack(images).astype(dtype)[order]
    labels = np.asarray(labels, dtype=np.int64)[order]
    return images, labels
