"""Dataset ingestion: seeded synthetic images and the CIFAR-10 binary format."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .tensor import DTYPE, Tensor

CIFAR_RECORD_BYTES = 3073  # 1 label byte + 3 * 1024 pixel bytes (CHW planes)
CIFAR_IMAGE_SHAPE = (32, 32, 3)
NUM_CLASSES = 10


@dataclass
class Dataset:
    """A batch of NHWC fp32 images with optional integer labels."""

    images: np.ndarray
    labels: np.ndarray | None = None

    def __len__(self) -> int:
        return self.images.shape[0]

    def subset(self, indices: np.ndarray) -> "Dataset":
        labels = None if self.labels is None else self.labels[indices]
        return Dataset(self.images[indices], labels)

    def tensor(self) -> Tensor:
        return Tensor(self.images)


def synthetic_dataset(n: int, seed: int, image_shape=CIFAR_IMAGE_SHAPE) -> Dataset:
    """Seeded Gaussian images (std 0.5, roughly the [-1, 1] scale of the real
    data) with uniform labels; lets the whole pipeline run with no downloads."""
    rng = np.random.default_rng(seed)
    images = rng.normal(0.0, 0.5, size=(n, *image_shape)).astype(DTYPE)
    labels = rng.integers(0, NUM_CLASSES, size=n, dtype=np.int64)
    return Dataset(images, labels)


def read_cifar10_binary(path: str) -> Dataset:
    """One CIFAR-10 .bin file: records of [label, R plane, G plane, B plane],
    converted to NHWC fp32 scaled to [-1, 1]."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) == 0 or len(raw) % CIFAR_RECORD_BYTES != 0:
        raise ValueError(
            f"{path}: length {len(raw)} is not a multiple of {CIFAR_RECORD_BYTES}"
        )
    records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    if labels.max(initial=0) > NUM_CLASSES - 1:
        bad = int(labels.max())
        raise ValueError(f"{path}: label {bad} is out of range 0..{NUM_CLASSES - 1}")
    pixels = records[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1)
    images = (pixels.astype(DTYPE) / DTYPE(127.5)) - DTYPE(1.0)
    return Dataset(images, labels)


def load_data_path(path: str) -> Dataset:
    """A .bin file, or a directory of data_batch_*.bin / test_batch.bin files
    concatenated in sorted order."""
    if os.path.isdir(path):
        names = sorted(
            n for n in os.listdir(path)
            if n.endswith(".bin") and (n.startswith("data_batch") or n.startswith("test_batch"))
        )
        if not names:
            raise ValueError(f"{path}: no CIFAR-10 .bin files found")
        parts = [read_cifar10_binary(os.path.join(path, n)) for n in names]
        return Dataset(
            np.concatenate([p.images for p in parts]),
            np.concatenate([p.labels for p in parts]),
        )
    return read_cifar10_binary(path)
