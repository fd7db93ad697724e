"""Synthetic datasets, IDX image ingestion, and datapoint trajectories."""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .rng import stream
from .trajectory import Trajectory, make_trajectory

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class IdxError(ValueError):
    """Base for IDX parsing failures."""


class IdxBadMagic(IdxError):
    pass


class IdxTruncated(IdxError):
    pass


class IdxCountMismatch(IdxError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Flat feature matrix with integer class labels.

    feature_offset / feature_scale record the normalization already applied
    to inputs (x = (raw - offset) / scale).
    """

    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int
    feature_offset: float = 0.0
    feature_scale: float = 1.0

    def __post_init__(self):
        if self.inputs.ndim != 2 or self.inputs.shape[0] < 1:
            raise ValueError("inputs must be a nonempty N x m matrix")
        if self.labels.shape != (self.inputs.shape[0],):
            raise ValueError("labels must be one per input row")
        if not np.isfinite(self.inputs).all():
            raise ValueError("inputs must be finite")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise ValueError("labels must lie in [0, num_classes)")

    @property
    def size(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def dim(self) -> int:
        return int(self.inputs.shape[1])


def synth_blobs(num_classes: int, dim: int, per_class: int, spread: float, seed: int) -> Dataset:
    """Gaussian blobs around class centers drawn uniformly on the unit sphere."""
    if num_classes < 1 or dim < 1 or per_class < 1:
        raise ValueError("num_classes, dim and per_class must be positive")
    if spread < 0:
        raise ValueError("spread must be nonnegative")
    raw = stream(seed, "blobs", "centers").normal(size=(num_classes, dim))
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    centers = raw / norms
    inputs = np.empty((num_classes * per_class, dim))
    labels = np.empty(num_classes * per_class, dtype=np.int64)
    for c in range(num_classes):
        noise = stream(seed, "blobs", "points", c).normal(size=(per_class, dim))
        inputs[c * per_class : (c + 1) * per_class] = centers[c] + spread * noise
        labels[c * per_class : (c + 1) * per_class] = c
    inputs.flags.writeable = False
    labels.flags.writeable = False
    return Dataset(inputs=inputs, labels=labels, num_classes=num_classes)


def shuffle_split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic shuffled train/test split."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    perm = stream(seed, "split").permutation(dataset.size)
    n_test = max(1, int(round(dataset.size * test_fraction)))
    test_idx, train_idx = perm[:n_test], perm[n_test:]

    def take(idx):
        inputs = dataset.inputs[idx].copy()
        labels = dataset.labels[idx].copy()
        inputs.flags.writeable = False
        labels.flags.writeable = False
        return Dataset(
            inputs=inputs,
            labels=labels,
            num_classes=dataset.num_classes,
            feature_offset=dataset.feature_offset,
            feature_scale=dataset.feature_scale,
        )

    return take(train_idx), take(test_idx)


def _read_exact(f, count: int, what: str) -> bytes:
    data = f.read(count)
    if len(data) != count:
        raise IdxTruncated(f"{what}: expected {count} bytes, got {len(data)}")
    return data


def load_idx(images_path, labels_path, limit: int | None = None) -> Dataset:
    """Load big-endian IDX image/label files, pixels scaled to [0, 1]."""
    with open(images_path, "rb") as f:
        (magic,) = struct.unpack(">I", _read_exact(f, 4, "image magic"))
        if magic != IDX_IMAGES_MAGIC:
            raise IdxBadMagic(f"image magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}")
        n, rows, cols = struct.unpack(">III", _read_exact(f, 12, "image dims"))
        pixels = np.frombuffer(_read_exact(f, n * rows * cols, "image data"), dtype=np.uint8)
    with open(labels_path, "rb") as f:
        (magic,) = struct.unpack(">I", _read_exact(f, 4, "label magic"))
        if magic != IDX_LABELS_MAGIC:
            raise IdxBadMagic(f"label magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}")
        (n_labels,) = struct.unpack(">I", _read_exact(f, 4, "label count"))
        raw_labels = np.frombuffer(_read_exact(f, n_labels, "label data"), dtype=np.uint8)
    if n != n_labels:
        raise IdxCountMismatch(f"{n} images vs {n_labels} labels")
    if limit is not None:
        n = min(n, int(limit))
        pixels = pixels[: n * rows * cols]
        raw_labels = raw_labels[:n]
    inputs = pixels.reshape(n, rows * cols).astype(np.float64) / 255.0
    labels = raw_labels.astype(np.int64)
    inputs.flags.writeable = False
    labels.flags.writeable = False
    return Dataset(
        inputs=inputs,
        labels=labels,
        num_classes=int(labels.max()) + 1 if n else 0,
        feature_offset=0.0,
        feature_scale=255.0,
    )


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    """Write u8 images (N, rows, cols) and labels (N,) in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    if images.ndim != 3 or labels.shape != (images.shape[0],):
        raise ValueError("expected images (N, rows, cols) and one label per image")
    n, rows, cols = images.shape
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols))
        f.write(images.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABELS_MAGIC, n))
        f.write(labels.tobytes())


def interpolation_trajectory(dataset: Dataset, i: int, j: int, kind: str) -> Trajectory:
    """Trajectory of the requested kind between datapoints i and j."""
    n = dataset.size
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"datapoint indices must lie in [0, {n})")
    if i == j:
        raise ValueError("degenerate trajectory: i == j")
    return make_trajectory(kind, dataset.inputs[i], dataset.inputs[j])


def dataset_to_csv(dataset: Dataset, path) -> None:
    """Export rows as `label,f0,f1,...`."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("label," + ",".join(f"f{i}" for i in range(dataset.dim)) + "\n")
        for y, row in zip(dataset.labels, dataset.inputs):
            f.write(str(int(y)) + "," + ",".join(repr(float(v)) for v in row) + "\n")
