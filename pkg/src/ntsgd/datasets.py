"""Training sets: synthetic Gaussian blobs, IDX (MNIST-style) files, and
neighbouring-dataset pairs for stability experiments."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import RngState

__all__ = [
    "Dataset",
    "NeighborPair",
    "IdxFormatError",
    "synth_blobs",
    "read_idx",
    "write_idx",
    "load_idx_subset",
    "make_neighbor",
    "train_test_split",
]

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    """``n`` samples with float features (n x d) and integer labels."""

    features: np.ndarray
    labels: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64)
        y = np.array(self.labels, dtype=np.int64)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"features must be a non-empty n x d array, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError(f"expected {X.shape[0]} labels, got shape {y.shape}")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i):
        return self.features[i], int(self.labels[i])

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.features[idx], self.labels[idx], dict(self.meta))


@dataclass(frozen=True)
class NeighborPair:
    base: Dataset
    variant: Dataset
    index: int

    @property
    def identical(self) -> bool:
        """True when the replacement sample equals the original one."""
        return bool(
            np.array_equal(self.base.features[self.index], self.variant.features[self.index])
            and self.base.labels[self.index] == self.variant.labels[self.index]
        )


def _blob_centers(k: int, d: int, sep: float) -> np.ndarray:
    if k <= d:
        # scaled simplex: pairwise distance exactly sep
        c = np.eye(k, d) * (sep / np.sqrt(2.0))
        return c - c.mean(axis=0)
    if d == 1:
        return ((np.arange(k) - (k - 1) / 2.0) * sep)[:, None]
    # regular k-gon in the first two coordinates, adjacent centres sep apart
    radius = sep / (2.0 * np.sin(np.pi / k))
    ang = 2.0 * np.pi * np.arange(k) / k
    c = np.zeros((k, d))
    c[:, 0] = radius * np.cos(ang)
    c[:, 1] = radius * np.sin(ang)
    return c


def synth_blobs(rng: RngState, n: int, d: int, class_sep: float, k_classes: int = 2) -> Dataset:
    """``k_classes`` unit-covariance Gaussian clusters with balanced labels.

    Centres sit on a centred simplex (``k <= d``) or a regular polygon
    (``k > d``), with the closest centres ``class_sep`` apart.  Labels
    ``i mod k`` are shuffled, so class counts differ by at most one.
    """
    if k_classes < 2:
        raise ValueError("k_classes must be >= 2")
    if n < k_classes:
        raise ValueError(f"n={n} must be at least k_classes={k_classes}")
    if d < 1:
        raise ValueError("d must be >= 1")
    if not class_sep > 0:
        raise ValueError("class_sep must be positive")
    labels = (np.arange(n) % k_classes)[rng.permutation(n)]
    centers = _blob_centers(k_classes, d, class_sep)
    X = centers[labels] + rng.standard_normal(n * d).reshape(n, d)
    return Dataset(X, labels, {"source": "blobs", "class_sep": class_sep})


def train_test_split(data: Dataset, n_test: int, rng: RngState) -> tuple[Dataset, Dataset]:
    if not 0 < n_test < data.n:
        raise ValueError(f"n_test must lie in (0, {data.n})")
    perm = rng.permutation(data.n)
    return data.subset(perm[n_test:]), data.subset(perm[:n_test])


# --- IDX ---------------------------------------------------------------------


class IdxFormatError(ValueError):
    pass


def _read_header(buf: bytes, path, magic: int, ndims: int) -> tuple[int, ...]:
    need = 4 * (1 + ndims)
    if len(buf) >= 4:
        got = struct.unpack(">I", buf[:4])[0]
        if got != magic:
            raise IdxFormatError(f"{path}: wrong magic 0x{got:08x} (expected 0x{magic:08x})")
    if len(buf) < need:
        raise IdxFormatError(f"{path}: truncated file ({len(buf)} bytes, header needs {need})")
    return struct.unpack(f">{ndims}I", buf[4:need])


def _read_idx_arrays(images_path, labels_path):
    images_path, labels_path = Path(images_path), Path(labels_path)
    ibuf = images_path.read_bytes()
    count, rows, cols = _read_header(ibuf, images_path, IMAGE_MAGIC, 3)
    body = ibuf[16:]
    if len(body) < count * rows * cols:
        raise IdxFormatError(
            f"{images_path}: truncated file (expected {count * rows * cols} pixel bytes, got {len(body)})"
        )
    images = np.frombuffer(body, dtype=np.uint8, count=count * rows * cols).reshape(count, rows * cols)

    lbuf = labels_path.read_bytes()
    (lcount,) = _read_header(lbuf, labels_path, LABEL_MAGIC, 1)
    if len(lbuf) - 8 < lcount:
        raise IdxFormatError(f"{labels_path}: truncated file (expected {lcount} labels, got {len(lbuf) - 8})")
    labels = np.frombuffer(lbuf[8:], dtype=np.uint8, count=lcount)
    if lcount != count:
        raise IdxFormatError(f"count mismatch: {count} images in {images_path} but {lcount} labels in {labels_path}")
    return images, labels, (rows, cols)


def read_idx(images_path, labels_path, *, standardize: bool = True, stats: tuple[float, float] | None = None) -> Dataset:
    """Load a paired IDX image/label file set.

    Pixels are divided by 255, then (if ``standardize``) z-scored with one
    global mean and standard deviation over all pixels.  Pass the training
    set's ``meta["pixel_stats"]`` as ``stats`` when loading a test split.
    A zero standard deviation is treated as 1.
    """
    images, labels, shape = _read_idx_arrays(images_path, labels_path)
    X = images.astype(np.float64) / 255.0
    meta = {"source": "idx", "image_shape": shape}
    if standardize:
        if stats is None:
            mu = float(X.mean())
            sd = float(X.std())
            stats = (mu, sd if sd > 0 else 1.0)
        X = (X - stats[0]) / stats[1]
        meta["pixel_stats"] = stats
    return Dataset(X, labels.astype(np.int64), meta)


def write_idx(images_path, labels_path, images, labels) -> None:
    """Write uint8 images (count x rows x cols) and labels as IDX files."""
    images = np.asarray(images)
    labels = np.asarray(labels)
    if images.ndim != 3:
        raise ValueError("images must have shape (count, rows, cols)")
    if images.min(initial=0) < 0 or images.max(initial=0) > 255 or labels.min(initial=0) < 0 or labels.max(initial=0) > 255:
        raise ValueError("pixel and label values must fit in uint8")
    count, rows, cols = images.shape
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IMAGE_MAGIC, count, rows, cols))
        f.write(images.astype(np.uint8).tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", LABEL_MAGIC, labels.size))
        f.write(labels.astype(np.uint8).tobytes())


def load_idx_subset(images_path, labels_path, n: int, rng: RngState, *, n_test: int = 0):
    """Class-balanced random subset of an IDX file set, standardized with the
    statistics of the returned training portion.

    Returns ``(train, test)``; ``test`` is ``None`` when ``n_test == 0``.
    """
    images, labels, shape = _read_idx_arrays(images_path, labels_path)
    classes = np.unique(labels)
    total = n + n_test
    per = -(-total // len(classes))
    picked = []
    for c in classes:
        idx = np.flatnonzero(labels == c)
        picked.append(idx[rng.permutation(idx.size)[:per]])
    picked = np.concatenate(picked)
    picked = picked[rng.permutation(picked.size)][:total]
    if picked.size < total:
        raise ValueError(f"requested {total} samples but only {picked.size} available")
    X = images[picked].astype(np.float64) / 255.0
    y = labels[picked].astype(np.int64)
    Xtr = X[:n]
    mu, sd = float(Xtr.mean()), float(Xtr.std())
    sd = sd if sd > 0 else 1.0
    meta = {"source": "idx", "image_shape": shape, "pixel_stats": (mu, sd)}
    train = Dataset((Xtr - mu) / sd, y[:n], meta)
    test = Dataset((X[n:] - mu) / sd, y[n:], dict(meta)) if n_test else None
    return train, test


# --- neighbours --------------------------------------------------------------


def make_neighbor(data: Dataset, j: int, replacement) -> NeighborPair:
    """Pair ``data`` with a copy whose ``j``-th sample is ``replacement = (x, label)``."""
    if not 0 <= j < data.n:
        raise IndexError(f"index {j} out of range for dataset of size {data.n}")
    x, label = replacement
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (data.dim,):
        raise ValueError(f"replacement has shape {x.shape}, expected ({data.dim},)")
    X = np.array(data.features)
    y = np.array(data.labels)
    X[j] = x
    y[j] = int(label)
    return NeighborPair(data, Dataset(X, y, dict(data.meta)), j)
