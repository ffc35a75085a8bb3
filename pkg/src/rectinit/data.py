"""Datasets: IDX (MNIST-style) files and synthetic Gaussian classes."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Dataset",
    "IdxFormatError",
    "IDX_IMAGES_MAGIC",
    "IDX_LABELS_MAGIC",
    "read_idx",
    "write_idx",
    "load_idx",
    "synth_gaussian_classes",
    "batches",
]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    pass


@dataclass
class Dataset:
    """``inputs`` is ``[count, channels, height, width]`` float64."""

    inputs: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        if self.inputs.ndim != 4:
            raise ValueError(f"inputs must be 4-d, got shape {self.inputs.shape}")
        if len(self.inputs) != len(self.labels):
            raise ValueError(f"{len(self.inputs)} inputs but {len(self.labels)} labels")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ValueError(f"labels must lie in [0, {self.class_count})")

    def __len__(self):
        return len(self.labels)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.inputs[idx], self.labels[idx], self.class_count)


def read_idx(path, expected_magic: int) -> np.ndarray:
    """Read an unsigned-byte IDX file into a uint8 array of its declared shape."""
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise IdxFormatError(f"{path}: truncated header")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise IdxFormatError(f"{path}: bad magic, expected 0x{expected_magic:08x}, found 0x{magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IdxFormatError(f"{path}: truncated header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    count = int(np.prod(dims))
    if len(raw) - header < count:
        raise IdxFormatError(f"{path}: truncated payload, expected {count} bytes, found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=header).reshape(dims)


def write_idx(path, array: np.ndarray) -> None:
    """Write a uint8 array (rank 1 or 3) as an IDX file."""
    array = np.asarray(array)
    if array.dtype != np.uint8 or array.ndim not in (1, 3):
        raise ValueError("IDX writer takes rank-1 or rank-3 uint8 arrays")
    magic = 0x00000800 | array.ndim
    with open(path, "wb") as fh:
        fh.write(struct.pack(f">I{array.ndim}I", magic, *array.shape))
        fh.write(np.ascontiguousarray(array).tobytes())


def load_idx(images_path, labels_path, normalize: bool = True, class_count: int | None = None) -> Dataset:
    """Load an IDX image/label pair.

    With ``normalize`` the byte pixels map to ``[-1, 1]`` via
    ``(v - 127.5) / 127.5``; otherwise they stay in ``[0, 255]``.
    """
    images = read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = read_idx(labels_path, IDX_LABELS_MAGIC)
    if len(images) != len(labels):
        raise IdxFormatError(f"{len(images)} images but {len(labels)} labels")
    x = images.astype(np.float64)[:, None, :, :]
    if normalize:
        x = (x - 127.5) / 127.5
    labels = labels.astype(np.intp)
    k = class_count if class_count is not None else int(labels.max()) + 1 if len(labels) else 0
    return Dataset(x, labels, k)


def synth_gaussian_classes(classes: int, per_class: int, dims: int, separation: float, seed: int) -> Dataset:
    """Isotropic unit-variance Gaussian blobs, one per class.

    Class centres sit at ``separation`` times unit directions drawn from
    ``seed``; when ``classes <= dims`` the directions are orthonormal (QR of a
    Gaussian matrix) so every pair of centres is ``separation * sqrt(2)`` apart.
    Samples come out shuffled and shaped ``[count, dims, 1, 1]``.
    """
    if classes < 2:
        raise ValueError("need at least two classes")
    if separation < 0:
        raise ValueError("separation must be >= 0")
    gen = np.random.Generator(np.random.PCG64(seed))
    g = gen.standard_normal((dims, classes))
    if classes <= dims:
        q, r = np.linalg.qr(g)
        directions = (q * np.sign(np.diag(r))).T
    else:
        directions = (g / np.linalg.norm(g, axis=0)).T
    labels = np.repeat(np.arange(classes), per_class)
    x = separation * directions[labels] + gen.standard_normal((len(labels), dims))
    order = gen.permutation(len(labels))
    return Dataset(x[order][:, :, None, None], labels[order].astype(np.intp), classes)


def batches(dataset: Dataset, batch_size: int, shuffle_seed: int, epoch: int):
    """Index arrays for one epoch.

    The permutation is seeded by ``(shuffle_seed, epoch)`` so every epoch gets
    its own reproducible order; the last, partial batch is kept.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    gen = np.random.Generator(np.random.PCG64([shuffle_seed, epoch]))
    order = gen.permutation(len(dataset))
    return [order[i:i + batch_size] for i in range(0, len(order), batch_size)]
