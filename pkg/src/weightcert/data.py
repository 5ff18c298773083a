"""Dataset ingestion: IDX parsing, stratified subsampling, synthetic fixtures.

IDX files are the classic big-endian MNIST container: magic 0x00000803 for
u8 image tensors (count x rows x cols) and 0x00000801 for u8 label vectors.
Pixels are scaled to [0, 1] by /255 and images flattened row-major, so all
the l1-norm based bounds see inputs in [0, 1]^d.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    """Malformed IDX payload (bad magic, truncation, count mismatch)."""


@dataclass
class Dataset:
    inputs: np.ndarray  # (n, d) float64 in [0, 1]
    labels: np.ndarray  # (n,) int64
    num_classes: int

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2 or self.labels.ndim != 1:
            raise ValueError("inputs must be 2-D and labels 1-D")
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ValueError("inputs and labels length mismatch")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("labels out of range")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def take(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.inputs[idx], self.labels[idx], self.num_classes)


def _read_exact(fh, nbytes: int, path, what: str) -> bytes:
    buf = fh.read(nbytes)
    if len(buf) != nbytes:
        offset = fh.tell() - len(buf)
        raise IdxFormatError(
            f"{path}: truncated while reading {what} at byte offset {offset} "
            f"(wanted {nbytes} bytes, got {len(buf)})"
        )
    return buf


def load_idx(images_path, labels_path, num_classes: int = 10) -> Dataset:
    """Parse an IDX image/label file pair into a flattened Dataset."""
    with open(images_path, "rb") as fh:
        magic, count, rows, cols = struct.unpack(
            ">IIII", _read_exact(fh, 16, images_path, "image header")
        )
        if magic != IMAGES_MAGIC:
            raise IdxFormatError(
                f"{images_path}: bad image magic 0x{magic:08x}, expected 0x{IMAGES_MAGIC:08x}"
            )
        raw = _read_exact(fh, count * rows * cols, images_path, "pixel data")
        images = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows * cols)
    with open(labels_path, "rb") as fh:
        magic, lcount = struct.unpack(
            ">II", _read_exact(fh, 8, labels_path, "label header")
        )
        if magic != LABELS_MAGIC:
            raise IdxFormatError(
                f"{labels_path}: bad label magic 0x{magic:08x}, expected 0x{LABELS_MAGIC:08x}"
            )
        labels = np.frombuffer(
            _read_exact(fh, lcount, labels_path, "label data"), dtype=np.uint8
        )
    if count != lcount:
        raise IdxFormatError(
            f"image count {count} != label count {lcount} "
            f"({images_path} vs {labels_path})"
        )
    return Dataset(images.astype(np.float64) / 255.0, labels.astype(np.int64), num_classes)


def write_idx_images(path, images_uint8: np.ndarray) -> None:
    """Write a (n, rows, cols) uint8 array as an IDX image file."""
    images_uint8 = np.asarray(images_uint8, dtype=np.uint8)
    n, rows, cols = images_uint8.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGES_MAGIC, n, rows, cols))
        fh.write(images_uint8.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", LABELS_MAGIC, len(labels)))
        fh.write(labels.tobytes())


def subsample(ds: Dataset, n: int, seed: int) -> Dataset:
    """Seeded stratified sample without replacement.

    Buckets are classes sorted by label, each holding its original indices in
    order; quotas are n // K per class with the remainder assigned round-robin
    from class 0, spilling over to other classes when a bucket runs dry.  The
    result concatenates the per-class picks in label order.
    """
    if n > len(ds):
        raise ValueError(f"cannot sample {n} from dataset of size {len(ds)}")
    rng = np.random.default_rng(seed)
    buckets = [np.flatnonzero(ds.labels == c) for c in range(ds.num_classes)]
    quotas = [0] * ds.num_classes
    remaining = n
    while remaining > 0:
        progressed = False
        for c in range(ds.num_classes):
            if remaining == 0:
                break
            if quotas[c] < len(buckets[c]):
                quotas[c] += 1
                remaining -= 1
                progressed = True
        if not progressed:  # pragma: no cover - guarded by n <= len(ds)
            raise RuntimeError("subsample quota assignment failed")
    picks = []
    for c in range(ds.num_classes):
        perm = rng.permutation(len(buckets[c]))
        picks.append(buckets[c][perm[: quotas[c]]])
    return ds.take(np.concatenate(picks))


def synthetic_blobs(num_classes: int, dim: int, n_per_class: int, spread: float,
                    seed: int) -> Dataset:
    """Gaussian blobs around seeded class centers, clipped to [0, 1]."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.1, 0.9, size=(num_classes, dim))
    xs, ys = [], []
    for c in range(num_classes):
        pts = centers[c] + spread * rng.standard_normal((n_per_class, dim))
        xs.append(np.clip(pts, 0.0, 1.0))
        ys.append(np.full(n_per_class, c))
    return Dataset(np.concatenate(xs), np.concatenate(ys), num_classes)


def synthetic_digits(n: int, seed: int, image_size: int = 28) -> Dataset:
    """Rendered-glyph digit images: a deterministic MNIST stand-in.

    Digits 0-9 are drawn with a vector font at jittered position, size, and
    rotation, with light pixel noise.  Used by tests and experiment scripts
    when no real MNIST IDX files are available.
    """
    from PIL import Image, ImageDraw, ImageFont

    rng = np.random.default_rng(seed)
    fonts = {}
    images = np.zeros((n, image_size * image_size))
    labels = rng.integers(0, 10, size=n)
    for idx in range(n):
        digit = int(labels[idx])
        size = int(rng.integers(16, 23))
        if size not in fonts:
            fonts[size] = ImageFont.truetype("DejaVuSans.ttf", size)
        img = Image.new("L", (image_size, image_size), 0)
        draw = ImageDraw.Draw(img)
        left, top, right, bottom = draw.textbbox((0, 0), str(digit), font=fonts[size])
        x0 = (image_size - (right - left)) / 2 - left + rng.uniform(-3, 3)
        y0 = (image_size - (bottom - top)) / 2 - top + rng.uniform(-3, 3)
        draw.text((x0, y0), str(digit), fill=255, font=fonts[size])
        img = img.rotate(rng.uniform(-15, 15), resample=Image.BILINEAR)
        arr = np.asarray(img, dtype=np.float64) / 255.0
        arr = np.clip(arr + 0.02 * rng.standard_normal(arr.shape), 0.0, 1.0)
        images[idx] = arr.reshape(-1)
    return Dataset(images, labels, 10)
