"""Labeled image datasets: in-memory container, binary format, external loader.

Binary split file (extension ``.chods``), all integers little-endian:

====== ====== =====================================================
offset size   contents
====== ====== =====================================================
0      8      magic ``b"CHODS01\\0"``
8      4      grid side (uint32)
12     4      image count (uint32)
16     8      byte offset of the label block (uint64)
24     8      generating seed (int64; -1 when unknown)
32     --     image block: count * side^2 float64, row-major per image
--     count  label block: one uint8 per image (0 absent, 1 present)
====== ====== =====================================================

External datasets are declared by a plain-text manifest (see
:func:`load_external_dataset`) referencing one ``.npy`` file per image.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DatasetError,
    DatasetFormatError,
    DimensionMismatchError,
    LabelImbalanceError,
    UnreadableImageError,
)

MAGIC = b"CHODS01\0"
_HEADER = struct.Struct("<8sIIQq")
SPLITS = ("train", "validation", "test")


@dataclass
class LabeledDataset:
    """Paired signal-present/absent images for one split.

    ``images`` is ``(N, side^2)`` float64; ``labels`` is ``(N,)`` uint8 with
    1 = signal present.  Generated datasets interleave each pair as
    (absent, present); externally loaded data keeps manifest order.
    """

    images: np.ndarray
    labels: np.ndarray
    side: int
    split: str = "train"
    seed: int | None = None

    def __post_init__(self):
        self.images = np.ascontiguousarray(self.images, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if self.images.ndim != 2:
            raise DatasetError("images must be a 2-D (N, side^2) array")
        if self.images.shape[1] != self.side * self.side:
            raise DimensionMismatchError(
                f"images have {self.images.shape[1]} pixels, expected side^2 = {self.side * self.side}"
            )
        if self.labels.shape != (self.images.shape[0],):
            raise DatasetError("labels must align one-to-one with images")
        if self.split not in SPLITS:
            raise DatasetError(f"unknown split {self.split!r}")

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def n_pairs(self) -> int:
        return min(int(self.labels.sum()), int((1 - self.labels.astype(np.int64)).sum()))

    def present(self) -> np.ndarray:
        return self.images[self.labels == 1]

    def absent(self) -> np.ndarray:
        return self.images[self.labels == 0]

    def take_pairs(self, pair_indices: np.ndarray) -> "LabeledDataset":
        """Select interleaved (absent, present) pairs by pair index."""
        pair_indices = np.asarray(pair_indices, dtype=np.int64)
        rows = np.empty(2 * pair_indices.size, dtype=np.int64)
        rows[0::2] = 2 * pair_indices
        rows[1::2] = 2 * pair_indices + 1
        return LabeledDataset(self.images[rows], self.labels[rows], self.side, self.split, self.seed)


def combine(a: LabeledDataset, b: LabeledDataset) -> LabeledDataset:
    """Pool two datasets of the same geometry (split tag taken from ``a``)."""
    if a.side != b.side:
        raise DimensionMismatchError(f"cannot combine side {a.side} with side {b.side}")
    return LabeledDataset(
        np.concatenate([a.images, b.images]),
        np.concatenate([a.labels, b.labels]),
        a.side,
        a.split,
        a.seed,
    )


def save_dataset(dataset: LabeledDataset, path: str | Path) -> None:
    path = Path(path)
    count = len(dataset)
    label_offset = _HEADER.size + count * dataset.side * dataset.side * 8
    seed = dataset.seed if dataset.seed is not None else -1
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, dataset.side, count, label_offset, seed))
        fh.write(dataset.images.astype("<f8", copy=False).tobytes())
        fh.write(dataset.labels.tobytes())


def load_dataset(path: str | Path, split: str | None = None) -> LabeledDataset:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise DatasetFormatError(f"{path}: truncated header")
    magic, side, count, label_offset, seed = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DatasetFormatError(f"{path}: bad magic {magic!r}")
    n_pixels = side * side
    expected = label_offset + count
    if len(raw) != expected:
        raise DatasetFormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    images = np.frombuffer(raw, dtype="<f8", count=count * n_pixels, offset=_HEADER.size)
    labels = np.frombuffer(raw, dtype=np.uint8, count=count, offset=label_offset)
    if split is None:
        split = path.stem if path.stem in SPLITS else "test"
    return LabeledDataset(
        images.reshape(count, n_pixels).copy(),
        labels.copy(),
        side,
        split,
        None if seed < 0 else int(seed),
    )


def write_manifest(path: str | Path, entries: dict) -> None:
    """Write a flat ``key = value`` manifest; nested dicts use dotted keys."""
    lines = ["# chokit dataset manifest"]

    def emit(prefix: str, value):
        if isinstance(value, dict):
            for k, v in value.items():
                emit(f"{prefix}.{k}" if prefix else str(k), v)
        else:
            lines.append(f"{prefix} = {value}")

    emit("", entries)
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path: str | Path) -> dict[str, str]:
    result: dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DatasetFormatError(f"{path}: manifest line {line!r} is not 'key = value'")
        key, _, value = line.partition("=")
        result[key.strip()] = value.strip()
    return result


def load_external_dataset(manifest_path: str | Path) -> LabeledDataset:
    """Load a dataset declared by a plain-text manifest.

    Manifest format, one statement per line (``#`` comments allowed)::

        format = chokit-external-v1
        side = 64
        split = test
        imbalance_tolerance = 0
        image relative/path.npy present
        image other.npy absent

    Image paths are resolved relative to the manifest.  Each ``.npy`` file
    must hold a ``(side, side)`` or ``(side^2,)`` float array.  Dimension
    mismatches, unreadable files, and class imbalance beyond the declared
    tolerance raise distinct errors.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise FileNotFoundError(manifest_path)
    side = None
    split = "test"
    tolerance = 0
    entries: list[tuple[Path, int]] = []
    for lineno, line in enumerate(manifest_path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("image "):
            parts = line.split()
            if len(parts) != 3 or parts[2] not in ("present", "absent"):
                raise DatasetFormatError(f"{manifest_path}:{lineno}: expected 'image <path> present|absent'")
            entries.append((manifest_path.parent / parts[1], 1 if parts[2] == "present" else 0))
            continue
        if "=" not in line:
            raise DatasetFormatError(f"{manifest_path}:{lineno}: unrecognized line {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "side":
            side = int(value)
        elif key == "split":
            split = value
        elif key == "imbalance_tolerance":
            tolerance = int(value)
        elif key == "format":
            if value != "chokit-external-v1":
                raise DatasetFormatError(f"{manifest_path}: unsupported format {value!r}")
    if side is None:
        raise DatasetFormatError(f"{manifest_path}: missing 'side' declaration")
    if not entries:
        raise DatasetFormatError(f"{manifest_path}: no image entries")

    n_present = sum(label for _, label in entries)
    n_absent = len(entries) - n_present
    if abs(n_present - n_absent) > tolerance:
        raise LabelImbalanceError(
            f"{manifest_path}: {n_present} present vs {n_absent} absent exceeds tolerance {tolerance}"
        )

    images = np.empty((len(entries), side * side), dtype=np.float64)
    labels = np.empty(len(entries), dtype=np.uint8)
    for row, (img_path, label) in enumerate(entries):
        try:
            arr = np.load(img_path)
        except (OSError, ValueError) as exc:
            raise UnreadableImageError(f"{img_path}: {exc}") from exc
        arr = np.asarray(arr, dtype=np.float64)
        if arr.shape not in ((side, side), (side * side,)):
            raise DimensionMismatchError(
                f"{img_path}: shape {arr.shape} incompatible with side {side}"
            )
        images[row] = arr.ravel()
        labels[row] = label
    return LabeledDataset(images, labels, side, split, None)
