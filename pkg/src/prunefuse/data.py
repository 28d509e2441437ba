"""Datasets: synthetic Gaussian blobs plus binary/CSV persistence.

Binary layout (little-endian): b"PFDS", u32 version=1, u64 n, u32 d, u32 C,
n*d f32 features row-major, n u32 labels.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError
from .io import atomic_write_bytes, atomic_writer
from .rng import Xoshiro256, derive_seed

DS_MAGIC = b"PFDS"
DS_VERSION = 1
_HEADER = struct.Struct("<4sIQII")


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    split: str = "train"
    provenance: str = ""

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValidationError(f"features must be 2-D, got shape {self.features.shape}")
        n = self.features.shape[0]
        if n < 1 or self.labels.shape != (n,):
            raise ValidationError(f"{n} feature rows but labels of shape {self.labels.shape}")
        if self.num_classes < 1:
            raise ValidationError("num_classes must be >= 1")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise ValidationError(f"labels must lie in [0, {self.num_classes - 1}]")
        if not np.isfinite(self.features).all():
            raise ValidationError("features contain NaN or Inf")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.features[idx], self.labels[idx], self.num_classes, self.split, self.provenance
        )


@dataclass
class BlobConfig:
    """Isotropic Gaussian clusters around centers drawn uniformly in [-box, box]^d.

    ``n_total`` overrides ``classes * samples_per_class`` when set; class sizes
    then differ by at most one.
    """

    classes: int = 8
    dim: int = 32
    samples_per_class: int = 625
    std: float = 1.0
    center_box: float = 1.0
    seed: int = 0
    n_total: int | None = None
    test_fraction: float = 0.2

    def __post_init__(self):
        if self.classes < 2:
            raise ValidationError("blobs need at least 2 classes")
        if self.dim < 1 or self.samples_per_class < 1 or self.center_box <= 0 or self.std < 0:
            raise ValidationError("blob dimensions, counts and box must be positive, std >= 0")
        if self.n_total is not None and self.n_total < self.classes:
            raise ValidationError("n_total must be >= classes")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValidationError("test_fraction must lie in (0, 1)")

    def class_sizes(self) -> list[int]:
        if self.n_total is None:
            return [self.samples_per_class] * self.classes
        base, extra = divmod(self.n_total, self.classes)
        return [base + (1 if c < extra else 0) for c in range(self.classes)]


def gen_blobs(cfg: BlobConfig) -> tuple[Dataset, Dataset]:
    """Deterministic blobs with a seeded train/test split (round(test_fraction * n) test rows)."""
    centers = Xoshiro256(derive_seed(cfg.seed, "blob-centers")).uniform(
        -cfg.center_box, cfg.center_box, cfg.classes * cfg.dim
    ).reshape(cfg.classes, cfg.dim)
    noise_gen = Xoshiro256(derive_seed(cfg.seed, "blob-noise"))
    feats, labels = [], []
    for c, size in enumerate(cfg.class_sizes()):
        noise = noise_gen.normal(size * cfg.dim).reshape(size, cfg.dim)
        feats.append(centers[c] + cfg.std * noise)
        labels.append(np.full(size, c, dtype=np.int64))
    x = np.concatenate(feats)
    y = np.concatenate(labels)
    n = len(y)
    n_test = int(math.floor(cfg.test_fraction * n + 0.5))
    perm = Xoshiro256(derive_seed(cfg.seed, "blob-split")).permutation(n)
    test_idx, train_idx = perm[:n_test], perm[n_test:]
    prov = f"blobs:{cfg}"
    return (
        Dataset(x[train_idx], y[train_idx], cfg.classes, "train", prov),
        Dataset(x[test_idx], y[test_idx], cfg.classes, "test", prov),
    )


def benchmark_blobs(seed: int = 0) -> tuple[Dataset, Dataset]:
    """The desk benchmark: 8 classes, 32 dims, 5000 train / 1250 test."""
    return gen_blobs(BlobConfig(classes=8, dim=32, std=0.8, center_box=1.0, seed=seed, n_total=6250))


# -- binary ------------------------------------------------------------------


def dataset_bytes(ds: Dataset) -> bytes:
    n, d = ds.features.shape
    return b"".join(
        [
            _HEADER.pack(DS_MAGIC, DS_VERSION, n, d, ds.num_classes),
            np.ascontiguousarray(ds.features, dtype="<f4").tobytes(),
            np.ascontiguousarray(ds.labels, dtype="<u4").tobytes(),
        ]
    )


def parse_dataset(data: bytes, split: str = "train", provenance: str = "") -> Dataset:
    if len(data) < _HEADER.size:
        raise FormatError(f"dataset truncated: {len(data)} bytes, header needs {_HEADER.size}")
    magic, version, n, d, c = _HEADER.unpack_from(data, 0)
    if magic != DS_MAGIC:
        raise FormatError("not a dataset file: bad magic at byte 0")
    if version != DS_VERSION:
        raise FormatError(f"unsupported dataset version {version} at byte 4")
    need = _HEADER.size + 4 * n * d + 4 * n
    if len(data) != need:
        raise FormatError(
            f"dataset size mismatch: expected {need} bytes for n={n}, d={d}, got {len(data)}"
        )
    off = _HEADER.size
    x = np.frombuffer(data, dtype="<f4", count=n * d, offset=off).reshape(n, d)
    y = np.frombuffer(data, dtype="<u4", count=n, offset=off + 4 * n * d).astype(np.int64)
    bad = np.flatnonzero(~np.isfinite(x).all(axis=1))
    if bad.size:
        raise FormatError(f"non-finite feature in row {bad[0]} (byte {off + 4 * d * bad[0]})")
    bad = np.flatnonzero(y >= c)
    if bad.size:
        raise FormatError(
            f"label {y[bad[0]]} out of range for {c} classes in row {bad[0]} "
            f"(byte {off + 4 * n * d + 4 * bad[0]})"
        )
    return Dataset(x.astype(np.float32), y, int(c), split, provenance)


# -- CSV ---------------------------------------------------------------------


def write_csv_dataset(path: str | Path, ds: Dataset) -> None:
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(ds.dim)] + ["label"])
        for row, label in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in row] + [int(label)])


def parse_csv_dataset(
    path: str | Path, num_classes: int | None = None, split: str = "train"
) -> Dataset:
    rows, labels = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or len(header) < 2:
            raise FormatError(f"{path}: line 1: header needs feature columns and a label column")
        width = len(header)
        for line_no, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != width:
                raise FormatError(f"{path}: line {line_no}: expected {width} fields, got {len(rec)}")
            try:
                feats = [float(v) for v in rec[:-1]]
                label = int(rec[-1])
            except ValueError as exc:
                raise FormatError(f"{path}: line {line_no}: {exc}") from exc
            if not all(math.isfinite(v) for v in feats):
                raise FormatError(f"{path}: line {line_no}: non-finite feature")
            if label < 0 or (num_classes is not None and label >= num_classes):
                raise FormatError(f"{path}: line {line_no}: label {label} out of range")
            rows.append(feats)
            labels.append(label)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    c = num_classes if num_classes is not None else max(labels) + 1
    return Dataset(np.array(rows, dtype=np.float32), np.array(labels), c, split, str(path))


def save_dataset(path: str | Path, ds: Dataset, fmt: str | None = None) -> None:
    fmt = fmt or ("csv" if str(path).endswith(".csv") else "binary")
    if fmt == "csv":
        write_csv_dataset(path, ds)
    elif fmt == "binary":
        atomic_write_bytes(path, dataset_bytes(ds))
    else:
        raise ValidationError(f"unknown dataset format {fmt!r}")


def load_dataset(
    path: str | Path, fmt: str | None = None, num_classes: int | None = None, split: str = "train"
) -> Dataset:
    fmt = fmt or ("csv" if str(path).endswith(".csv") else "binary")
    if fmt == "csv":
        return parse_csv_dataset(path, num_classes, split)
    if fmt == "binary":
        return parse_dataset(Path(path).read_bytes(), split, str(path))
    raise ValidationError(f"unknown dataset format {fmt!r}")
