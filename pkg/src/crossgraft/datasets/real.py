"""Loaders for the original dataset files.

Expected layout under the data directory:

    <data_dir>/mnist/train-images-idx3-ubyte.gz     (and -labels-, t10k-)
    <data_dir>/fashion/train-images-idx3-ubyte.gz   (same IDX names)
    <data_dir>/usps/usps.bz2, <data_dir>/usps/usps.t.bz2

IDX files may be gzipped or plain. USPS files are the common libsvm text
format (16x16 grayscale in [-1, 1], labels 1..10); images are resized to
28x28 at load so every corpus shares one geometry.
"""
from __future__ import annotations

import bz2
import gzip
import struct
from pathlib import Path

import numpy as np
from scipy import ndimage

from ..errors import DataError

IDX_NAMES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
USPS_NAMES = {"train": "usps.bz2", "test": "usps.t.bz2"}


def _read_maybe_gz(path: Path) -> bytes:
    gz = path.with_suffix(path.suffix + ".gz") if path.suffix != ".gz" else path
    if gz.exists():
        with gzip.open(gz, "rb") as f:
            return f.read()
    if path.exists():
        return path.read_bytes()
    raise DataError(f"dataset file missing: {path} (or {gz})")


def _parse_idx(raw: bytes, path: Path) -> np.ndarray:
    if len(raw) < 4:
        raise DataError(f"corrupt IDX file (truncated header): {path}")
    zero, dtype_code, ndim = raw[0] << 8 | raw[1], raw[2], raw[3]
    if zero != 0 or dtype_code != 0x08:
        raise DataError(f"corrupt IDX file (bad magic {raw[:4].hex()}): {path}")
    dims = struct.unpack(f">{ndim}I", raw[4 : 4 + 4 * ndim])
    data = np.frombuffer(raw, dtype=np.uint8, offset=4 + 4 * ndim)
    if data.size != int(np.prod(dims)):
        raise DataError(f"corrupt IDX file (size mismatch): {path}")
    return data.reshape(dims)


def load_idx_pair(root: Path, split: str) -> tuple[np.ndarray, np.ndarray]:
    img_name, lbl_name = IDX_NAMES[split]
    images = _parse_idx(_read_maybe_gz(root / img_name), root / img_name)
    labels = _parse_idx(_read_maybe_gz(root / lbl_name), root / lbl_name)
    if images.ndim != 3 or len(images) != len(labels):
        raise DataError(f"corrupt IDX pair under {root}: {images.shape} vs {labels.shape}")
    return images[..., None], labels.astype(np.int64)


def load_usps(root: Path, split: str) -> tuple[np.ndarray, np.ndarray]:
    path = root / USPS_NAMES[split]
    if not path.exists():
        raise DataError(f"dataset file missing: {path}")
    with bz2.open(path, "rt") as f:
        lines = [line.split() for line in f if line.strip()]
    n = len(lines)
    images = np.empty((n, 28, 28, 1), dtype=np.uint8)
    labels = np.empty(n, dtype=np.int64)
    for i, parts in enumerate(lines):
        labels[i] = int(float(parts[0])) - 1
        vals = np.array([float(p.split(":")[1]) for p in parts[1:]], dtype=np.float64)
        if vals.size != 256:
            raise DataError(f"corrupt USPS record {i} in {path}: {vals.size} values")
        img16 = (vals.reshape(16, 16) + 1.0) / 2.0
        img28 = np.clip(ndimage.zoom(img16, 28 / 16, order=1)[:28, :28], 0.0, 1.0)
        images[i, :, :, 0] = np.round(img28 * 255.0).astype(np.uint8)
    return images, labels


def load_real(name: str, split: str, data_dir: Path) -> tuple[np.ndarray, np.ndarray]:
    if name == "usps":
        return load_usps(data_dir / "usps", split)
    return load_idx_pair(data_dir / name, split)


def real_files_present(name: str, data_dir: Path) -> bool:
    if name == "usps":
        return all((data_dir / "usps" / USPS_NAMES[s]).exists() for s in ("train", "test"))
    root = data_dir / name
    for split in ("train", "test"):
        for fname in IDX_NAMES[split]:
            p = root / fname
            if not p.exists() and not p.with_suffix(p.suffix + ".gz").exists():
                return False
    return True
