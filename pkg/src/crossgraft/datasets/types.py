"""Core data types: dataset specs, in-memory datasets, batch feeds.

Images are stored as uint8 NHWC arrays (1 or 3 channels) and emitted as
float32 channels-first torch tensors rescaled to [-1, 1].
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import torch

from ..errors import ConfigError, ContractError

BASE_NAMES = ("mnist", "usps", "fashion")
DERIVED_NAMES = ("mnist_m", "m_digits", "fashion_m")
ALL_NAMES = BASE_NAMES + DERIVED_NAMES
SPLITS = ("train", "test")

NUM_CLASSES = 10
IMAGE_SIZE = 28


@dataclass(frozen=True)
class DatasetSpec:
    """Identifies one reproducible sample stream.

    Identical specs yield byte-identical streams: every sample is generated
    (or loaded) from state derived only from (name, split, seed, index), so
    a capped stream is a prefix of the uncapped one.
    """

    name: str
    split: str = "train"
    size_cap: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.name not in ALL_NAMES:
            raise ConfigError(f"dataset.name: unknown dataset {self.name!r}, expected one of {ALL_NAMES}")
        if self.split not in SPLITS:
            raise ConfigError(f"dataset.split: unknown split {self.split!r}, expected one of {SPLITS}")
        if self.size_cap is not None and self.size_cap <= 0:
            raise ConfigError(f"dataset.size_cap: must be positive, got {self.size_cap}")

    def cache_key(self) -> str:
        cap = "full" if self.size_cap is None else str(self.size_cap)
        return f"{self.name}-{self.split}-seed{self.seed}-cap{cap}"


@dataclass
class LabeledBatch:
    """A batch of images in [-1, 1], channels-first, with optional labels."""

    images: torch.Tensor
    labels: torch.Tensor | None = None

    def __post_init__(self):
        if self.images.dim() != 4:
            raise ContractError(f"images must be rank 4 [batch, channels, h, w], got rank {self.images.dim()}")
        lo, hi = float(self.images.min()), float(self.images.max())
        if lo < -1.0 - 1e-5 or hi > 1.0 + 1e-5:
            raise ContractError(f"image values outside [-1, 1]: min={lo:.4f} max={hi:.4f}")
        if self.labels is not None and self.labels.shape[0] != self.images.shape[0]:
            raise ContractError(
                f"labels length {self.labels.shape[0]} != batch size {self.images.shape[0]}"
            )

    def __len__(self) -> int:
        return self.images.shape[0]


class LabelAudit:
    """Counts label materializations by phase ('train'/'eval').

    The trainer never receives target labels: its target feed is created
    with with_labels=False, so a nonzero 'train' count flags a leak.
    """

    def __init__(self):
        self.counts = {"train": 0, "eval": 0}
        self.phase = "train"

    def record(self, n: int) -> None:
        self.counts[self.phase] = self.counts.get(self.phase, 0) + int(n)


def to_tensor(images_u8: np.ndarray, channels: int = 3) -> torch.Tensor:
    """uint8 NHWC -> float32 NCHW in [-1, 1]; grayscale replicated to `channels`."""
    if images_u8.ndim != 4:
        raise ContractError(f"expected NHWC uint8 array, got shape {images_u8.shape}")
    x = torch.from_numpy(np.ascontiguousarray(images_u8)).to(torch.float32)
    x = x.permute(0, 3, 1, 2) / 127.5 - 1.0
    if x.shape[1] == 1 and channels == 3:
        x = x.repeat(1, 3, 1, 1)
    elif x.shape[1] != channels:
        raise ContractError(f"cannot map {x.shape[1]}-channel images to {channels} channels")
    return x


@dataclass
class ArrayDataset:
    """In-memory dataset: images uint8 [N, H, W, C], labels int64 [N]."""

    images: np.ndarray
    labels: np.ndarray
    spec: DatasetSpec
    source: str = "stand_in"  # "real" | "stand_in" | "derived"
    audit: LabelAudit = field(default_factory=LabelAudit)

    def __post_init__(self):
        if self.images.dtype != np.uint8 or self.images.ndim != 4:
            raise ContractError(f"images must be uint8 NHWC, got {self.images.dtype} {self.images.shape}")
        if len(self.labels) != len(self.images):
            raise ContractError("labels/images length mismatch")

    def __len__(self) -> int:
        return len(self.images)

    @property
    def num_classes(self) -> int:
        return NUM_CLASSES

    def sha256(self) -> str:
        h = hashlib.sha256()
        h.update(self.images.tobytes())
        h.update(self.labels.astype(np.int64).tobytes())
        return h.hexdigest()

    def take(self, indices: np.ndarray, *, channels: int = 3, with_labels: bool = True) -> LabeledBatch:
        images = to_tensor(self.images[indices], channels=channels)
        labels = None
        if with_labels:
            labels = torch.from_numpy(self.labels[indices].astype(np.int64))
            self.audit.record(len(indices))
        return LabeledBatch(images, labels)

    def subset_per_class(self, per_class: int, seed: int) -> "ArrayDataset":
        """Deterministically sample `per_class` examples of every class."""
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC1A55)))
        picked = []
        for c in range(NUM_CLASSES):
            pool = np.flatnonzero(self.labels == c)
            if len(pool) < per_class:
                raise ConfigError(
                    f"labeled_target_per_class: requested {per_class} of class {c}, only {len(pool)} available"
                )
            picked.append(rng.choice(pool, size=per_class, replace=False))
        idx = np.sort(np.concatenate(picked))
        return ArrayDataset(self.images[idx], self.labels[idx], self.spec, source=self.source, audit=self.audit)

    @staticmethod
    def concatenate(a: "ArrayDataset", b: "ArrayDataset") -> "ArrayDataset":
        if a.images.shape[1:] != b.images.shape[1:]:
            ca, cb = a.images.shape[-1], b.images.shape[-1]
            if {ca, cb} == {1, 3} and a.images.shape[1:3] == b.images.shape[1:3]:
                gray = a if ca == 1 else b
                rep = np.repeat(gray.images, 3, axis=-1)
                if ca == 1:
                    a = ArrayDataset(rep, a.labels, a.spec, source=a.source, audit=a.audit)
                else:
                    b = ArrayDataset(rep, b.labels, b.spec, source=b.source, audit=b.audit)
            else:
                raise ContractError(f"incompatible image shapes {a.images.shape[1:]} vs {b.images.shape[1:]}")
        images = np.concatenate([a.images, b.images], axis=0)
        labels = np.concatenate([a.labels, b.labels], axis=0)
        return ArrayDataset(images, labels, a.spec, source=a.source, audit=a.audit)


class BatchFeed:
    """Deterministic, resumable infinite batch feed over an ArrayDataset.

    Epoch e uses a permutation derived from (order_seed, e); partial
    trailing batches are dropped. State is the pair (epoch, offset), which
    checkpoints capture so a resumed run consumes the exact same sequence.
    Handles are single-consumer.
    """

    def __init__(
        self,
        dataset: ArrayDataset,
        batch_size: int,
        order_seed: int,
        *,
        channels: int = 3,
        with_labels: bool = True,
    ):
        if batch_size < 1:
            raise ConfigError(f"batch_size: must be >= 1, got {batch_size}")
        if batch_size > len(dataset):
            raise ConfigError(f"batch_size {batch_size} exceeds dataset size {len(dataset)}")
        self.dataset = dataset
        self.batch_size = batch_size
        self.order_seed = order_seed
        self.channels = channels
        self.with_labels = with_labels
        self.epoch = 0
        self.offset = 0
        self._perm = self._permutation(0)

    def _permutation(self, epoch: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence((self.order_seed, epoch)))
        return rng.permutation(len(self.dataset))

    def state(self) -> tuple[int, int]:
        return (self.epoch, self.offset)

    def set_state(self, state: tuple[int, int]) -> None:
        self.epoch, self.offset = int(state[0]), int(state[1])
        self._perm = self._permutation(self.epoch)

    def next_batch(self) -> LabeledBatch:
        if self.offset + self.batch_size > len(self.dataset):
            self.epoch += 1
            self.offset = 0
            self._perm = self._permutation(self.epoch)
        idx = self._perm[self.offset : self.offset + self.batch_size]
        self.offset += self.batch_size
        return self.dataset.take(idx, channels=self.channels, with_labels=self.with_labels)


def eval_batches(dataset: ArrayDataset, batch_size: int, *, channels: int = 3, with_labels: bool = True):
    """Sequential full pass in storage order (no shuffling), for evaluation."""
    n = len(dataset)
    for start in range(0, n, batch_size):
        idx = np.arange(start, min(start + batch_size, n))
        yield dataset.take(idx, channels=channels, with_labels=with_labels)
