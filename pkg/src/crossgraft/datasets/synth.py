"""Deterministic stand-in corpora used when the real dataset files are absent.

These corpora mimic the shapes, sizes and split counts of the originals so
the rest of the pipeline is agnostic to the data source. Sample i is fully
determined by (corpus seed, name, split, i); see ``glyphs`` for the digit
renderers and ``_fashion_silhouette`` for the clothing classes.
"""
from __future__ import annotations

import numpy as np

from .glyphs import render_digit
from .types import IMAGE_SIZE, NUM_CLASSES

# Split sizes mirror the originals.
SPLIT_SIZES = {
    ("mnist", "train"): 60_000,
    ("mnist", "test"): 10_000,
    ("usps", "train"): 7_291,
    ("usps", "test"): 2_007,
    ("fashion", "train"): 60_000,
    ("fashion", "test"): 10_000,
}

_SPLIT_TAG = {"train": 11, "test": 13}
_NAME_TAG = {"mnist": 1, "usps": 2, "fashion": 3}


def sample_rng(name: str, split: str, seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, _NAME_TAG[name], _SPLIT_TAG[split], index)))


def _rect(xx, yy, cx, cy, w, h):
    return (np.abs(xx - cx) <= w / 2) & (np.abs(yy - cy) <= h / 2)


def _ellipse(xx, yy, cx, cy, rx, ry):
    return ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0


def _trapezoid(xx, yy, cx, top, bottom, w_top, w_bottom):
    t = np.clip((yy - top) / max(bottom - top, 1e-6), 0.0, 1.0)
    half = (w_top + (w_bottom - w_top) * t) / 2
    return (yy >= top) & (yy <= bottom) & (np.abs(xx - cx) <= half)


def _fashion_silhouette(label: int, rng: np.random.Generator) -> np.ndarray:
    """One of ten parametric clothing silhouettes on a 28x28 canvas, values [0, 1]."""
    ys, xs = np.mgrid[0:IMAGE_SIZE, 0:IMAGE_SIZE].astype(np.float64)
    xx, yy = xs + 0.5, ys + 0.5
    j = lambda v, sd: v + rng.normal(0.0, sd)
    mask = np.zeros((IMAGE_SIZE, IMAGE_SIZE), dtype=bool)

    if label == 0:  # t-shirt: torso + short sleeves
        mask |= _rect(xx, yy, j(14, 0.5), j(15, 0.5), j(11, 0.8), j(15, 0.9))
        mask |= _rect(xx, yy, j(5.5, 0.4), j(10, 0.5), j(5, 0.5), j(5, 0.5))
        mask |= _rect(xx, yy, j(22.5, 0.4), j(10, 0.5), j(5, 0.5), j(5, 0.5))
    elif label == 1:  # trouser: two legs + hip
        mask |= _rect(xx, yy, j(14, 0.4), j(7, 0.4), j(10, 0.7), j(5, 0.5))
        mask |= _rect(xx, yy, j(11, 0.4), j(17, 0.5), j(4.2, 0.4), j(17, 0.8))
        mask |= _rect(xx, yy, j(17, 0.4), j(17, 0.5), j(4.2, 0.4), j(17, 0.8))
    elif label == 2:  # pullover: torso + full sleeves
        mask |= _rect(xx, yy, j(14, 0.5), j(15, 0.5), j(10.5, 0.8), j(16, 0.9))
        mask |= _rect(xx, yy, j(5.5, 0.4), j(15, 0.7), j(4.4, 0.4), j(15, 0.9))
        mask |= _rect(xx, yy, j(22.5, 0.4), j(15, 0.7), j(4.4, 0.4), j(15, 0.9))
    elif label == 3:  # dress: narrow top widening downward
        mask |= _trapezoid(xx, yy, j(14, 0.4), j(5, 0.5), j(24, 0.6), j(7, 0.6), j(16, 1.0))
    elif label == 4:  # coat: tall torso, sleeves, front opening
        mask |= _rect(xx, yy, j(14, 0.5), j(15, 0.5), j(12, 0.8), j(18, 0.9))
        mask |= _rect(xx, yy, j(5, 0.4), j(15, 0.7), j(4, 0.4), j(16, 0.9))
        mask |= _rect(xx, yy, j(23, 0.4), j(15, 0.7), j(4, 0.4), j(16, 0.9))
        mask &= ~_rect(xx, yy, 14, j(17, 0.6), 1.6, j(14, 1.0))
    elif label == 5:  # sandal: sole bar + thin straps
        mask |= _rect(xx, yy, j(14, 0.5), j(20, 0.5), j(18, 1.0), j(3.2, 0.4))
        mask |= _rect(xx, yy, j(10, 0.6), j(14, 0.6), j(2.0, 0.3), j(9, 0.8))
        mask |= _rect(xx, yy, j(17, 0.6), j(15, 0.6), j(2.0, 0.3), j(7, 0.8))
    elif label == 6:  # shirt: torso + sleeves + collar notch
        mask |= _rect(xx, yy, j(14, 0.5), j(15, 0.5), j(10.5, 0.8), j(16, 0.9))
        mask |= _rect(xx, yy, j(6, 0.4), j(12, 0.6), j(4.6, 0.4), j(9, 0.8))
        mask |= _rect(xx, yy, j(22, 0.4), j(12, 0.6), j(4.6, 0.4), j(9, 0.8))
        mask &= ~_trapezoid(xx, yy, 14, j(6.5, 0.4), j(11, 0.6), j(4.5, 0.5), 0.5)
    elif label == 7:  # sneaker: low profile with toe bump
        mask |= _ellipse(xx, yy, j(14, 0.5), j(19, 0.4), j(10, 0.8), j(4.2, 0.4))
        mask |= _ellipse(xx, yy, j(20, 0.6), j(18, 0.4), j(5, 0.5), j(3.2, 0.4))
    elif label == 8:  # bag: body + handle ring
        mask |= _rect(xx, yy, j(14, 0.5), j(17, 0.5), j(15, 1.0), j(11, 0.8))
        ring = _ellipse(xx, yy, j(14, 0.4), j(9, 0.5), j(5, 0.5), j(4, 0.4))
        ring &= ~_ellipse(xx, yy, 14, 9, 3.2, 2.4)
        mask |= ring
    else:  # ankle boot: shaft + foot
        mask |= _rect(xx, yy, j(11, 0.5), j(12, 0.6), j(6, 0.6), j(11, 0.9))
        mask |= _ellipse(xx, yy, j(16, 0.6), j(19, 0.4), j(8.5, 0.7), j(4, 0.4))

    # shade with coarse value noise so textures are non-flat
    grid = rng.uniform(0.45, 1.0, size=(4, 4))
    texture = np.kron(grid, np.ones((7, 7)))[:IMAGE_SIZE, :IMAGE_SIZE]
    img = mask.astype(np.float64) * (0.55 + 0.45 * texture)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def build_standin(name: str, split: str, seed: int, count: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Generate `count` samples (default the split's full size).

    Returns (images uint8 [N, 28, 28, 1], labels int64 [N]).
    """
    total = SPLIT_SIZES[(name, split)]
    n = total if count is None else min(count, total)
    images = np.empty((n, IMAGE_SIZE, IMAGE_SIZE, 1), dtype=np.uint8)
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        rng = sample_rng(name, split, seed, i)
        label = int(rng.integers(0, NUM_CLASSES))
        if name in ("mnist", "usps"):
            img = render_digit(label, rng, style=name)
        else:
            img = _fashion_silhouette(label, rng)
        images[i, :, :, 0] = np.round(img * 255.0).astype(np.uint8)
        labels[i] = label
    return images, labels
