"""Shifted-domain constructions: background blending and multi-digit composition.

The blend rule for a grayscale foreground g and an RGB crop b (both in
[0, 1]) is out_c = |b_c - g| per channel, mapped back to [-1, 1] storage.
A black foreground therefore reproduces the crop exactly, and bright
strokes invert whatever is behind them. The same rule serves the
noise-corrupted fashion variant, with crops drawn from a procedural
texture pool instead of photographs.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import ndimage

from ..errors import ConfigError
from .glyphs import tight_crop
from .types import IMAGE_SIZE


def procedural_texture_pool(seed: int, count: int = 256, size: int = 56) -> np.ndarray:
    """Seeded multi-octave value noise, uint8 [count, size, size, 3].

    Stands in for photographic background crops so the pipeline has no
    mandatory external download.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xBEEF)))
    pool = np.zeros((count, size, size, 3), dtype=np.float64)
    octaves = ((4, 0.55), (9, 0.30), (19, 0.15))
    for i in range(count):
        for c in range(3):
            acc = np.zeros((size, size))
            for cells, weight in octaves:
                grid = rng.uniform(0.0, 1.0, size=(cells, cells))
                acc += weight * ndimage.zoom(grid, size / cells, order=1)[:size, :size]
            pool[i, :, :, c] = acc
        lo, hi = pool[i].min(), pool[i].max()
        pool[i] = (pool[i] - lo) / max(hi - lo, 1e-9)
    return np.round(pool * 255.0).astype(np.uint8)


def load_background_pool(seed: int, backgrounds_dir: str | Path | None) -> np.ndarray:
    """Photograph crops when a directory of .npy/.png images is supplied, else procedural."""
    if backgrounds_dir is None:
        return procedural_texture_pool(seed)
    root = Path(backgrounds_dir)
    arrays = []
    if root.exists():
        for p in sorted(root.glob("*.npy")):
            arr = np.load(p)
            if arr.ndim == 3 and arr.shape[-1] == 3 and arr.dtype == np.uint8:
                arrays.append(arr)
    if not arrays:
        raise ConfigError(f"backgrounds: no usable uint8 RGB .npy images under {root}")
    return np.stack([a[:56, :56] for a in arrays if a.shape[0] >= 56 and a.shape[1] >= 56])


def blend_batch(gray_u8: np.ndarray, pool_u8: np.ndarray, seed: int, index_offset: int = 0) -> np.ndarray:
    """Blend grayscale uint8 [N, H, W, 1] over random pool crops -> uint8 [N, H, W, 3].

    Crop choice and position for sample i depend only on (seed, index_offset + i).
    """
    if pool_u8.size == 0:
        raise ConfigError("backgrounds: empty background pool")
    n, h, w = gray_u8.shape[:3]
    out = np.empty((n, h, w, 3), dtype=np.uint8)
    ph, pw = pool_u8.shape[1:3]
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0x715A, index_offset + i)))
        k = int(rng.integers(0, len(pool_u8)))
        y0 = int(rng.integers(0, ph - h + 1))
        x0 = int(rng.integers(0, pw - w + 1))
        crop = pool_u8[k, y0 : y0 + h, x0 : x0 + w].astype(np.float64) / 255.0
        g = gray_u8[i, :, :, 0].astype(np.float64) / 255.0
        blended = np.abs(crop - g[:, :, None])
        out[i] = np.round(np.clip(blended, 0.0, 1.0) * 255.0).astype(np.uint8)
    return out


def _resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    zy, zx = out_h / img.shape[0], out_w / img.shape[1]
    res = ndimage.zoom(img, (zy, zx), order=1)
    return np.clip(res[:out_h, :out_w], 0.0, 1.0)


def compose_multi_digit(
    base_images_u8: np.ndarray,
    base_labels: np.ndarray,
    seed: int,
    index: int,
    max_digits: int = 3,
) -> tuple[np.ndarray, int]:
    """Compose 1..max_digits glyphs left-to-right; the central slot decides the label.

    The central slot is ceil(n/2) counted from 1. Digits are tight-cropped,
    rescaled to a common height, placed with <= 2px jitter, and the whole
    canvas is resized back to 28x28.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x3D16, index)))
    n = int(rng.integers(1, max_digits + 1))
    picks = rng.integers(0, len(base_images_u8), size=n)
    central = (n + 1) // 2 - 1
    label = int(base_labels[picks[central]])

    glyphs = []
    for p in picks:
        img = base_images_u8[p, :, :, 0].astype(np.float64) / 255.0
        crop = tight_crop(img)
        target_h = float(rng.uniform(0.70, 0.92)) * IMAGE_SIZE
        scale = target_h / max(crop.shape[0], 1)
        gh = max(int(round(crop.shape[0] * scale)), 4)
        gw = max(int(round(crop.shape[1] * scale)), 3)
        glyphs.append(_resize(crop, gh, gw))

    gap = 1
    total_w = sum(g.shape[1] for g in glyphs) + gap * (n - 1) + 4
    canvas = np.zeros((IMAGE_SIZE, max(IMAGE_SIZE, total_w)), dtype=np.float64)
    x = (canvas.shape[1] - (total_w - 4)) // 2
    for g in glyphs:
        jx = int(rng.integers(-2, 3))
        jy = int(rng.integers(-2, 3))
        y = (IMAGE_SIZE - g.shape[0]) // 2 + jy
        y = int(np.clip(y, 0, IMAGE_SIZE - g.shape[0]))
        xs = int(np.clip(x + jx, 0, canvas.shape[1] - g.shape[1]))
        region = canvas[y : y + g.shape[0], xs : xs + g.shape[1]]
        np.maximum(region, g, out=region)
        x += g.shape[1] + gap

    out = _resize(canvas, IMAGE_SIZE, IMAGE_SIZE)
    return np.round(out * 255.0).astype(np.uint8)[:, :, None], label
