"""Procedural digit rendering for the stand-in corpora.

Each digit class has several skeleton variants (polyline strokes in a unit
box). A sample picks a variant from its domain's mixture, jitters the
control points, applies a random affine map, and rasterizes an anti-aliased
stroke distance field. The two styles emulate the classic handwritten-digit
domain gap along two axes:

* rendering: ``mnist``-style draws on a 28x28 canvas (glyph box ~20px, thin
  strokes); ``usps``-style draws on 16x16 with relatively thicker strokes
  and a fuller frame, then upscales to 28x28 (blurrier, blockier, slanted).
* content: the domains weight the skeleton variants differently (flagged vs
  bare ones, crossbarred vs plain sevens, open vs closed fours, ...), so the
  shape distributions genuinely shift, not just the textures.

All randomness flows from a per-sample ``numpy`` generator, so sample i of
a given (seed, split) is identical regardless of how many are requested.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage


def _oval(cx, cy, rx, ry, n=14):
    return [(cx + rx * np.cos(t), cy + ry * np.sin(t)) for t in np.linspace(0.0, 2 * np.pi, n)]


# Variants per digit: list of stroke sets; a stroke is a polyline.
DIGIT_VARIANTS: dict[int, list[list[list[tuple[float, float]]]]] = {
    0: [
        [_oval(0.5, 0.5, 0.26, 0.38)],                       # round
        [_oval(0.5, 0.5, 0.19, 0.40)],                       # narrow
    ],
    1: [
        [[(0.36, 0.28), (0.53, 0.12)], [(0.53, 0.12), (0.53, 0.88)], [(0.37, 0.88), (0.69, 0.88)]],  # flag+base
        [[(0.52, 0.12), (0.52, 0.88)]],                      # bare stroke
        [[(0.36, 0.28), (0.53, 0.12)], [(0.53, 0.12), (0.53, 0.88)]],  # flag only
    ],
    2: [
        [   # plain
            [(0.26, 0.30), (0.29, 0.18), (0.43, 0.10), (0.60, 0.11), (0.72, 0.22), (0.72, 0.36),
             (0.60, 0.52), (0.40, 0.66), (0.25, 0.88)],
            [(0.25, 0.88), (0.78, 0.88)],
        ],
        [   # looped base
            [(0.26, 0.30), (0.29, 0.18), (0.43, 0.10), (0.60, 0.11), (0.72, 0.22), (0.72, 0.36),
             (0.58, 0.54), (0.38, 0.70), (0.27, 0.84)],
            [(0.27, 0.84), (0.33, 0.72), (0.44, 0.74), (0.45, 0.85), (0.78, 0.86)],
        ],
    ],
    3: [
        [
            [(0.28, 0.17), (0.46, 0.10), (0.63, 0.14), (0.70, 0.27), (0.62, 0.40), (0.47, 0.47)],
            [(0.47, 0.47), (0.66, 0.54), (0.72, 0.68), (0.62, 0.83), (0.43, 0.90), (0.27, 0.82)],
        ],
        [   # flat top
            [(0.28, 0.12), (0.70, 0.12), (0.48, 0.44)],
            [(0.48, 0.44), (0.68, 0.52), (0.73, 0.68), (0.62, 0.84), (0.42, 0.90), (0.27, 0.82)],
        ],
    ],
    4: [
        [[(0.63, 0.10), (0.23, 0.62), (0.81, 0.62)], [(0.63, 0.10), (0.63, 0.90)]],  # open
        [[(0.32, 0.12), (0.27, 0.58), (0.80, 0.58)], [(0.64, 0.12), (0.64, 0.90)]],  # closed top-left
    ],
    5: [
        [
            [(0.72, 0.10), (0.31, 0.10)],
            [(0.31, 0.10), (0.28, 0.45)],
            [(0.28, 0.45), (0.50, 0.40), (0.68, 0.48), (0.73, 0.63), (0.64, 0.80), (0.45, 0.88), (0.27, 0.80)],
        ],
        [   # rounded, joined in one motion
            [(0.70, 0.12), (0.34, 0.12), (0.30, 0.42), (0.52, 0.38), (0.70, 0.48), (0.72, 0.66),
             (0.58, 0.84), (0.38, 0.88), (0.26, 0.78)],
        ],
    ],
    6: [
        [
            [(0.66, 0.12), (0.48, 0.18), (0.34, 0.38), (0.28, 0.60), (0.34, 0.80), (0.50, 0.89),
             (0.66, 0.82), (0.71, 0.66), (0.63, 0.52), (0.47, 0.50), (0.33, 0.58)],
        ],
        [   # straight spine
            [(0.58, 0.10), (0.40, 0.34), (0.32, 0.60)],
            [_oval(0.48, 0.70, 0.17, 0.19)[k] for k in range(14)],
        ],
    ],
    7: [
        [[(0.24, 0.12), (0.76, 0.12), (0.46, 0.88)]],                                 # plain
        [[(0.24, 0.12), (0.76, 0.12), (0.46, 0.88)], [(0.32, 0.50), (0.64, 0.50)]],   # crossbar
    ],
    8: [
        [_oval(0.5, 0.30, 0.20, 0.19), _oval(0.5, 0.68, 0.24, 0.22)],
        [_oval(0.5, 0.29, 0.23, 0.18), _oval(0.5, 0.69, 0.19, 0.21)],  # top-heavy
    ],
    9: [
        [   # curly tail
            [(0.34, 0.88), (0.52, 0.82), (0.66, 0.62), (0.72, 0.40), (0.66, 0.20), (0.50, 0.11),
             (0.34, 0.18), (0.29, 0.34), (0.37, 0.48), (0.53, 0.50), (0.67, 0.42)],
        ],
        [   # straight tail
            [_oval(0.50, 0.30, 0.19, 0.20)[k] for k in range(14)],
            [(0.69, 0.30), (0.66, 0.60), (0.62, 0.88)],
        ],
    ],
}

# Per-domain mixture over skeleton variants (rows sum to 1).
VARIANT_WEIGHTS: dict[str, dict[int, tuple[float, ...]]] = {
    "mnist": {
        0: (0.75, 0.25),
        1: (0.55, 0.15, 0.30),
        2: (0.75, 0.25),
        3: (0.80, 0.20),
        4: (0.75, 0.25),
        5: (0.75, 0.25),
        6: (0.80, 0.20),
        7: (0.85, 0.15),
        8: (0.75, 0.25),
        9: (0.70, 0.30),
    },
    "usps": {
        0: (0.25, 0.75),
        1: (0.10, 0.70, 0.20),
        2: (0.30, 0.70),
        3: (0.25, 0.75),
        4: (0.20, 0.80),
        5: (0.25, 0.75),
        6: (0.25, 0.75),
        7: (0.25, 0.75),
        8: (0.25, 0.75),
        9: (0.20, 0.80),
    },
}


def _segments(strokes: list[np.ndarray]) -> np.ndarray:
    """Stack polylines into one [S, 2, 2] segment array."""
    segs = []
    for poly in strokes:
        segs.extend(np.stack([poly[:-1], poly[1:]], axis=1))
    return np.asarray(segs, dtype=np.float64)


def rasterize(strokes: list[np.ndarray], size: int, width: float, aa: float = 0.7) -> np.ndarray:
    """Render anti-aliased strokes (pixel coordinates) to a [size, size] float image in [0, 1]."""
    segs = _segments(strokes)
    ys, xs = np.mgrid[0:size, 0:size]
    p = np.stack([xs, ys], axis=-1).astype(np.float64) + 0.5  # pixel centers
    a, b = segs[:, 0], segs[:, 1]
    ab = b - a
    denom = np.maximum((ab * ab).sum(-1), 1e-12)
    ap = p[:, :, None, :] - a  # [H, W, S, 2]
    t = np.clip((ap * ab).sum(-1) / denom, 0.0, 1.0)
    closest = a + t[..., None] * ab
    d = np.sqrt(((p[:, :, None, :] - closest) ** 2).sum(-1)).min(-1)
    return np.clip(0.5 + (width / 2.0 - d) / (2.0 * aa), 0.0, 1.0)


def _pick_variant(digit: int, rng: np.random.Generator, style: str) -> list[np.ndarray]:
    weights = VARIANT_WEIGHTS[style][digit]
    k = int(rng.choice(len(weights), p=np.asarray(weights) / np.sum(weights)))
    return [np.asarray(poly, dtype=np.float64) for poly in DIGIT_VARIANTS[digit][k]]


def _jitter(strokes, rng, sd: float):
    return [pts + rng.normal(0.0, sd, size=pts.shape) for pts in strokes]


def _affine(strokes, rng, *, rot_sd, shear_sd, shear_bias=0.0):
    theta = np.clip(rng.normal(0.0, rot_sd), -2.2 * rot_sd, 2.2 * rot_sd)
    shear = shear_bias + rng.normal(0.0, shear_sd)
    c, s = np.cos(theta), np.sin(theta)
    m = np.array([[c, -s], [s, c]]) @ np.array([[1.0, shear], [0.0, 1.0]])
    return [(pts - 0.5) @ m.T + 0.5 for pts in strokes]


def _place(strokes, *, box: float, cx: float, cy: float):
    """Scale unit-box strokes to a box of `box` px centered at (cx, cy)."""
    return [(pts - 0.5) * box + np.array([cx, cy]) for pts in strokes]


def render_digit(digit: int, rng: np.random.Generator, style: str) -> np.ndarray:
    """Render one digit sample as [28, 28] float32 in [0, 1]."""
    if style == "mnist":
        strokes = _pick_variant(digit, rng, style)
        strokes = _jitter(strokes, rng, sd=0.028)
        strokes = _affine(strokes, rng, rot_sd=0.13, shear_sd=0.12)
        box = float(np.clip(rng.normal(20.0, 1.6), 16.0, 23.5))
        cx = 14.0 + rng.normal(0.0, 0.9)
        cy = 14.0 + rng.normal(0.0, 0.9)
        width = float(np.clip(rng.normal(1.9, 0.35), 1.1, 2.9))
        img = rasterize(_place(strokes, box=box, cx=cx, cy=cy), 28, width)
        img *= rng.uniform(0.85, 1.0)
        return img.astype(np.float32)
    if style == "usps":
        strokes = _pick_variant(digit, rng, style)
        strokes = _jitter(strokes, rng, sd=0.030)
        strokes = _affine(strokes, rng, rot_sd=0.07, shear_sd=0.10, shear_bias=0.18)
        box = float(np.clip(rng.normal(14.6, 0.9), 12.0, 15.9))
        cx = 8.0 + rng.normal(0.0, 0.5)
        cy = 8.0 + rng.normal(0.0, 0.5)
        width = float(np.clip(rng.normal(2.5, 0.3), 1.8, 3.3))
        small = rasterize(_place(strokes, box=box, cx=cx, cy=cy), 16, width)
        img = ndimage.zoom(small, 28 / 16, order=1)[:28, :28]
        img = np.clip(img, 0.0, 1.0) ** 0.7
        # scanned-envelope haze: non-black paper background
        haze = rng.uniform(0.05, 0.14)
        img = haze + (1.0 - haze) * img
        img *= rng.uniform(0.90, 1.0)
        return img.astype(np.float32)
    raise ValueError(f"unknown glyph style {style!r}")


def tight_crop(img: np.ndarray, threshold: float = 0.08) -> np.ndarray:
    """Crop to the bounding box of pixels above `threshold` (falls back to full frame)."""
    mask = img > threshold
    if not mask.any():
        return img
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return img[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1]
