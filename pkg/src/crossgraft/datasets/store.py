"""Dataset assembly, caching, and the load dispatcher.

Derived corpora are built from their base corpus plus a construction rule:

    mnist_m   = blend(mnist, background crops)
    fashion_m = blend(fashion, procedural texture crops)
    m_digits  = multi-digit composition over mnist

The cache directory holds one subdirectory per DatasetSpec cache key with
``data.npz`` (images + labels) and ``manifest.json`` (name, split, seed,
count, sha256, source). Real files are preferred when present under the
data directory; otherwise the documented stand-in corpora are generated
(controlled by allow_stand_in / CROSSGRAFT_STANDIN_DATA).
"""
from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from ..errors import ConfigError, DataError
from . import real as real_loaders
from .shifts import blend_batch, compose_multi_digit, load_background_pool
from .synth import SPLIT_SIZES, build_standin
from .types import ArrayDataset, DatasetSpec

DATA_DIR_ENV = "CROSSGRAFT_DATA_DIR"
STANDIN_ENV = "CROSSGRAFT_STANDIN_DATA"

_BASE_OF = {"mnist_m": "mnist", "fashion_m": "fashion", "m_digits": "mnist"}


def default_data_dir() -> Path:
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "crossgraft"


def _standin_allowed(explicit: bool | None) -> bool:
    if explicit is not None:
        return explicit
    return os.environ.get(STANDIN_ENV, "1") != "0"


def _apply_cap(images: np.ndarray, labels: np.ndarray, cap: int | None):
    if cap is None:
        return images, labels
    return images[:cap], labels[:cap]


def load_base(
    spec: DatasetSpec,
    data_dir: str | Path | None = None,
    *,
    allow_stand_in: bool | None = None,
) -> ArrayDataset:
    """Load a base corpus (mnist / usps / fashion) as an ArrayDataset.

    Real files win when present; missing files raise DataError naming the
    path unless stand-in generation is allowed.
    """
    if spec.name not in ("mnist", "usps", "fashion"):
        raise ConfigError(f"dataset.name: {spec.name!r} is not a base dataset")
    root = Path(data_dir) if data_dir is not None else default_data_dir()
    if real_loaders.real_files_present(spec.name, root):
        images, labels = real_loaders.load_real(spec.name, spec.split, root)
        images, labels = _apply_cap(images, labels, spec.size_cap)
        return ArrayDataset(images, labels, spec, source="real")
    if not _standin_allowed(allow_stand_in):
        # surface the real loader's path error
        real_loaders.load_real(spec.name, spec.split, root)
    images, labels = build_standin(spec.name, spec.split, spec.seed, count=spec.size_cap)
    return ArrayDataset(images, labels, spec, source="stand_in")


def make_blended_domain(base: ArrayDataset, backgrounds: np.ndarray, seed: int) -> ArrayDataset:
    """Blend a grayscale base corpus over background crops (labels preserved)."""
    if backgrounds.size == 0:
        raise ConfigError("backgrounds: empty background pool")
    if base.images.shape[-1] != 1:
        raise ConfigError("make_blended_domain: base images must be grayscale")
    blended = blend_batch(base.images, backgrounds, seed)
    return ArrayDataset(blended, base.labels.copy(), base.spec, source="derived")


def make_m_digits(base: ArrayDataset, seed: int, max_digits: int = 3) -> ArrayDataset:
    """Compose multi-digit images from a digit corpus; central digit labels."""
    n = len(base)
    images = np.empty((n, 28, 28, 1), dtype=np.uint8)
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        images[i], labels[i] = compose_multi_digit(base.images, base.labels, seed, i, max_digits)
    return ArrayDataset(images, labels, base.spec, source="derived")


def _build(spec: DatasetSpec, data_dir: Path, allow_stand_in: bool | None, backgrounds_dir=None) -> ArrayDataset:
    if spec.name in ("mnist", "usps", "fashion"):
        return load_base(spec, data_dir, allow_stand_in=allow_stand_in)
    base_name = _BASE_OF[spec.name]
    base_spec = DatasetSpec(base_name, spec.split, spec.size_cap, spec.seed)
    base = load_base(base_spec, data_dir, allow_stand_in=allow_stand_in)
    if spec.name == "m_digits":
        ds = make_m_digits(base, spec.seed)
    else:
        pool = load_background_pool(spec.seed, backgrounds_dir)
        ds = make_blended_domain(base, pool, spec.seed)
    ds.source = "derived" if base.source == "real" else "stand_in"
    return ArrayDataset(ds.images, ds.labels, spec, source=ds.source)


def load_dataset(
    spec: DatasetSpec,
    data_dir: str | Path | None = None,
    *,
    allow_stand_in: bool | None = None,
    use_cache: bool = True,
    backgrounds_dir: str | Path | None = None,
) -> ArrayDataset:
    """Load any corpus by spec, via the on-disk cache when available."""
    root = Path(data_dir) if data_dir is not None else default_data_dir()
    cache = root / "cache" / spec.cache_key()
    if use_cache and (cache / "data.npz").exists():
        return _read_cache(cache, spec)
    ds = _build(spec, root, allow_stand_in, backgrounds_dir)
    if use_cache:
        write_cache(cache, ds)
    return ds


def write_cache(cache: Path, ds: ArrayDataset) -> None:
    cache.mkdir(parents=True, exist_ok=True)
    tmp = cache / "data.npz.tmp"
    with open(tmp, "wb") as f:
        np.savez_compressed(f, images=ds.images, labels=ds.labels)
    tmp.replace(cache / "data.npz")
    manifest = {
        "name": ds.spec.name,
        "split": ds.spec.split,
        "seed": ds.spec.seed,
        "count": len(ds),
        "sha256": ds.sha256(),
        "source": ds.source,
    }
    (cache / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _read_cache(cache: Path, spec: DatasetSpec) -> ArrayDataset:
    manifest_path = cache / "manifest.json"
    if not manifest_path.exists():
        raise DataError(f"dataset cache missing manifest: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    try:
        with np.load(cache / "data.npz") as z:
            ds = ArrayDataset(z["images"], z["labels"], spec, source=manifest.get("source", "stand_in"))
    except Exception as exc:
        raise DataError(f"dataset cache unreadable: {cache / 'data.npz'}: {exc}") from exc
    if ds.sha256() != manifest["sha256"]:
        raise DataError(f"dataset cache checksum mismatch: {cache / 'data.npz'}")
    return ds


def prepare(spec: DatasetSpec, data_dir: str | Path | None = None, **kw) -> Path:
    """Materialize a corpus into the cache; returns the cache directory."""
    root = Path(data_dir) if data_dir is not None else default_data_dir()
    load_dataset(spec, root, **kw)
    return root / "cache" / spec.cache_key()


def expected_size(name: str, split: str) -> int | None:
    return SPLIT_SIZES.get((name, split))
