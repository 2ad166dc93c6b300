import os

import numpy as np
import pytest
import torch

from crossgraft.runtime import configure_torch

configure_torch(1)
torch.manual_seed(0)

from crossgraft.config import ArchConfig, HParams, resolve_config  # noqa: E402
from crossgraft.datasets import ArrayDataset, BatchFeed, DatasetSpec  # noqa: E402
from crossgraft.datasets.synth import build_standin  # noqa: E402
from crossgraft.grafting import StackSplit  # noqa: E402
from crossgraft.model import TransitionModel  # noqa: E402
from crossgraft.trainer import Trainer, derive_seed, make_generator  # noqa: E402


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for key in list(os.environ):
        if key.startswith("CROSSGRAFT_SET_"):
            monkeypatch.delenv(key)


# 4x4 images, 2-dim latent, one-layer stacks: the gradient-check instance.
TINY_ARCH = dict(
    image_size=4,
    in_channels=3,
    latent_dim=2,
    enc_widths=(4, 8),
    enc_shared=1,
    dec_layers=2,
    dec_widths=(8,),
    dec_h0=2,
    gen_width=4,
    gen_blocks=1,
    disc_widths=(4, 8),
    cls_widths=(4, 8),
)


@pytest.fixture
def tiny_arch() -> ArchConfig:
    return ArchConfig(**TINY_ARCH)


@pytest.fixture
def tiny_model(tiny_arch) -> TransitionModel:
    return TransitionModel(tiny_arch, StackSplit(1, 2), init_generator=make_generator(7, "init"))


@pytest.fixture(scope="session")
def standin_data():
    """Small stand-in corpora shared across the suite."""
    out = {}
    for name, split, count in [
        ("mnist", "train", 512), ("mnist", "test", 256),
        ("usps", "train", 512), ("usps", "test", 256),
        ("fashion", "train", 256), ("fashion", "test", 128),
    ]:
        images, labels = build_standin(name, split, seed=0, count=count)
        out[(name, split)] = ArrayDataset(images, labels, DatasetSpec(name, split, count, 0))
    return out


def small_trainer(standin_data, *, steps_cfg=None, seed=17, use_gan=True, mode="datl"):
    overrides = {"steps": 10, "seed": seed, "mode": mode}
    if mode == "semi_supervised":
        overrides["labeled_target_per_class"] = 2
    overrides.update(steps_cfg or {})
    cfg = resolve_config(overrides=overrides, profile="tiny", use_env=False)
    feed_s = BatchFeed(standin_data[("mnist", "train")], cfg.hparams.batch_size,
                       derive_seed(seed, "order-source"), with_labels=True)
    feed_t = BatchFeed(standin_data[("usps", "train")], cfg.hparams.batch_size,
                       derive_seed(seed, "order-target"), with_labels=False)
    return Trainer(cfg, feed_s, feed_t, use_gan=use_gan), cfg


@pytest.fixture
def hp() -> HParams:
    return HParams()


def rand_images(n: int, channels: int = 3, size: int = 28, seed: int = 0) -> torch.Tensor:
    g = torch.Generator().manual_seed(seed)
    return torch.rand((n, channels, size, size), generator=g) * 2 - 1


def seeded_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
