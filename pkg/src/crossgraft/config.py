"""Run configuration: one flat dotted-key namespace over nested dataclasses.

Precedence (lowest to highest): dataclass defaults < profile < config file
< environment (CROSSGRAFT_SET_<KEY> with '__' for '.') < explicit flags.
Unknown keys are rejected with their full path.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError

MODES = ("datl", "source_only", "target_only", "ablate_content", "ablate_gan", "semi_supervised")
ENV_PREFIX = "CROSSGRAFT_SET_"


@dataclass(frozen=True)
class ArchConfig:
    image_size: int = 28
    in_channels: int = 3
    latent_dim: int = 128
    enc_widths: tuple[int, ...] = (64, 128, 256, 512)
    enc_shared: int = 2  # top conv layers shared between domains; latent heads always shared
    dec_layers: int = 6
    dec_widths: tuple[int, ...] = (256, 128, 64, 64, 32)  # out-channels of layers 1..L-1
    dec_h0: int = 7  # spatial size after the latent projection layer
    dec_up_positions: tuple[int, ...] | None = None  # layer indices (2..L) that upsample; None = right after projection
    gen_width: int = 64
    gen_blocks: int = 6
    disc_widths: tuple[int, ...] = (64, 128, 256)
    cls_widths: tuple[int, ...] = (64, 128, 256)
    num_classes: int = 10
    share_trunk: bool = True

    def __post_init__(self):
        if len(self.dec_widths) != self.dec_layers - 1:
            raise ConfigError(
                f"arch.dec_widths: expected {self.dec_layers - 1} entries for dec_layers={self.dec_layers}, "
                f"got {len(self.dec_widths)}"
            )
        if self.dec_h0 <= 0 or self.image_size % self.dec_h0 != 0:
            raise ConfigError(f"arch.dec_h0: must divide image_size, got {self.dec_h0} for {self.image_size}")
        ratio = self.image_size // self.dec_h0
        if ratio & (ratio - 1) != 0:
            raise ConfigError(f"arch.dec_h0: image_size/dec_h0 must be a power of two, got {ratio}")
        n_up = ratio.bit_length() - 1
        if n_up > self.dec_layers - 1:
            raise ConfigError(f"arch.dec_layers: need at least {n_up + 1} layers to reach {self.image_size}px")
        if self.dec_up_positions is not None:
            pos = self.dec_up_positions
            if len(pos) != n_up:
                raise ConfigError(f"arch.dec_up_positions: expected {n_up} positions, got {len(pos)}")
            if list(pos) != sorted(set(pos)) or (pos and (pos[0] < 2 or pos[-1] > self.dec_layers)):
                raise ConfigError(f"arch.dec_up_positions: must be strictly increasing within [2, {self.dec_layers}]")
        if not (1 <= self.enc_shared <= len(self.enc_widths) - 1):
            raise ConfigError(
                f"arch.enc_shared: must leave at least one per-domain layer, got {self.enc_shared} "
                f"of {len(self.enc_widths)}"
            )
        if self.share_trunk and self.disc_widths[0] != self.cls_widths[0]:
            raise ConfigError(
                f"arch.share_trunk: disc_widths[0]={self.disc_widths[0]} must equal cls_widths[0]="
                f"{self.cls_widths[0]} when the trunk is shared"
            )

    @property
    def n_up(self) -> int:
        return (self.image_size // self.dec_h0).bit_length() - 1


@dataclass(frozen=True)
class HParams:
    lambda_gan: float = 1.0
    lambda_rec: float = 10.0
    lambda_prior: float = 0.01
    lambda_content: float = 1.0
    lr0: float = 2e-4
    lr_decay: float = 0.95
    lr_decay_every: int = 20_000
    batch_size: int = 64
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"hparams.batch_size: must be >= 1, got {self.batch_size}")
        if self.lr0 <= 0:
            raise ConfigError(f"hparams.lr0: must be positive, got {self.lr0}")
        if not (0 < self.lr_decay <= 1):
            raise ConfigError(f"hparams.lr_decay: must be in (0, 1], got {self.lr_decay}")
        if self.lr_decay_every < 1:
            raise ConfigError(f"hparams.lr_decay_every: must be >= 1, got {self.lr_decay_every}")


@dataclass(frozen=True)
class DataConfig:
    dir: str | None = None
    source_cap: int | None = None
    target_cap: int | None = None
    eval_cap: int | None = None
    seed: int = 0
    backgrounds_dir: str | None = None


@dataclass(frozen=True)
class RunConfig:
    source: str = "mnist"
    target: str = "usps"
    mode: str = "datl"
    split: str = "H4L2"
    steps: int = 10_000
    seed: int = 17
    labeled_target_per_class: int | None = None
    checkpoint_every: int = 0  # 0: final checkpoint only
    inner_iters: tuple[int, int, int] = (1, 1, 1)
    real_player: str = "source"
    out_dir: str = "runs/run"
    profile: str = "full"
    data: DataConfig = field(default_factory=DataConfig)
    arch: ArchConfig = field(default_factory=ArchConfig)
    hparams: HParams = field(default_factory=HParams)

    def __post_init__(self):
        from .datasets.types import ALL_NAMES
        from .grafting import StackSplit

        if self.mode not in MODES:
            raise ConfigError(f"mode: unknown mode {self.mode!r}, expected one of {MODES}")
        if self.source not in ALL_NAMES:
            raise ConfigError(f"source: unknown dataset {self.source!r}")
        if self.target not in ALL_NAMES:
            raise ConfigError(f"target: unknown dataset {self.target!r}")
        if self.steps < 0:
            raise ConfigError(f"steps: must be >= 0, got {self.steps}")
        if self.real_player not in ("source", "target"):
            raise ConfigError(f"real_player: expected 'source' or 'target', got {self.real_player!r}")
        if self.labeled_target_per_class is not None:
            if self.mode != "semi_supervised":
                raise ConfigError("labeled_target_per_class: only valid when mode = semi_supervised")
            if self.labeled_target_per_class < 1:
                raise ConfigError("labeled_target_per_class: must be >= 1")
        if self.mode == "semi_supervised" and self.labeled_target_per_class is None:
            raise ConfigError("labeled_target_per_class: required when mode = semi_supervised")
        if len(self.inner_iters) != 3 or any(i < 1 for i in self.inner_iters):
            raise ConfigError(f"inner_iters: three positive integers required, got {self.inner_iters}")
        StackSplit.parse(self.split, self.arch.dec_layers)  # validates

    def stack_split(self):
        from .grafting import StackSplit

        return StackSplit.parse(self.split, self.arch.dec_layers)


PROFILES: dict[str, dict[str, Any]] = {
    "full": {},
    # sized so a 10k-step adaptation run fits a two-core CPU budget
    "desk": {
        "arch.latent_dim": 48,
        "arch.enc_widths": (16, 32, 48, 48),
        "arch.dec_widths": (48, 32, 24, 16, 16),
        "arch.dec_up_positions": (2, 4),
        "arch.gen_width": 16,
        "arch.gen_blocks": 1,
        "arch.disc_widths": (16, 32, 64),
        "arch.cls_widths": (16, 32, 64),
        "hparams.batch_size": 16,
        "data.source_cap": 8_000,
        "data.target_cap": 6_000,
        "data.eval_cap": 2_000,
        "steps": 10_000,
    },
    # smoke-test scale
    "tiny": {
        "arch.latent_dim": 8,
        "arch.enc_widths": (8, 16),
        "arch.enc_shared": 1,
        "arch.dec_layers": 4,
        "arch.dec_widths": (16, 8, 8),
        "arch.gen_width": 8,
        "arch.gen_blocks": 1,
        "arch.disc_widths": (8, 16),
        "arch.cls_widths": (8, 16),
        "hparams.batch_size": 8,
        "data.source_cap": 256,
        "data.target_cap": 256,
        "data.eval_cap": 128,
        "steps": 50,
        "split": "H2L2",
    },
}

_TUPLE_KEYS = {"arch.enc_widths", "arch.dec_widths", "arch.disc_widths", "arch.cls_widths", "inner_iters"}


def _flatten_fields(cls, prefix: str = "") -> dict[str, Any]:
    out = {}
    for f in dataclasses.fields(cls):
        key = f"{prefix}{f.name}"
        if dataclasses.is_dataclass(f.type) or f.name in ("data", "arch", "hparams"):
            sub = {"data": DataConfig, "arch": ArchConfig, "hparams": HParams}[f.name]
            out.update(_flatten_fields(sub, prefix=f"{key}."))
        else:
            out[key] = f
    return out


_SCHEMA = _flatten_fields(RunConfig)


def _coerce(key: str, value: Any) -> Any:
    if isinstance(value, str):
        try:
            value = json.loads(value)
        except (json.JSONDecodeError, ValueError):
            pass  # keep raw string (dataset names, paths, split strings)
    if key in _TUPLE_KEYS and isinstance(value, list):
        value = tuple(value)
    return value


def flatten_dict(nested: dict, prefix: str = "") -> dict[str, Any]:
    flat = {}
    for k, v in nested.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            flat.update(flatten_dict(v, prefix=f"{key}."))
        else:
            flat[key] = v
    return flat


def resolve_config(
    file_values: dict | None = None,
    overrides: dict[str, Any] | None = None,
    profile: str | None = None,
    use_env: bool = True,
) -> RunConfig:
    """Merge defaults, profile, file, environment and flag overrides into a RunConfig."""
    merged: dict[str, Any] = {}

    file_flat = flatten_dict(file_values or {})
    prof_name = profile or file_flat.get("profile") or "full"
    if prof_name not in PROFILES:
        raise ConfigError(f"profile: unknown profile {prof_name!r}, expected one of {tuple(PROFILES)}")
    merged.update(PROFILES[prof_name])
    merged["profile"] = prof_name
    merged.update(file_flat)

    if use_env:
        for name, raw in os.environ.items():
            if name.startswith(ENV_PREFIX):
                key = name[len(ENV_PREFIX) :].lower().replace("__", ".")
                merged[key] = raw
    merged.update(overrides or {})

    values: dict[str, Any] = {}
    for key, value in merged.items():
        if key not in _SCHEMA:
            raise ConfigError(f"{key}: unknown configuration key")
        values[key] = _coerce(key, value)

    def build(cls, prefix: str):
        kwargs = {}
        for f in dataclasses.fields(cls):
            key = f"{prefix}{f.name}"
            if f.name in ("data", "arch", "hparams") and cls is RunConfig:
                sub = {"data": DataConfig, "arch": ArchConfig, "hparams": HParams}[f.name]
                kwargs[f.name] = build(sub, f"{key}.")
            elif key in values:
                kwargs[f.name] = values[key]
        return cls(**kwargs)

    try:
        return build(RunConfig, "")
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config_file(path: str | Path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config: file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON in {p}: {exc}") from exc


def config_to_dict(cfg: RunConfig) -> dict:
    def convert(obj):
        if dataclasses.is_dataclass(obj):
            return {f.name: convert(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        if isinstance(obj, tuple):
            return list(obj)
        return obj

    return convert(cfg)


def config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def write_run_dir(cfg: RunConfig, out_dir: str | Path) -> Path:
    """Persist the resolved config and its hash so the run is self-describing."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {"config": config_to_dict(cfg), "config_hash": config_hash(cfg)}
    (out / "config.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return out
