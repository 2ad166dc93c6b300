"""Cross-grafted generative stacks.

A decoder of L layers is split at k_high: layers 1..k_high form the high
stack, the remaining L-k_high the low stack (written HxLy with x = k_high).
A grafted decoder chains one donor's high stack with the other donor's low
stack. Grafting never copies parameters: the grafted module holds the same
layer objects as its donors, so a gradient step through a graft mutates the
donor decoders, and splitting is pure bookkeeping.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import torch
import torch.nn as nn

from .autoencoding import LatentCode
from .errors import ConfigError, ContractError
from .networks import DecoderStack

_SPLIT_RE = re.compile(r"^H(\d+)L(\d+)$")


@dataclass(frozen=True)
class StackSplit:
    """High/low boundary for an L-layer decoder; both stacks non-empty."""

    k_high: int
    total: int

    def __post_init__(self):
        if not (1 <= self.k_high <= self.total - 1):
            raise ConfigError(
                f"split: k_high must be in [1, {self.total - 1}] for {self.total} layers, got {self.k_high}"
            )

    @property
    def k_low(self) -> int:
        return self.total - self.k_high

    @classmethod
    def parse(cls, text: str, total: int) -> "StackSplit":
        m = _SPLIT_RE.match(text.strip())
        if not m:
            raise ConfigError(f"split: expected 'HxLy' (e.g. H4L2), got {text!r}")
        high, low = int(m.group(1)), int(m.group(2))
        if high + low != total:
            raise ConfigError(f"split: {text} does not sum to {total} layers")
        return cls(high, total)

    def __str__(self) -> str:
        return f"H{self.k_high}L{self.k_low}"


def split_decoder(decoder: DecoderStack, split: StackSplit) -> tuple[nn.ModuleList, nn.ModuleList]:
    """Partition a decoder's layers into (high_stack, low_stack) views.

    The returned lists reference the decoder's own layer modules; composing
    them reproduces the original decoder exactly.
    """
    if len(decoder) != split.total:
        raise ConfigError(f"split: decoder has {len(decoder)} layers, split expects {split.total}")
    layers = list(decoder.layers)
    return nn.ModuleList(layers[: split.k_high]), nn.ModuleList(layers[split.k_high :])


class GraftedDecoder(nn.Module):
    """High stack from one donor, low stack from the other, by aliasing."""

    def __init__(self, high: nn.ModuleList, low: nn.ModuleList, latent_dim: int):
        super().__init__()
        self.high = high
        self.low = low
        self.latent_dim = latent_dim

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        if z.dim() != 2 or z.shape[1] != self.latent_dim:
            raise ContractError(f"latent dimension mismatch: expected [*, {self.latent_dim}], got {tuple(z.shape)}")
        for layer in self.high:
            z = layer(z)
        for layer in self.low:
            z = layer(z)
        return z


def graft(
    decoders: dict[str, DecoderStack],
    high_from: str,
    low_from: str,
    split: StackSplit,
) -> GraftedDecoder:
    """Assemble a grafted decoder from donor stacks under one split."""
    if high_from not in decoders or low_from not in decoders:
        raise ContractError(f"unknown donor domains: {high_from!r}, {low_from!r}")
    d_high, d_low = decoders[high_from], decoders[low_from]
    if len(d_high) != len(d_low):
        raise ContractError("donor decoders must have identical layer counts")
    high, _ = split_decoder(d_high, split)
    _, low = split_decoder(d_low, split)
    return GraftedDecoder(high, low, d_high.latent_dim)


@dataclass
class TransitionSet:
    """The four transition batches produced by the two grafted decoders.

    Subscript: which domain's latent initiated the image; superscript pair:
    which graft generated it (st = source-high/target-low, ts = reverse).
    """

    x_s_st: torch.Tensor
    x_t_st: torch.Tensor
    x_s_ts: torch.Tensor
    x_t_ts: torch.Tensor

    def pairs(self) -> dict[str, tuple[torch.Tensor, torch.Tensor]]:
        return {"st": (self.x_s_st, self.x_t_st), "ts": (self.x_s_ts, self.x_t_ts)}


def generate_transitions(
    graft_st: GraftedDecoder,
    graft_ts: GraftedDecoder,
    z_s: LatentCode | torch.Tensor,
    z_t: LatentCode | torch.Tensor,
) -> TransitionSet:
    zs = z_s.sample if isinstance(z_s, LatentCode) else z_s
    zt = z_t.sample if isinstance(z_t, LatentCode) else z_t
    return TransitionSet(
        x_s_st=graft_st(zs),
        x_t_st=graft_st(zt),
        x_s_ts=graft_ts(zs),
        x_t_ts=graft_ts(zt),
    )
