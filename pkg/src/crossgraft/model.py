"""Composite adaptation model: VAE pair, grafted decoders, adversarial
pairs and task classifier, with the five named parameter groups.

Grafted decoders are kept out of the module registry (plain dict) so every
parameter is registered exactly once; grafts alias donor layers.
"""
from __future__ import annotations

import hashlib

import torch
import torch.nn as nn

from .alignment import AlignedTransitions, align
from .autoencoding import LatentCode, encode
from .config import ArchConfig
from .errors import ContractError
from .grafting import GraftedDecoder, StackSplit, TransitionSet, generate_transitions, graft
from .networks import (
    ClassifierHead,
    DecoderStack,
    Discriminator,
    ResidualGenerator,
    SharedEncoderPair,
    build_decoder,
    init_parameters,
    trunk_block,
)

GROUP_NAMES = ("encoder", "decoder", "generator", "discriminator", "classifier")


class TransitionModel(nn.Module):
    def __init__(self, arch: ArchConfig, split: StackSplit, *, init_generator: torch.Generator | None = None):
        super().__init__()
        if split.total != arch.dec_layers:
            raise ContractError(f"split covers {split.total} layers, decoders have {arch.dec_layers}")
        self.arch = arch
        self.split = split

        self.encoders = SharedEncoderPair(arch)
        self.decoder_s = build_decoder(arch)
        self.decoder_t = build_decoder(arch)
        self.gen_st = ResidualGenerator(arch.in_channels, arch.gen_width, arch.gen_blocks)
        self.gen_ts = ResidualGenerator(arch.in_channels, arch.gen_width, arch.gen_blocks)

        if arch.share_trunk:
            stem = trunk_block(arch.in_channels, arch.cls_widths[0], arch.image_size)
            stem_d1 = stem_d2 = stem_cls = stem
        else:
            stem_d1 = trunk_block(arch.in_channels, arch.disc_widths[0], arch.image_size)
            stem_d2 = trunk_block(arch.in_channels, arch.disc_widths[0], arch.image_size)
            stem_cls = trunk_block(arch.in_channels, arch.cls_widths[0], arch.image_size)
        self.disc_st = Discriminator(arch, stem_d1)
        self.disc_ts = Discriminator(arch, stem_d2)
        self.classifier = ClassifierHead(arch, stem_cls)

        if init_generator is not None:
            init_parameters(self, init_generator)
        self.gen_st.zero_residual_()
        self.gen_ts.zero_residual_()

        self._grafts = {
            "st": graft(self.decoders(), "s", "t", split),
            "ts": graft(self.decoders(), "t", "s", split),
        }
        self._check_groups()

    # -- structure ---------------------------------------------------------

    def decoders(self) -> dict[str, DecoderStack]:
        return {"s": self.decoder_s, "t": self.decoder_t}

    @property
    def graft_st(self) -> GraftedDecoder:
        return self._grafts["st"]

    @property
    def graft_ts(self) -> GraftedDecoder:
        return self._grafts["ts"]

    def param_groups(self) -> dict[str, list[nn.Parameter]]:
        """The five named groups; every trainable parameter in exactly one."""
        groups = {
            "encoder": list(self.encoders.parameters()),
            "decoder": list(self.decoder_s.parameters()) + list(self.decoder_t.parameters()),
            "generator": list(self.gen_st.parameters()) + list(self.gen_ts.parameters()),
            "classifier": list(self.classifier.parameters()),
        }
        claimed = {id(p) for ps in groups.values() for p in ps}
        groups["discriminator"] = [
            p
            for p in list(self.disc_st.parameters()) + list(self.disc_ts.parameters())
            if id(p) not in claimed  # shared trunk stays with the classifier group
        ]
        return groups

    def _check_groups(self) -> None:
        groups = self.param_groups()
        seen: dict[int, str] = {}
        for name, params in groups.items():
            for p in params:
                if id(p) in seen:
                    raise ContractError(f"parameter in two groups: {seen[id(p)]} and {name}")
                seen[id(p)] = name
        missing = [n for n, p in self.named_parameters() if id(p) not in seen]
        if missing:
            raise ContractError(f"parameters outside all groups: {missing[:3]}")

    def group_hashes(self) -> dict[str, str]:
        out = {}
        for name, params in self.param_groups().items():
            h = hashlib.sha256()
            for p in params:
                h.update(p.detach().cpu().numpy().tobytes())
            out[name] = h.hexdigest()
        return out

    # -- forward helpers ----------------------------------------------------

    def encode(self, x: torch.Tensor, domain: str, **kw) -> LatentCode:
        return encode(self.encoders, x, domain, **kw)

    def reconstruct(self, z: LatentCode | torch.Tensor, domain: str) -> torch.Tensor:
        dec = self.decoder_s if domain == "s" else self.decoder_t
        sample = z.sample if isinstance(z, LatentCode) else z
        return dec(sample)

    def transitions(self, z_s, z_t) -> TransitionSet:
        return generate_transitions(self.graft_st, self.graft_ts, z_s, z_t)

    def align(self, transitions: TransitionSet) -> AlignedTransitions:
        return align(self.gen_st, self.gen_ts, transitions)

    @torch.no_grad()
    def infer_transitions(self, x_s: torch.Tensor, x_t: torch.Tensor) -> tuple[TransitionSet, AlignedTransitions]:
        """Deterministic (zero-noise) transition generation for evaluation."""
        z_s = self.encode(x_s, "s", eps=torch.zeros(x_s.shape[0], self.arch.latent_dim))
        z_t = self.encode(x_t, "t", eps=torch.zeros(x_t.shape[0], self.arch.latent_dim))
        ts = self.transitions(z_s, z_t)
        return ts, self.align(ts)
