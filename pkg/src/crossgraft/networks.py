"""Network building blocks: encoder towers, decoder layer stacks, residual
generators, discriminators and the classifier trunk.

Decoders are explicit layer lists so they can be split at any boundary and
re-grafted without copying parameters. Stride-2 stages use kernel 4 on even
inputs and kernel 3 on odd ones, which halves the spatial size rounding up
(TF-style 'same' behaviour).
"""
from __future__ import annotations

import torch
import torch.nn as nn

from .config import ArchConfig
from .errors import ContractError


def down_kernel(size: int) -> int:
    return 4 if size % 2 == 0 else 3


def down_out(size: int) -> int:
    return (size + 1) // 2


def conv_down(cin: int, cout: int, size: int, *, norm: bool = True) -> nn.Sequential:
    layers: list[nn.Module] = [nn.Conv2d(cin, cout, down_kernel(size), stride=2, padding=1, bias=not norm)]
    if norm:
        layers.append(nn.BatchNorm2d(cout))
    layers.append(nn.LeakyReLU(0.2, inplace=True))
    return nn.Sequential(*layers)


class LatentProject(nn.Module):
    """Decoder layer 1: latent vector -> [c, h0, h0] feature map."""

    def __init__(self, latent_dim: int, channels: int, h0: int):
        super().__init__()
        self.h0 = h0
        self.channels = channels
        self.fc = nn.Linear(latent_dim, channels * h0 * h0)
        self.bn = nn.BatchNorm2d(channels)
        self.act = nn.ReLU(inplace=True)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        x = self.fc(z).view(z.shape[0], self.channels, self.h0, self.h0)
        return self.act(self.bn(x))


class UpBlock(nn.Module):
    """Transpose-conv stride-2 upsampling layer (exact doubling)."""

    def __init__(self, cin: int, cout: int, *, final: bool = False):
        super().__init__()
        self.conv = nn.ConvTranspose2d(cin, cout, 4, stride=2, padding=1, bias=final)
        self.final = final
        if not final:
            self.bn = nn.BatchNorm2d(cout)
            self.act = nn.ReLU(inplace=True)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.conv(x)
        if self.final:
            return torch.tanh(x)
        return self.act(self.bn(x))


class RefineBlock(nn.Module):
    """Stride-1 conv layer; the final one emits tanh images."""

    def __init__(self, cin: int, cout: int, *, final: bool = False):
        super().__init__()
        self.conv = nn.Conv2d(cin, cout, 3, stride=1, padding=1, bias=final)
        self.final = final
        if not final:
            self.bn = nn.BatchNorm2d(cout)
            self.act = nn.ReLU(inplace=True)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.conv(x)
        if self.final:
            return torch.tanh(x)
        return self.act(self.bn(x))


class DecoderStack(nn.Module):
    """Ordered list of exactly L decoder layers; forward applies them in order."""

    def __init__(self, layers: list[nn.Module], latent_dim: int):
        super().__init__()
        self.layers = nn.ModuleList(layers)
        self.latent_dim = latent_dim

    def __len__(self) -> int:
        return len(self.layers)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        if z.dim() != 2 or z.shape[1] != self.latent_dim:
            raise ContractError(f"latent dimension mismatch: expected [*, {self.latent_dim}], got {tuple(z.shape)}")
        for layer in self.layers:
            z = layer(z)
        return z


def build_decoder(arch: ArchConfig) -> DecoderStack:
    """Assemble an L-layer decoder: projection, stride-2 up-blocks at the
    configured positions, stride-1 refine layers elsewhere, tanh output."""
    widths = list(arch.dec_widths) + [arch.in_channels]
    if arch.dec_up_positions is not None:
        up_at = set(arch.dec_up_positions)
    else:
        up_at = set(range(2, 2 + arch.n_up))
    layers: list[nn.Module] = [LatentProject(arch.latent_dim, widths[0], arch.dec_h0)]
    for i in range(1, arch.dec_layers):
        final = i == arch.dec_layers - 1
        if (i + 1) in up_at:
            layers.append(UpBlock(widths[i - 1], widths[i], final=final))
        else:
            layers.append(RefineBlock(widths[i - 1], widths[i], final=final))
    return DecoderStack(layers, arch.latent_dim)


class SharedEncoderPair(nn.Module):
    """Two conv encoders with per-domain low stacks and one shared high stack.

    The shared stack (top conv layers plus both latent heads) is a single
    module: updates through either domain's path mutate the same storage.
    """

    def __init__(self, arch: ArchConfig):
        super().__init__()
        self.arch = arch
        widths = arch.enc_widths
        n_low = len(widths) - arch.enc_shared

        def tower(start: int, count: int, cin: int, size: int, first_norm: bool):
            blocks = []
            for i in range(start, start + count):
                blocks.append(conv_down(cin, widths[i], size, norm=(i > 0 or first_norm)))
                cin = widths[i]
                size = down_out(size)
            return nn.Sequential(*blocks), size

        self.low_s, mid = tower(0, n_low, arch.in_channels, arch.image_size, first_norm=False)
        self.low_t, _ = tower(0, n_low, arch.in_channels, arch.image_size, first_norm=False)
        self.high, top = tower(n_low, arch.enc_shared, widths[n_low - 1], mid, first_norm=True)
        feat = widths[-1] * top * top
        self.head_mean = nn.Linear(feat, arch.latent_dim)
        self.head_logvar = nn.Linear(feat, arch.latent_dim)

    def forward(self, x: torch.Tensor, domain: str) -> tuple[torch.Tensor, torch.Tensor]:
        if domain not in ("s", "t"):
            raise ContractError(f"domain must be 's' or 't', got {domain!r}")
        expected = (self.arch.in_channels, self.arch.image_size, self.arch.image_size)
        if x.dim() != 4 or tuple(x.shape[1:]) != expected:
            raise ContractError(f"encoder input shape mismatch: expected [*, {expected}], got {tuple(x.shape)}")
        low = self.low_s if domain == "s" else self.low_t
        h = self.high(low(x)).flatten(1)
        return self.head_mean(h), self.head_logvar(h)


class ResidualBlock(nn.Module):
    def __init__(self, width: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(width, width, 3, padding=1, bias=False),
            nn.BatchNorm2d(width),
            nn.ReLU(inplace=True),
            nn.Conv2d(width, width, 3, padding=1, bias=False),
            nn.BatchNorm2d(width),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.body(x)


class ResidualGenerator(nn.Module):
    """Shape-preserving image-to-image generator, identity at initialization.

    The output projection is zero-initialized so the residual branch
    contributes nothing until trained; outputs are clamped to [-1, 1].
    """

    def __init__(self, channels: int, width: int, blocks: int):
        super().__init__()
        self.stem = nn.Sequential(nn.Conv2d(channels, width, 3, padding=1), nn.ReLU(inplace=True))
        self.blocks = nn.Sequential(*[ResidualBlock(width) for _ in range(blocks)])
        self.out = nn.Conv2d(width, channels, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        r = self.out(self.blocks(self.stem(x)))
        return torch.clamp(x + r, -1.0, 1.0)

    def zero_residual_(self) -> None:
        nn.init.zeros_(self.out.weight)
        nn.init.zeros_(self.out.bias)


def trunk_block(in_channels: int, width: int, image_size: int) -> nn.Sequential:
    """First downsampling conv block; shareable between discriminators and classifier."""
    return conv_down(in_channels, width, image_size, norm=False)


class Discriminator(nn.Module):
    """Conv net emitting probability-of-real per sample (sigmoid output).

    Losses are computed from `logits` (stable log-sigmoid forms); `forward`
    exposes the probability contract.
    """

    def __init__(self, arch: ArchConfig, stem: nn.Module):
        super().__init__()
        self.stem = stem
        widths = arch.disc_widths
        size = down_out(arch.image_size)
        blocks = []
        for i in range(1, len(widths)):
            blocks.append(conv_down(widths[i - 1], widths[i], size))
            size = down_out(size)
        self.blocks = nn.Sequential(*blocks)
        self.head = nn.Linear(widths[-1] * size * size, 1)

    def logits(self, x: torch.Tensor) -> torch.Tensor:
        h = self.blocks(self.stem(x)).flatten(1)
        return self.head(h).squeeze(1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.logits(x))


class ClassifierHead(nn.Module):
    """Conv trunk plus linear head -> class logits."""

    def __init__(self, arch: ArchConfig, stem: nn.Module):
        super().__init__()
        self.stem = stem
        widths = arch.cls_widths
        size = down_out(arch.image_size)
        blocks = []
        for i in range(1, len(widths)):
            blocks.append(conv_down(widths[i - 1], widths[i], size))
            size = down_out(size)
        self.blocks = nn.Sequential(*blocks)
        self.head = nn.Linear(widths[-1] * size * size, arch.num_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.blocks(self.stem(x)).flatten(1)
        return self.head(h)


def init_parameters(module: nn.Module, generator: torch.Generator) -> None:
    """DCGAN-style init from a seeded generator (deterministic traversal order)."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            with torch.no_grad():
                m.weight.copy_(torch.randn(m.weight.shape, generator=generator) * 0.02)
                if m.bias is not None:
                    m.bias.zero_()
        elif isinstance(m, (nn.BatchNorm2d, nn.BatchNorm1d)):
            with torch.no_grad():
                m.weight.copy_(1.0 + torch.randn(m.weight.shape, generator=generator) * 0.02)
                m.bias.zero_()
