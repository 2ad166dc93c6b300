"""Within-domain variational autoencoding: latent codes, reconstruction and
the VAE objective (weighted reconstruction + prior divergence).
"""
from __future__ import annotations

from dataclasses import dataclass

import torch

from .config import HParams
from .errors import ContractError
from .networks import DecoderStack, SharedEncoderPair


@dataclass
class LatentCode:
    """Variational posterior parameters and the reparameterized draw.

    sample = mean + exp(logvar / 2) * eps, with eps recorded.
    """

    mean: torch.Tensor
    logvar: torch.Tensor
    sample: torch.Tensor
    eps: torch.Tensor


def reparameterize(mean: torch.Tensor, logvar: torch.Tensor, eps: torch.Tensor) -> torch.Tensor:
    return mean + torch.exp(0.5 * logvar) * eps


def encode(
    encoders: SharedEncoderPair,
    x: torch.Tensor,
    domain: str,
    *,
    generator: torch.Generator | None = None,
    eps: torch.Tensor | None = None,
) -> LatentCode:
    """Encode a batch into a LatentCode.

    Noise comes from `eps` when given (0 for a deterministic pass), else it
    is drawn from `generator` (the run's seeded noise stream).
    """
    with torch.no_grad():
        if float(x.min()) < -1.0 - 1e-5 or float(x.max()) > 1.0 + 1e-5:
            raise ContractError("encoder input outside [-1, 1]")
    mean, logvar = encoders(x, domain)
    if not torch.isfinite(mean).all() or not torch.isfinite(logvar).all():
        raise ContractError("encoder produced non-finite posterior parameters")
    if eps is None:
        eps = torch.randn(mean.shape, generator=generator, dtype=mean.dtype)
    elif eps.shape != mean.shape:
        raise ContractError(f"eps shape {tuple(eps.shape)} != posterior shape {tuple(mean.shape)}")
    return LatentCode(mean, logvar, reparameterize(mean, logvar, eps), eps)


def decode_within(decoder: DecoderStack, z: LatentCode | torch.Tensor) -> torch.Tensor:
    sample = z.sample if isinstance(z, LatentCode) else z
    return decoder(sample)


def kld(mean: torch.Tensor, logvar: torch.Tensor) -> torch.Tensor:
    """KL divergence N(mean, diag exp(logvar)) || N(0, I), summed over
    dimensions and averaged over the batch:

        0.5 * sum(mean^2 + exp(logvar) - logvar - 1)
    """
    if mean.dim() == 1:
        mean, logvar = mean[None, :], logvar[None, :]
    per_sample = 0.5 * (mean.pow(2) + logvar.exp() - logvar - 1.0).sum(dim=1)
    return per_sample.mean()


def reconstruction_error(x: torch.Tensor, x_hat: torch.Tensor) -> torch.Tensor:
    """Unit-variance Gaussian likelihood up to constants: 0.5 * per-pixel MSE."""
    return 0.5 * (x - x_hat).pow(2).mean()


def vae_loss(
    encoders: SharedEncoderPair,
    decoder_s: DecoderStack,
    decoder_t: DecoderStack,
    x_s: torch.Tensor,
    x_t: torch.Tensor,
    hp: HParams,
    *,
    generator: torch.Generator | None = None,
    eps_s: torch.Tensor | None = None,
    eps_t: torch.Tensor | None = None,
) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
    """Within-domain VAE objective for both domains.

    Returns (lambda_rec * rec + lambda_prior * prior, components); the
    components recombine to the total exactly.
    """
    z_s = encode(encoders, x_s, "s", generator=generator, eps=eps_s)
    z_t = encode(encoders, x_t, "t", generator=generator, eps=eps_t)
    rec = reconstruction_error(x_s, decoder_s(z_s.sample)) + reconstruction_error(x_t, decoder_t(z_t.sample))
    prior = kld(z_s.mean, z_s.logvar) + kld(z_t.mean, z_t.logvar)
    total = hp.lambda_rec * rec + hp.lambda_prior * prior
    return total, {"rec": rec, "prior": prior, "latent_s": z_s, "latent_t": z_t}
