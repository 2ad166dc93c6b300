"""Adversarial alignment of target-initiated transitions onto the
source-initiated transition distributions, plus the content regularizer.

Two independent generator/discriminator pairs serve the two graft channels.
Discriminator probabilities are clamped to [eps, 1-eps] before logs.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch

from .errors import ContractError
from .grafting import TransitionSet
from .networks import Discriminator, ResidualGenerator

PROB_EPS = 1e-7


@dataclass
class AlignedTransitions:
    """Generator outputs for the two target-initiated transitions.

    Deliberately label-free: alignment only ever sees images.
    """

    x_t_st_aligned: torch.Tensor
    x_t_ts_aligned: torch.Tensor


def align(gen_st: ResidualGenerator, gen_ts: ResidualGenerator, transitions: TransitionSet) -> AlignedTransitions:
    return AlignedTransitions(
        x_t_st_aligned=gen_st(transitions.x_t_st),
        x_t_ts_aligned=gen_ts(transitions.x_t_ts),
    )


def _logp(p: torch.Tensor) -> torch.Tensor:
    return torch.log(p.clamp(PROB_EPS, 1.0 - PROB_EPS))


@dataclass
class GanLosses:
    """Per-channel adversarial losses.

    loss_d*: discriminator minimization objectives (negated value function).
    loss_g*: non-saturating generator surrogates (-E log D(fake)).
    adversarial_value: lambda_gan * (v_st + v_ts) where each v is the value
    function E[log D(real)] + E[log(1 - D(fake))] in maximization form.
    """

    loss_d1: torch.Tensor
    loss_d2: torch.Tensor
    loss_g1: torch.Tensor
    loss_g2: torch.Tensor
    adversarial_value: torch.Tensor


def _channel_losses(disc: Discriminator, real: torch.Tensor, fake: torch.Tensor):
    p_real = disc(real)
    p_fake = disc(fake)
    value = _logp(p_real).mean() + _logp(1.0 - p_fake).mean()
    loss_d = -value
    loss_g = -_logp(p_fake).mean()
    return loss_d, loss_g, value


def gan_losses(
    disc_st: Discriminator,
    disc_ts: Discriminator,
    transitions: TransitionSet,
    aligned: AlignedTransitions,
    lambda_gan: float,
    real_player: str = "source",
) -> GanLosses:
    """Adversarial objectives for both channels.

    By default the source-initiated transitions play 'real' and the aligned
    target-initiated ones play 'fake'; real_player='target' swaps the roles.
    """
    if real_player not in ("source", "target"):
        raise ContractError(f"real_player must be 'source' or 'target', got {real_player!r}")
    pairs = {
        "st": (transitions.x_s_st, aligned.x_t_st_aligned),
        "ts": (transitions.x_s_ts, aligned.x_t_ts_aligned),
    }
    if real_player == "target":
        pairs = {k: (fake, real) for k, (real, fake) in pairs.items()}
    loss_d1, loss_g1, v_st = _channel_losses(disc_st, *pairs["st"])
    loss_d2, loss_g2, v_ts = _channel_losses(disc_ts, *pairs["ts"])
    return GanLosses(loss_d1, loss_d2, loss_g1, loss_g2, lambda_gan * (v_st + v_ts))


def content_loss(transitions: TransitionSet, lambda_content: float) -> torch.Tensor:
    """Mean-squared tie between same-channel transitions, weighted:

        lambda_content * (mean_sq(x_s_st - x_t_st) + mean_sq(x_s_ts - x_t_ts))
    """
    sq_st = (transitions.x_s_st - transitions.x_t_st).pow(2).mean()
    sq_ts = (transitions.x_s_ts - transitions.x_t_ts).pow(2).mean()
    return lambda_content * (sq_st + sq_ts)
