import math

import pytest
import torch
import torch.nn as nn

from crossgraft.alignment import AlignedTransitions, align, content_loss, gan_losses
from crossgraft.grafting import TransitionSet
from crossgraft.networks import ResidualGenerator, init_parameters
from crossgraft.trainer import make_generator

from conftest import rand_images


class ConstantProbDisc(nn.Module):
    """Discriminator stub emitting a fixed probability for every sample."""

    def __init__(self, p: float):
        super().__init__()
        self.p = p

    def forward(self, x):
        return torch.full((x.shape[0],), self.p, dtype=x.dtype)


def _transitions(n=3, size=28):
    return TransitionSet(
        x_s_st=rand_images(n, size=size, seed=1),
        x_t_st=rand_images(n, size=size, seed=2),
        x_s_ts=rand_images(n, size=size, seed=3),
        x_t_ts=rand_images(n, size=size, seed=4),
    )


def _aligned(ts):
    return AlignedTransitions(ts.x_t_st, ts.x_t_ts)


class TestAlign:
    def test_identity_at_initialization(self):
        gen = ResidualGenerator(3, 8, 2)
        init_parameters(gen, make_generator(1, "init"))
        gen.zero_residual_()
        ts = _transitions()
        out = align(gen, gen, ts)
        assert torch.equal(out.x_t_st_aligned, ts.x_t_st)
        assert torch.equal(out.x_t_ts_aligned, ts.x_t_ts)

    def test_output_range_after_training_pressure(self):
        gen = ResidualGenerator(3, 8, 2)
        init_parameters(gen, make_generator(2, "init"))
        with torch.no_grad():  # push the residual branch hard
            gen.out.weight.add_(1.0)
            gen.out.bias.add_(3.0)
        with torch.no_grad():
            out = gen(rand_images(4, seed=5))
        assert float(out.min()) >= -1.0 and float(out.max()) <= 1.0

    def test_no_label_field(self):
        assert set(AlignedTransitions.__dataclass_fields__) == {"x_t_st_aligned", "x_t_ts_aligned"}


class TestGanLosses:
    def test_value_at_half(self):
        """Both probabilities 0.5: per-channel value is 2 ln(1/2)."""
        ts = _transitions()
        g = gan_losses(ConstantProbDisc(0.5), ConstantProbDisc(0.5), ts, _aligned(ts), lambda_gan=1.0)
        per_channel = 2 * math.log(0.5)
        assert float(g.adversarial_value) == pytest.approx(2 * per_channel, abs=1e-4)
        assert float(g.adversarial_value) / 2 == pytest.approx(-1.3863, abs=1e-4)
        assert float(g.loss_d1) == pytest.approx(-per_channel, abs=1e-4)

    def test_perfect_discriminator_value_near_zero(self):
        ts = _transitions()

        # the reference op calls disc on real then fake, per channel
        class RealFake(nn.Module):
            def __init__(self):
                super().__init__()
                self.calls = 0

            def forward(self, x):
                self.calls += 1
                p = 1.0 - 1e-7 if self.calls % 2 == 1 else 1e-7
                return torch.full((x.shape[0],), p)

        g = gan_losses(RealFake(), RealFake(), ts, _aligned(ts), lambda_gan=1.0)
        assert float(g.adversarial_value) == pytest.approx(0.0, abs=1e-4)

    def test_lambda_scales_value_only(self):
        ts = _transitions()
        g1 = gan_losses(ConstantProbDisc(0.5), ConstantProbDisc(0.5), ts, _aligned(ts), lambda_gan=1.0)
        g2 = gan_losses(ConstantProbDisc(0.5), ConstantProbDisc(0.5), ts, _aligned(ts), lambda_gan=3.0)
        assert float(g2.adversarial_value) == pytest.approx(3 * float(g1.adversarial_value), rel=1e-6)
        assert float(g2.loss_g1) == pytest.approx(float(g1.loss_g1), rel=1e-6)

    def test_default_lambda_is_plain_sum(self):
        ts = _transitions()
        g = gan_losses(ConstantProbDisc(0.3), ConstantProbDisc(0.3), ts, _aligned(ts), lambda_gan=1.0)
        per = math.log(0.3) + math.log(0.7)
        assert float(g.adversarial_value) == pytest.approx(2 * per, abs=1e-5)

    def test_nonsaturating_gradient_when_rejected(self):
        """Two-pixel toy: confident rejection still drives the generator."""
        from crossgraft.config import ArchConfig
        from crossgraft.networks import Discriminator, trunk_block

        arch = ArchConfig(
            image_size=2, in_channels=1, latent_dim=2, enc_widths=(2, 2), enc_shared=1,
            dec_layers=2, dec_widths=(2,), dec_h0=1, gen_width=2, gen_blocks=1,
            disc_widths=(2,), cls_widths=(2,),
        )
        disc = Discriminator(arch, trunk_block(1, 2, 2))
        init_parameters(disc, make_generator(4, "init"))
        with torch.no_grad():
            disc.head.bias.fill_(-12.0)  # rejects everything: D(fake) ~ 6e-6
        gen = ResidualGenerator(1, 2, 1)
        init_parameters(gen, make_generator(5, "init"))
        gen.zero_residual_()
        x = torch.rand(4, 1, 2, 2) * 2 - 1
        fake = gen(x)
        p = disc(fake)
        assert float(p.max()) < 1e-4
        loss_g = -torch.log(p.clamp(1e-7, 1 - 1e-7)).mean()
        grads = torch.autograd.grad(loss_g, list(gen.parameters()), allow_unused=True)
        total = sum(float(g.abs().sum()) for g in grads if g is not None)
        assert total > 0.0


class TestContentLoss:
    def test_identical_pairs_zero(self):
        x = rand_images(2, seed=9)
        ts = TransitionSet(x, x.clone(), x, x.clone())
        assert float(content_loss(ts, 1.0)) == 0.0

    def test_single_pixel_analytic(self):
        a = torch.zeros(1, 3, 28, 28)
        b = torch.zeros(1, 3, 28, 28)
        b[0, 0, 5, 5] = 0.5
        ts = TransitionSet(a, b, a.clone(), a.clone())
        expected = 0.25 / (3 * 28 * 28)
        assert float(content_loss(ts, 1.0)) == pytest.approx(expected, abs=1e-9)
        assert expected == pytest.approx(1.0629e-4, abs=1e-8)

    def test_lambda_linearity(self):
        ts = _transitions()
        base = float(content_loss(ts, 1.0))
        assert float(content_loss(ts, 2.5)) == pytest.approx(2.5 * base, rel=1e-6)
