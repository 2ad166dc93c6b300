import pytest
import torch

from crossgraft.config import ArchConfig
from crossgraft.errors import ConfigError
from crossgraft.grafting import StackSplit, generate_transitions, graft, split_decoder
from crossgraft.model import TransitionModel
from crossgraft.networks import build_decoder
from crossgraft.trainer import make_generator

from conftest import TINY_ARCH


class TestStackSplit:
    def test_parse_h5l1(self):
        s = StackSplit.parse("H5L1", 6)
        assert (s.k_high, s.k_low) == (5, 1)

    def test_parse_rejects_wrong_total(self):
        with pytest.raises(ConfigError):
            StackSplit.parse("H7L1", 6)

    def test_rejects_empty_stack(self):
        with pytest.raises(ConfigError):
            StackSplit(0, 6)
        with pytest.raises(ConfigError):
            StackSplit(6, 6)

    def test_roundtrip_string(self):
        assert str(StackSplit.parse("H4L2", 6)) == "H4L2"

    def test_parse_rejects_garbage(self):
        with pytest.raises(ConfigError):
            StackSplit.parse("5H1L", 6)


def _decoder_pair(arch):
    gen = make_generator(3, "init")
    d_s = build_decoder(arch)
    d_t = build_decoder(arch)
    from crossgraft.networks import init_parameters

    init_parameters(d_s, gen)
    init_parameters(d_t, gen)
    return {"s": d_s, "t": d_t}


FULL_ARCH = ArchConfig(
    latent_dim=16, enc_widths=(8, 16), enc_shared=1,
    dec_layers=6, dec_widths=(32, 16, 8, 8, 8), dec_h0=7,
    gen_width=8, gen_blocks=1, disc_widths=(8, 16), cls_widths=(8, 16),
)


class TestSplitAndGraft:
    def test_split_recompose_identity(self):
        decoders = _decoder_pair(FULL_ARCH)
        dec = decoders["s"].eval()
        z = torch.randn(100, FULL_ARCH.latent_dim, generator=torch.Generator().manual_seed(0))
        for k in range(1, 6):
            high, low = split_decoder(dec, StackSplit(k, 6))
            h = z
            for layer in high:
                h = layer(h)
            for layer in low:
                h = layer(h)
            assert torch.equal(h, dec(z))

    @pytest.mark.parametrize("k", range(1, 6))
    def test_self_graft_identity(self, k):
        decoders = _decoder_pair(FULL_ARCH)
        for d in decoders.values():
            d.eval()
        split = StackSplit(k, 6)
        z = torch.randn(100, FULL_ARCH.latent_dim, generator=torch.Generator().manual_seed(k))
        g_ss = graft(decoders, "s", "s", split).eval()
        g_tt = graft(decoders, "t", "t", split).eval()
        assert float((g_ss(z) - decoders["s"](z)).abs().max()) == 0.0
        assert float((g_tt(z) - decoders["t"](z)).abs().max()) == 0.0

    def test_split_is_bookkeeping_not_computation(self):
        decoders = _decoder_pair(FULL_ARCH)
        for d in decoders.values():
            d.eval()
        z = torch.randn(16, FULL_ARCH.latent_dim, generator=torch.Generator().manual_seed(1))
        outs = [graft(decoders, "s", "t", StackSplit(k, 6)).eval() for k in range(1, 6)]
        # D^{st} under any split index composes the same layer sequence
        reference = outs[0](z)
        for g in outs[1:]:
            assert torch.equal(g(z), reference)

    def test_write_through_aliasing(self):
        decoders = _decoder_pair(FULL_ARCH)
        for d in decoders.values():
            d.eval()
        split = StackSplit(4, 6)
        g_st = graft(decoders, "s", "t", split).eval()  # low layers donated by t
        g_ts = graft(decoders, "t", "s", split).eval()
        z = torch.randn(8, FULL_ARCH.latent_dim, generator=torch.Generator().manual_seed(2))
        before_st, before_ts = g_st(z), g_ts(z)
        with torch.no_grad():
            last_layer = decoders["t"].layers[-1]
            next(iter(last_layer.parameters())).add_(0.1)
        assert not torch.equal(g_st(z), before_st)
        assert torch.equal(g_ts(z), before_ts)

    def test_grafts_own_zero_new_parameters(self, tiny_arch):
        model = TransitionModel(tiny_arch, StackSplit(1, 2), init_generator=make_generator(0, "init"))
        n_model = sum(p.numel() for p in model.parameters())
        extra = [
            graft(model.decoders(), "s", "t", StackSplit(1, 2)),
            graft(model.decoders(), "t", "s", StackSplit(1, 2)),
        ]
        seen = {id(p) for p in model.parameters()}
        for g in extra:
            for p in g.parameters():
                assert id(p) in seen
        assert sum(p.numel() for p in model.parameters()) == n_model


class TestTransitions:
    def test_same_latent_same_output(self, tiny_model, tiny_arch):
        tiny_model.eval()
        z = torch.randn(6, tiny_arch.latent_dim, generator=torch.Generator().manual_seed(5))
        ts = generate_transitions(tiny_model.graft_st, tiny_model.graft_ts, z, z)
        assert torch.equal(ts.x_s_st, ts.x_t_st)
        assert torch.equal(ts.x_s_ts, ts.x_t_ts)

    def test_shapes_and_range(self, tiny_model, tiny_arch):
        z_s = torch.randn(6, tiny_arch.latent_dim, generator=torch.Generator().manual_seed(6))
        z_t = torch.randn(6, tiny_arch.latent_dim, generator=torch.Generator().manual_seed(7))
        ts = generate_transitions(tiny_model.graft_st, tiny_model.graft_ts, z_s, z_t)
        for x in (ts.x_s_st, ts.x_t_st, ts.x_s_ts, ts.x_t_ts):
            assert x.shape == (6, 3, tiny_arch.image_size, tiny_arch.image_size)
            assert float(x.min()) >= -1.0 and float(x.max()) <= 1.0

    def test_latent_mismatch_rejected(self, tiny_model):
        from crossgraft.errors import ContractError

        with pytest.raises(ContractError):
            tiny_model.graft_st(torch.randn(4, 5))


def test_model_rejects_mismatched_split(tiny_arch):
    with pytest.raises(Exception):
        TransitionModel(tiny_arch, StackSplit(3, 4), init_generator=make_generator(0, "init"))
