import numpy as np
import pytest
import torch
from torch import nn

from floodcast.loss import LossConfig, hybrid_loss
from floodcast.network import (
    BottleneckBlock,
    ChannelAttention,
    DecoderBlock,
    EncoderBlock,
    FloodNet,
    ModelConfig,
    ResNeXtResidual,
    SeaLevelGate,
    SpatialAttention,
    build_model,
    count_params,
    predict_grid,
)

TOY = ModelConfig(
    depth_k=2,
    base_channels=4,
    cardinality_g=2,
    bottleneck_width=2,
    marx_blocks=1,
    see_blocks=1,
    input_n=16,
)


class TestConfig:
    def test_divisibility(self):
        with pytest.raises(ValueError):
            ModelConfig(depth_k=4, input_n=100)

    def test_see_blocks_bounds(self):
        with pytest.raises(ValueError):
            ModelConfig(see_blocks=5, depth_k=4)

    def test_slr_mode_enum(self):
        with pytest.raises(ValueError):
            ModelConfig(slr_mode="everywhere")

    def test_group_channels(self):
        cfg = ModelConfig(cardinality_g=8, bottleneck_width=4)
        assert cfg.group_channels == 32

    def test_roundtrip_dict(self):
        cfg = ModelConfig()
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg


class TestEncoderBlock:
    def test_halves_spatial_dims(self):
        block = EncoderBlock(1, 16)
        out = block(torch.randn(2, 1, 64, 64))
        assert out.shape == (2, 16, 32, 32)

    def test_depth_chain_reaches_bottleneck(self):
        cfg = ModelConfig()
        x = torch.randn(1, 1, 64, 64)
        for block in FloodNet(cfg).encoder_blocks:
            x = block(x)
        assert x.shape[-2:] == (4, 4)  # 64 / 2^4

    def test_odd_dims_rejected(self):
        with pytest.raises(ValueError):
            EncoderBlock(1, 8)(torch.randn(1, 1, 15, 15))

    def test_zero_input_finite_and_reproducible(self):
        torch.manual_seed(0)
        block = EncoderBlock(1, 8)
        a = block(torch.zeros(1, 1, 16, 16))
        b = block(torch.zeros(1, 1, 16, 16))
        assert torch.isfinite(a).all()
        assert torch.equal(a, b)

    def test_must_expand(self):
        with pytest.raises(ValueError):
            EncoderBlock(8, 8)


class TestBottleneckBlock:
    def test_shape_preserved(self):
        torch.manual_seed(0)
        for ch, g in ((8, 2), (16, 4), (32, 8)):
            block = BottleneckBlock(ch, ch // 2, g, 4)
            x = torch.randn(2, ch, 7, 5)
            assert block(x).shape == x.shape

    def test_gates_in_unit_interval(self):
        torch.manual_seed(1)
        ca = ChannelAttention(16, 4)
        sa = SpatialAttention()
        x = torch.randn(3, 16, 8, 8) * 10
        assert ((ca.gate(x) > 0) & (ca.gate(x) < 1)).all()
        assert ((sa.gate(x) > 0) & (sa.gate(x) < 1)).all()

    def test_saturated_gates_reduce_to_pure_residuals(self):
        torch.manual_seed(2)
        block = BottleneckBlock(8, 4, 2, 2)
        with torch.no_grad():
            # force both attention gates to ~1
            block.channel_attn.fc2.weight.zero_()
            block.channel_attn.fc2.bias.fill_(40.0)
            block.spatial_attn.conv.weight.zero_()
            block.spatial_attn.conv.bias.fill_(40.0)
        reference = nn.Sequential()
        ref1 = ResNeXtResidual(8, 4, 2)
        ref2 = ResNeXtResidual(8, 4, 2)
        ref1.load_state_dict(block.res1.state_dict())
        ref2.load_state_dict(block.res2.state_dict())
        x = torch.randn(2, 8, 6, 6)
        assert torch.allclose(block(x), ref2(ref1(x)), atol=1e-5)

    def test_indivisible_groups_rejected(self):
        with pytest.raises(ValueError):
            ResNeXtResidual(8, 6, 4)


class TestSeaLevelGate:
    def test_gate_in_unit_interval(self):
        torch.manual_seed(3)
        gate = SeaLevelGate(4, 16)
        enc = torch.randn(2, 4, 8, 8)
        w = gate.gate(enc, torch.tensor([0.5, 1.5]))
        assert w.shape == (2, 16)
        assert ((w > 0) & (w < 1)).all()

    def test_zero_decoder_stays_zero(self):
        gate = SeaLevelGate(4, 8)
        out = gate(torch.randn(1, 4, 8, 8), torch.zeros(1, 8, 16, 16), torch.tensor([1.0]))
        assert not out.abs().any()

    def test_slr_changes_gate(self):
        torch.manual_seed(4)
        gate = SeaLevelGate(4, 8)
        enc = torch.randn(1, 4, 8, 8)
        w_low = gate.gate(enc, torch.tensor([0.0]))
        w_high = gate.gate(enc, torch.tensor([2.0]))
        assert not torch.allclose(w_low, w_high)

    def test_gate_gradient_wrt_slr_nonzero(self):
        torch.manual_seed(5)
        gate = SeaLevelGate(4, 8)
        enc = torch.randn(1, 4, 8, 8)
        slr = torch.tensor([1.0], requires_grad=True)
        gate.gate(enc, slr).sum().backward()
        assert slr.grad.abs().item() > 0


class TestForward:
    def test_shape_preservation_across_sizes(self):
        model = build_model(ModelConfig(), seed=0)
        for n in (32, 64, 128):
            out = model(torch.randn(1, 1, n, n), torch.tensor([1.0]))
            assert out.shape == (1, 1, n, n)

    def test_output_nonnegative(self):
        model = build_model(ModelConfig(), seed=0)
        out = model(torch.randn(2, 1, 64, 64) * 5, torch.tensor([0.5, 1.5]))
        assert (out >= 0).all()

    def test_indivisible_size_rejected(self):
        model = build_model(ModelConfig(), seed=0)
        with pytest.raises(ValueError):
            model(torch.randn(1, 1, 60, 60), torch.tensor([1.0]))

    def test_slr_sensitivity_default_mode(self):
        model = build_model(TOY, seed=0)
        x = torch.randn(1, 1, 16, 16)
        h = 1e-3
        with torch.no_grad():
            a = model(x, torch.tensor([1.0 - h]))
            b = model(x, torch.tensor([1.0 + h]))
        assert float((b - a).abs().max()) > 0

    @pytest.mark.parametrize("mode", ["bottleneck", "fr", "end"])
    def test_scalar_injection_modes_sensitive(self, mode):
        cfg = ModelConfig(
            depth_k=2, base_channels=4, cardinality_g=2, bottleneck_width=2,
            marx_blocks=1, see_blocks=0, slr_mode=mode, input_n=16,
        )
        model = build_model(cfg, seed=0)
        x = torch.randn(1, 1, 16, 16)
        with torch.no_grad():
            a = model(x, torch.tensor([0.2]))
            b = model(x, torch.tensor([1.8]))
        assert float((b - a).abs().max()) > 0

    def test_stripped_slr_constant(self):
        cfg = ModelConfig(
            depth_k=2, base_channels=4, cardinality_g=2, bottleneck_width=2,
            marx_blocks=1, see_blocks=0, slr_mode="none", input_n=16,
        )
        model = build_model(cfg, seed=0)
        x = torch.randn(1, 1, 16, 16)
        outs = [model(x, torch.tensor([s])) for s in (0.0, 0.5, 1.0, 2.0)]
        for o in outs[1:]:
            assert torch.equal(outs[0], o)

    def test_deterministic_given_seed(self):
        torch.set_num_threads(1)
        x = torch.randn(1, 1, 32, 32)
        a = build_model(ModelConfig(), seed=7)(x, torch.tensor([1.0]))
        b = build_model(ModelConfig(), seed=7)(x, torch.tensor([1.0]))
        assert torch.equal(a, b)

    def test_batch_size_mismatch_rejected(self):
        model = build_model(TOY, seed=0)
        with pytest.raises(ValueError):
            model(torch.randn(2, 1, 16, 16), torch.tensor([1.0]))

    def test_predict_grid_helper(self):
        model = build_model(TOY, seed=0)
        out = predict_grid(model, np.zeros((16, 16), dtype=np.float32), 1.0)
        assert out.shape == (16, 16)


class TestParamCount:
    def test_empty_module(self):
        assert count_params(nn.Module()) == 0

    def test_dense_layer(self):
        assert count_params(nn.Linear(4, 2)) == 10

    def test_default_config_within_lightweight_band(self):
        n = count_params(FloodNet(ModelConfig()))
        assert 1e5 <= n <= 1e6

    def test_default_config_exact_regression(self):
        assert count_params(FloodNet(ModelConfig())) == 254908


class TestGradientCorrectness:
    def test_network_gradients_match_finite_differences(self):
        """float32 autograd vs float64 central differences on >= 100 coords."""
        torch.manual_seed(0)
        model = build_model(TOY, seed=0)
        x = torch.randn(2, 1, 16, 16)
        slr = torch.tensor([0.5, 1.5])
        y = torch.rand(2, 1, 16, 16)
        cfg = LossConfig()

        loss = hybrid_loss(model(x, slr), y, cfg, delta=0.5)
        loss.backward()
        analytic = {
            name: p.grad.detach().clone() for name, p in model.named_parameters()
        }

        twin = build_model(TOY, seed=0).double()
        twin.load_state_dict({k: v.double() for k, v in model.state_dict().items()})
        xd, slrd, yd = x.double(), slr.double(), y.double()

        def loss_at() -> float:
            with torch.no_grad():
                return float(hybrid_loss(twin(xd, slrd), yd, cfg, delta=0.5))

        rng = np.random.default_rng(0)
        params = dict(twin.named_parameters())
        names = sorted(params)
        checked = 0
        h = 1e-5
        rel_errs = []
        while checked < 100:
            name = names[int(rng.integers(len(names)))]
            flat = params[name].data.reshape(-1)
            k = int(rng.integers(flat.numel()))
            ag = float(analytic[name].reshape(-1)[k])
            if abs(ag) < 1e-4:
                continue  # skip near-dead coords where FD noise dominates
            orig = float(flat[k])
            flat[k] = orig + h
            up = loss_at()
            flat[k] = orig - h
            down = loss_at()
            flat[k] = orig
            fd = (up - down) / (2 * h)
            rel_errs.append(abs(fd - ag) / max(abs(fd), abs(ag)))
            checked += 1
        assert max(rel_errs) < 1e-3, f"max rel err {max(rel_errs):.2e}"
