import math

import numpy as np
import pytest
import torch
from torch import nn

from floodcast.core import ProtectionScenario, Sample
from floodcast.loss import LossConfig
from floodcast.network import ModelConfig, build_model
from floodcast.synthgen import SynthConfig, generate
from floodcast.training import (
    CurriculumConfig,
    EnsembleConfig,
    TrainConfig,
    TrainingDiverged,
    finetune,
    grad_cam,
    load_checkpoint,
    predict_with_uncertainty,
    save_checkpoint,
    train,
    train_ensemble,
)

TOY_MODEL = ModelConfig(
    depth_k=2, base_channels=4, cardinality_g=2, bottleneck_width=2,
    marx_blocks=1, see_blocks=1, input_n=16,
)
SYNTH16 = SynthConfig(n=16, k_olus=2, decay_cells=4.0)


def synth_samples(count, slr=1.0, n_cfg=SYNTH16):
    rng = np.random.default_rng(0)
    out = []
    seen = set()
    while len(out) < count:
        bits = tuple(int(b) for b in rng.integers(0, 2, n_cfg.k_olus))
        if bits in seen and len(seen) < 2**n_cfg.k_olus:
            continue
        seen.add(bits)
        out.append(generate(ProtectionScenario(bits=bits, slr_m=slr), n_cfg))
    return out


class TestAdamStep:
    def test_single_step_matches_update_formula(self):
        lr, b1, b2, eps = 1e-3, 0.9, 0.999, 1e-8
        theta0, grad = 0.7, 0.3
        p = torch.tensor([theta0], dtype=torch.float64, requires_grad=True)
        opt = torch.optim.Adam([p], lr=lr, betas=(b1, b2), eps=eps)
        (p * grad).sum().backward()
        opt.step()
        m = (1 - b1) * grad
        v = (1 - b2) * grad**2
        m_hat = m / (1 - b1)
        v_hat = v / (1 - b2)
        expected = theta0 - lr * m_hat / (math.sqrt(v_hat) + eps)
        assert float(p.detach()) == pytest.approx(expected, abs=1e-12)

    def test_multi_step_matches_formula(self):
        lr, b1, b2, eps = 1e-2, 0.9, 0.999, 1e-8
        p = torch.tensor([1.5], dtype=torch.float64, requires_grad=True)
        opt = torch.optim.Adam([p], lr=lr, betas=(b1, b2), eps=eps)
        theta, m, v = 1.5, 0.0, 0.0
        for step in range(1, 6):
            opt.zero_grad()
            (0.5 * p**2).sum().backward()  # grad = theta
            g = theta
            opt.step()
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g**2
            theta = theta - lr * (m / (1 - b1**step)) / (math.sqrt(v / (1 - b2**step)) + eps)
            assert float(p.detach()) == pytest.approx(theta, abs=1e-12)


class TestTrain:
    def test_zero_lr_leaves_params_unchanged(self):
        samples = synth_samples(2)
        cfg = TrainConfig(epochs=3, batch_size=2, lr=0.0, seed=0)
        model, _ = train(samples, None, TOY_MODEL, LossConfig(), cfg)
        fresh = build_model(TOY_MODEL, seed=0)
        for (_, a), (_, b) in zip(model.state_dict().items(), fresh.state_dict().items()):
            assert torch.equal(a, b)

    def test_same_seed_identical_runs(self):
        torch.set_num_threads(1)
        samples = synth_samples(4)
        cfg = TrainConfig(epochs=3, batch_size=2, lr=1e-3, seed=11)
        m1, h1 = train(samples[:3], samples[3:], TOY_MODEL, LossConfig(), cfg)
        m2, h2 = train(samples[:3], samples[3:], TOY_MODEL, LossConfig(), cfg)
        losses1 = [(r["train_loss"], r["val_loss"], r["delta"]) for r in h1]
        losses2 = [(r["train_loss"], r["val_loss"], r["delta"]) for r in h2]
        assert losses1 == losses2
        for (_, a), (_, b) in zip(m1.state_dict().items(), m2.state_dict().items()):
            assert torch.equal(a, b)

    def test_loss_decreases_on_tiny_overfit(self):
        samples = synth_samples(2)
        cfg = TrainConfig(epochs=40, batch_size=2, lr=3e-3, seed=0)
        _, history = train(samples, None, TOY_MODEL, LossConfig(), cfg)
        assert history[-1]["train_loss"] < history[0]["train_loss"]

    def test_early_stopping_returns_best_checkpoint(self):
        samples = synth_samples(6)
        cfg = TrainConfig(epochs=30, batch_size=2, lr=5e-3, seed=1, early_stop_patience=3)
        model, history = train(samples[:4], samples[4:], TOY_MODEL, LossConfig(), cfg)
        val_losses = [h["val_loss"] for h in history]
        from floodcast.training import _eval_loss, _to_tensors

        xv, sv, yv = _to_tensors(samples[4:])
        returned = _eval_loss(model, xv, sv, yv, LossConfig(), 2)
        assert returned == pytest.approx(min(val_losses), abs=1e-6)

    def test_divergence_diagnostics(self):
        samples = synth_samples(2)
        samples[0] = Sample(
            input_grid=samples[0].input_grid,
            slr_m=float("nan"),
            output_grid=samples[0].output_grid,
            scenario_id="nan",
        )
        cfg = TrainConfig(epochs=2, batch_size=2, lr=1e-3, seed=0)
        with pytest.raises(TrainingDiverged) as err:
            train(samples, None, TOY_MODEL, LossConfig(), cfg)
        assert err.value.epoch == 0
        assert "delta" in err.value.parts

    def test_empty_training_split(self):
        with pytest.raises(ValueError):
            train([], None, TOY_MODEL, LossConfig(), TrainConfig(epochs=1))


class TestCurriculum:
    def test_linear_schedule_endpoints(self):
        cfg = CurriculumConfig(start_new_frac=0.3, end_new_frac=0.7)
        assert cfg.new_fraction(0, 100) == pytest.approx(0.3)
        assert cfg.new_fraction(99, 100) == pytest.approx(0.7)

    def test_three_epoch_schedule(self):
        cfg = CurriculumConfig()
        assert [cfg.new_fraction(e, 3) for e in range(3)] == pytest.approx([0.3, 0.5, 0.7])

    def test_single_epoch_uses_start(self):
        assert CurriculumConfig().new_fraction(0, 1) == pytest.approx(0.3)

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            CurriculumConfig(start_new_frac=0.8, end_new_frac=0.2)

    def test_batch_composition_matches_schedule_within_3_sigma(self):
        new = synth_samples(8, slr=1.5)
        old = synth_samples(8, slr=0.5)
        model = build_model(TOY_MODEL, seed=0)
        cfg = TrainConfig(epochs=4, batch_size=4, lr=1e-4, seed=3)
        _, history = finetune(model, new, old, None, CurriculumConfig(), cfg)
        slots_per_epoch = 4 * math.ceil((len(new) + len(old)) / 4)
        for rec in history:
            f = rec["new_fraction_target"]
            sigma = math.sqrt(f * (1 - f) / slots_per_epoch)
            assert abs(rec["new_fraction_drawn"] - f) <= 3 * sigma + 1e-9

    def test_finetune_requires_pools(self):
        model = build_model(TOY_MODEL, seed=0)
        with pytest.raises(ValueError):
            finetune(model, [], synth_samples(2), None, CurriculumConfig(), TrainConfig(epochs=1))
        with pytest.raises(ValueError):
            finetune(model, synth_samples(2), [], None, CurriculumConfig(), TrainConfig(epochs=1))


class TestEnsemble:
    def test_config_guards(self):
        with pytest.raises(ValueError):
            EnsembleConfig(members=1, seeds=(0,))
        with pytest.raises(ValueError):
            EnsembleConfig(members=3, seeds=(0, 1, 1))
        with pytest.raises(ValueError):
            EnsembleConfig(members=3, seeds=(0, 1))

    def test_members_are_distinct_models(self):
        samples = synth_samples(4)
        cfg = TrainConfig(epochs=2, batch_size=2, lr=1e-3, seed=0)
        members = train_ensemble(
            samples[:3], samples[3:], TOY_MODEL, LossConfig(), cfg,
            EnsembleConfig(members=2, seeds=(0, 1)),
        )
        assert len(members) == 2
        a = members[0].state_dict()
        b = members[1].state_dict()
        assert any(not torch.equal(a[k], b[k]) for k in a)

    def test_member_checkpoints_written(self, tmp_path):
        samples = synth_samples(4)
        cfg = TrainConfig(epochs=1, batch_size=2, lr=1e-3, seed=0, checkpoint_dir=str(tmp_path))
        train_ensemble(
            samples[:3], samples[3:], TOY_MODEL, LossConfig(), cfg,
            EnsembleConfig(members=2, seeds=(5, 6)),
        )
        assert (tmp_path / "member_5" / "params.ftc").exists()
        assert (tmp_path / "member_6" / "params.ftc").exists()


class _ConstantModel(nn.Module):
    def __init__(self, value):
        super().__init__()
        self.value = value

    def forward(self, x, slr):
        return torch.full((x.shape[0], 1, x.shape[2], x.shape[3]), self.value)


class TestUncertainty:
    def test_identical_members_zero_std(self):
        models = [_ConstantModel(0.8), _ConstantModel(0.8)]
        _, std = predict_with_uncertainty(models, np.zeros((8, 8)), 1.0)
        assert not std.any()

    def test_offset_members_half_std(self):
        models = [_ConstantModel(1.0), _ConstantModel(2.0)]
        mean, std = predict_with_uncertainty(models, np.zeros((8, 8)), 1.0)
        assert np.allclose(mean, 1.5)
        assert np.allclose(std, 0.5)  # population sigma of {a, a+1}

    def test_needs_two_members(self):
        with pytest.raises(ValueError):
            predict_with_uncertainty([_ConstantModel(1.0)], np.zeros((4, 4)), 1.0)

    def test_ensemble_mean_of_identical_members_is_member(self):
        model = build_model(TOY_MODEL, seed=0)
        x = np.random.default_rng(0).standard_normal((16, 16)).astype(np.float32)
        mean, std = predict_with_uncertainty([model, model], x, 1.0)
        with torch.no_grad():
            single = model(torch.from_numpy(x)[None, None], torch.tensor([1.0]))[0, 0].numpy()
        assert np.array_equal(mean, single)
        assert not std.any()


class TestGradCam:
    def test_constant_zero_model_gives_zero_map(self):
        model = build_model(TOY_MODEL, seed=0)
        with torch.no_grad():
            model.out_conv.weight.zero_()
            model.out_conv.bias.zero_()
            model.slr_end_fc.weight.zero_()
            model.slr_end_fc.bias.zero_()
        heat = grad_cam(model, np.ones((16, 16), dtype=np.float32), 1.0)
        assert not heat.any()

    def test_range_and_shape(self):
        model = build_model(TOY_MODEL, seed=0)
        sample = generate(ProtectionScenario(bits=(0, 1), slr_m=1.0), SYNTH16)
        heat = grad_cam(model, sample.input_grid, sample.slr_m)
        assert heat.shape == (16, 16)
        assert heat.min() >= 0.0 and heat.max() <= 1.0

    def test_named_layer_selection(self):
        model = build_model(TOY_MODEL, seed=0)
        sample = generate(ProtectionScenario(bits=(0, 1), slr_m=1.0), SYNTH16)
        heat = grad_cam(model, sample.input_grid, sample.slr_m, target_layer="decoder_blocks.0")
        assert heat.shape == (16, 16)

    def test_unknown_layer_rejected(self):
        model = build_model(TOY_MODEL, seed=0)
        with pytest.raises(ValueError):
            grad_cam(model, np.zeros((16, 16)), 1.0, target_layer="nope.layer")


class TestCheckpoint:
    def test_roundtrip_bit_exact(self, tmp_path):
        samples = synth_samples(2)
        cfg = TrainConfig(epochs=2, batch_size=2, lr=1e-3, seed=0, checkpoint_dir=str(tmp_path))
        model, history = train(samples, None, TOY_MODEL, LossConfig(), cfg)
        loaded = load_checkpoint(tmp_path)
        for (_, a), (_, b) in zip(model.state_dict().items(), loaded.state_dict().items()):
            assert torch.equal(a, b)
        x = torch.from_numpy(samples[0].input_grid)[None, None]
        with torch.no_grad():
            assert torch.equal(
                model(x, torch.tensor([1.0])), loaded(x, torch.tensor([1.0]))
            )
        assert (tmp_path / "history.csv").exists()
        assert (tmp_path / "log.jsonl").exists()

    def test_missing_checkpoint_clear_error(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_checkpoint(tmp_path / "absent")

    def test_save_without_history(self, tmp_path):
        model = build_model(TOY_MODEL, seed=0)
        save_checkpoint(tmp_path, model)
        loaded = load_checkpoint(tmp_path)
        assert loaded.cfg == model.cfg
