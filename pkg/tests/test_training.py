import math

import numpy as np
import pytest
import torch

from fastnet_dehazing.data.records import HazeSample
from fastnet_dehazing.data.scenes import generate_scene
from fastnet_dehazing.data.synthesis import synthesize_sample
from fastnet_dehazing.errors import MissingTargetError, NonFiniteValueError, TrainingDivergedError
from fastnet_dehazing.losses.losses import LOSS_COMBINATIONS, LossSpec
from fastnet_dehazing.metrics.quality import psnr
from fastnet_dehazing.models.builder import build_preset
from fastnet_dehazing.training import trainer as trainer_module
from fastnet_dehazing.training.batching import augment_sample, collate, require_truths
from fastnet_dehazing.training.config import AugmentConfig, TrainConfig
from fastnet_dehazing.training.optimizer import adam_step, init_adam_state
from fastnet_dehazing.training.trainer import (
    EarlyStopping,
    Trainer,
    TrainHistory,
    fine_tune,
    train,
    train_combination,
)


@pytest.fixture
def tiny_set():
    samples = []
    for seed in (21, 22):
        clean, depth = generate_scene(64, 64, seed)
        samples.append(synthesize_sample(clean, depth, A=0.7, beta=1.5, scene=f"s{seed}"))
    return samples


def _params_snapshot(model):
    return {name: t.detach().clone() for name, t in model.state_dict().items()}


class TestAdam:
    def test_first_step_moves_by_lr_times_sign(self):
        cfg = TrainConfig(lr=0.01)
        for g in (3.0, -1.0, 250.0):
            theta = torch.tensor([0.5], dtype=torch.float64)
            state = init_adam_state([theta])
            adam_step([theta], [torch.tensor([g], dtype=torch.float64)], state, cfg)
            assert float(theta - 0.5) == pytest.approx(-0.01 * math.copysign(1.0, g), rel=1e-7)

    def test_zero_gradient_never_moves(self):
        cfg = TrainConfig()
        theta = torch.tensor([0.3, -0.2], dtype=torch.float64)
        state = init_adam_state([theta])
        for _ in range(20):
            adam_step([theta], [torch.zeros(2, dtype=torch.float64)], state, cfg)
        assert torch.equal(theta, torch.tensor([0.3, -0.2], dtype=torch.float64))

    def test_scalar_trace(self):
        cfg = TrainConfig(lr=0.1)
        theta = torch.tensor([1.0], dtype=torch.float64)
        state = init_adam_state([theta])

        # Reference trace for f(x) = x^2 / 2
        x, m, v = 1.0, 0.0, 0.0
        b1, b2, eps, lr = 0.9, 0.999, 1e-8, 0.1
        for step in range(1, 11):
            g = x
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            x -= lr * (m / (1 - b1 ** step)) / (math.sqrt(v / (1 - b2 ** step)) + eps)
            adam_step([theta], [theta.clone()], state, cfg)
            assert float(theta) == pytest.approx(x, abs=1e-10)
        assert state.step == 10

    def test_non_finite_gradient_leaves_params(self):
        cfg = TrainConfig()
        a = torch.tensor([1.0], dtype=torch.float64)
        b = torch.tensor([2.0], dtype=torch.float64)
        state = init_adam_state([a, b])
        with pytest.raises(NonFiniteValueError):
            adam_step([a, b], [torch.tensor([1.0]).double(), torch.tensor([math.nan]).double()], state, cfg)
        assert float(a) == 1.0 and float(b) == 2.0
        assert state.step == 0


class TestEarlyStopping:
    def test_counter(self):
        stopper = EarlyStopping(patience=2)
        assert stopper.update(1.0)
        assert not stopper.update(1.0)
        assert not stopper.should_stop
        assert not stopper.update(1.5)
        assert stopper.should_stop

    def test_stops_at_epoch_four(self, monkeypatch, tiny_set):
        monkeypatch.setattr(Trainer, "evaluate", lambda self, *args, **kwargs: (1.0, 20.0, 0.5))
        cfg = TrainConfig(early_stop_patience=3, max_epochs=20)
        _, history = train(build_preset("toy_fastnet", seed=0), tiny_set, tiny_set, cfg)
        assert history.epochs_run == 4
        assert history.stop_reason == "early_stop"
        assert [r.saved_best_loss for r in history.records] == [True, False, False, False]


class TestBatching:
    def test_collate(self, tiny_set):
        batch = collate(tiny_set)
        assert batch["hazy"].shape == (2, 3, 64, 64)
        assert batch["transmission"].shape == (2, 1, 64, 64)
        assert batch["airlight"].shape == (2, 3, 64, 64)

    def test_collate_without_truths(self, tiny_set):
        bare = [HazeSample(hazy=s.hazy, clean=s.clean) for s in tiny_set]
        assert set(collate(bare)) == {"hazy", "clean"}

    def test_augment_keeps_rasters_aligned(self, tiny_set):
        sample = tiny_set[0]
        out = augment_sample(sample, 32, (0, 90, 180, 270), seed=4)
        assert out.hazy.shape == (32, 32, 3)
        assert out.transmission.shape == (32, 32)
        # The cropped rasters still satisfy the scattering model pixel for pixel
        expected = out.clean.data * out.transmission.data[:, :, None] + out.airlight.data * (
            1 - out.transmission.data[:, :, None]
        )
        assert np.max(np.abs(expected - out.hazy.data)) <= 0.5 / 255 + 1e-9

    def test_require_truths(self, tiny_set):
        bare = HazeSample(hazy=tiny_set[0].hazy, clean=tiny_set[0].clean)
        with pytest.raises(MissingTargetError):
            require_truths(bare, ["transmission"])

    def test_augment_config_stride(self):
        with pytest.raises(ValueError):
            AugmentConfig(crop_size=48)


class TestTrain:
    def test_history_and_checkpoints(self, tmp_path, tiny_set):
        cfg = TrainConfig(max_epochs=2, checkpoint_dir=tmp_path)
        best, history = train(build_preset("toy_fastnet", seed=0), tiny_set, tiny_set, cfg)
        assert history.epochs_run == 2
        assert history.stop_reason == "max_epochs"
        assert best.best_loss is not None and best.best_ssim is not None
        assert best.best_loss.path is not None and best.best_loss.path.exists()
        history.write(tmp_path / "history.jsonl")
        assert len((tmp_path / "history.jsonl").read_text().strip().splitlines()) == 2
        assert history.logs

    def test_same_seed_same_history(self, tiny_set):
        cfg = TrainConfig(max_epochs=2, batch_size=2, seed=5, augment=AugmentConfig(crop_size=32))
        results = []
        for _ in range(2):
            model = build_preset("toy_fastnet", seed=1)
            _, history = train(model, tiny_set, tiny_set, cfg)
            results.append(([r.model_dump() for r in history.records], _params_snapshot(model)))
        assert results[0][0] == results[1][0]
        for name, tensor in results[0][1].items():
            assert torch.equal(tensor, results[1][1][name]), name

    def test_threaded_loader_matches_serial(self, tiny_set):
        histories = []
        for workers in (0, 2):
            cfg = TrainConfig(max_epochs=1, loader_workers=workers, seed=2)
            _, history = train(build_preset("toy_fastnet", seed=1), tiny_set, tiny_set, cfg)
            histories.append(history.records[0].train_loss)
        assert histories[0] == histories[1]

    def test_divergence_is_reported(self, monkeypatch, tiny_set):
        monkeypatch.setattr(
            trainer_module, "composite_objective", lambda *args, **kwargs: torch.tensor(float("nan"), requires_grad=True)
        )
        with pytest.raises(TrainingDivergedError) as info:
            train(build_preset("toy_fastnet", seed=0), tiny_set, tiny_set, TrainConfig(max_epochs=2))
        assert info.value.history.stop_reason == "diverged"

    def test_fastnet_cannot_train_dual_targets(self, tiny_set):
        cfg = TrainConfig(regime="mse_x4", max_epochs=1)
        with pytest.raises(MissingTargetError):
            train(build_preset("toy_fastnet", seed=0), tiny_set, tiny_set, cfg)

    def test_dual_mse_x4(self, tiny_set):
        cfg = TrainConfig(regime="mse_x4", max_epochs=1)
        _, history = train(build_preset("toy_dual_fastnet", seed=0), tiny_set, tiny_set, cfg)
        assert history.tag == "mse_x4"
        assert math.isfinite(history.records[0].train_loss)

    @pytest.mark.slow
    def test_overfits_single_pair(self, overfit_sample):
        cfg = TrainConfig(max_epochs=500, early_stop_patience=500, lr=1e-3)
        _, history = train(build_preset("toy_fastnet", seed=0), [overfit_sample], [overfit_sample], cfg)
        assert max(r.val_psnr_db for r in history.records) >= 25.0


class TestCombinations:
    def test_every_combination_is_a_config_value(self):
        for name in LOSS_COMBINATIONS:
            cfg = TrainConfig(combination=name)
            assert (cfg.refinement_loss is None) == ("→" not in name)

    def test_round_trip_through_json(self):
        cfg = TrainConfig(combination="L1 → SSIM")
        again = TrainConfig.model_validate_json(cfg.model_dump_json())
        assert again.loss == LossSpec(kind="l1")
        assert again.refinement_loss.kind == "ssim"

    @pytest.mark.parametrize("name", LOSS_COMBINATIONS)
    def test_one_epoch_per_combination(self, tiny_set, name):
        cfg = TrainConfig(max_epochs=1, refinement_epochs=1)
        _, history = train_combination(build_preset("toy_fastnet", seed=0), tiny_set, tiny_set, cfg, name)
        assert history.tag == name
        assert history.stages == (["train", "refine"] if "→" in name else ["train"])
        assert math.isfinite(history.records[-1].train_loss)

    def test_two_stage_run(self, tiny_set):
        cfg = TrainConfig(max_epochs=1, refinement_epochs=1)
        _, history = train_combination(build_preset("toy_fastnet", seed=0), tiny_set, tiny_set, cfg, "MSE → SSIM")
        assert history.tag == "MSE → SSIM"
        assert history.stages == ["train", "refine"]
        assert [r.stage for r in history.records] == ["train", "refine"]

    def test_content_refinement(self, tiny_set):
        cfg = TrainConfig(max_epochs=1, refinement_epochs=1)
        _, history = train_combination(
            build_preset("toy_fastnet", seed=0), tiny_set, tiny_set, cfg, "MSE → Content Loss"
        )
        assert math.isfinite(history.records[-1].train_loss)

    def test_fine_tune_from_path(self, tmp_path, tiny_set):
        model = build_preset("toy_fastnet", seed=0)
        cfg = TrainConfig(max_epochs=1, refinement_epochs=2, checkpoint_dir=tmp_path)
        best, _ = train(model, tiny_set, tiny_set, cfg)
        _, history = fine_tune(model, best.best_loss.path, LossSpec(kind="l1"), cfg, tiny_set, tiny_set)
        assert history.tag == "MSE → L1"
        assert history.epochs_run == 2

    @pytest.mark.slow
    def test_ssim_refinement_improves_ssim(self, overfit_sample):
        data = [overfit_sample]
        model = build_preset("toy_fastnet", seed=0)
        cfg = TrainConfig(max_epochs=100, early_stop_patience=100, refinement_epochs=100)
        best, _ = train(model, data, data, cfg)
        best.best_loss.restore(model)
        _, _, start_ssim = Trainer(cfg).evaluate(model, data, trainer_module.as_composite(LossSpec()))
        _, history = fine_tune(model, None, LossSpec(kind="ssim"), cfg, data, data)
        assert max(r.val_ssim for r in history.records) > start_ssim


class TestEvaluate:
    def test_identical_sample_keeps_psnr_finite(self, monkeypatch, tiny_set):
        monkeypatch.setattr(trainer_module, "forward", lambda model, hazy: {"refined": hazy})
        exact = HazeSample(hazy=tiny_set[0].clean, clean=tiny_set[0].clean)
        data = [exact, tiny_set[1]]
        _, val_psnr, _ = Trainer(TrainConfig(batch_size=2)).evaluate(
            build_preset("toy_fastnet", seed=0), data, trainer_module.as_composite(LossSpec())
        )
        assert math.isfinite(val_psnr)
        assert val_psnr == pytest.approx(psnr(tiny_set[1].hazy, tiny_set[1].clean), rel=1e-4)

    def test_all_identical_is_infinite(self, monkeypatch, tiny_set):
        monkeypatch.setattr(trainer_module, "forward", lambda model, hazy: {"refined": hazy})
        data = [HazeSample(hazy=s.clean, clean=s.clean) for s in tiny_set]
        _, val_psnr, _ = Trainer(TrainConfig()).evaluate(
            build_preset("toy_fastnet", seed=0), data, trainer_module.as_composite(LossSpec())
        )
        assert val_psnr == math.inf


class TestHistory:
    def test_extend_and_frame(self):
        a = TrainHistory(tag="x", stages=["one"])
        b = TrainHistory(tag="x", stages=["two"])
        a.extend(b)
        assert a.stages == ["one", "two"]
        assert a.to_jsonl() == ""
