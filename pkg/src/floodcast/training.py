"""Training, curriculum fine-tuning, deep ensembles, and attention maps.

Primary training runs Adam over the hybrid loss with early stopping on
validation loss and keeps the best-validation weights. Fine-tuning mixes
new-condition data with a replay pool, with the new-data share of each
batch rising linearly over the run. Ensembles are independently seeded
trainings whose prediction mean is the output and whose pixel-wise
standard deviation is the uncertainty proxy.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch.nn import functional as F

from floodcast.core import Sample
from floodcast.loss import LossConfig, hybrid_terms
from floodcast.network import FloodNet, ModelConfig, build_model
from floodcast.tensorio import read_container, write_container


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 2
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    epsilon: float = 1e-8
    early_stop_patience: int = 20
    seed: int = 0
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if self.early_stop_patience < 1:
            raise ValueError("early_stop_patience must be >= 1")


@dataclass(frozen=True)
class CurriculumConfig:
    start_new_frac: float = 0.3
    end_new_frac: float = 0.7

    def __post_init__(self):
        if not 0 <= self.start_new_frac <= self.end_new_frac <= 1:
            raise ValueError("need 0 <= start_new_frac <= end_new_frac <= 1")

    def new_fraction(self, epoch: int, total_epochs: int) -> float:
        """Linear schedule from start to end across the run."""
        if total_epochs <= 1:
            return self.start_new_frac
        t = epoch / (total_epochs - 1)
        return self.start_new_frac + (self.end_new_frac - self.start_new_frac) * t


@dataclass(frozen=True)
class EnsembleConfig:
    members: int = 5
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)

    def __post_init__(self):
        if self.members < 2:
            raise ValueError("an ensemble needs at least 2 members")
        if len(self.seeds) != self.members:
            raise ValueError(f"need {self.members} seeds, got {len(self.seeds)}")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("ensemble seeds must be distinct")


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; carries the failing epoch/batch diagnostics."""

    def __init__(self, epoch: int, batch: int, parts: dict):
        self.epoch = epoch
        self.batch = batch
        self.parts = parts
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}: {parts}")


def _to_tensors(samples: Sequence[Sample]) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    x = torch.stack([torch.from_numpy(np.ascontiguousarray(s.input_grid)) for s in samples])[:, None]
    y = torch.stack([torch.from_numpy(np.ascontiguousarray(s.output_grid)) for s in samples])[:, None]
    slr = torch.tensor([s.slr_m for s in samples], dtype=torch.float32)
    return x, slr, y


def _eval_loss(model: FloodNet, x, slr, y, loss_cfg: LossConfig, batch_size: int) -> float:
    model.eval()
    losses, weights = [], []
    with torch.no_grad():
        for lo in range(0, len(x), batch_size):
            hi = min(lo + batch_size, len(x))
            pred = model(x[lo:hi], slr[lo:hi])
            loss, _ = hybrid_terms(pred, y[lo:hi], loss_cfg)
            losses.append(float(loss))
            weights.append(hi - lo)
    return float(np.average(losses, weights=weights))


def train(
    train_samples: Sequence[Sample],
    val_samples: Sequence[Sample] | None,
    model_cfg: ModelConfig,
    loss_cfg: LossConfig,
    train_cfg: TrainConfig,
) -> tuple[FloodNet, list[dict]]:
    """Train from scratch; returns the best-validation model and history.

    Without a validation split the final-epoch weights are returned and
    early stopping is disabled. Fully deterministic for a fixed seed in
    single-threaded mode.
    """
    if not train_samples:
        raise ValueError("training split is empty")
    torch.manual_seed(train_cfg.seed)
    rng = np.random.default_rng(train_cfg.seed)
    model = FloodNet(model_cfg)
    optimizer = torch.optim.Adam(
        model.parameters(), lr=train_cfg.lr, betas=train_cfg.betas, eps=train_cfg.epsilon
    )
    x, slr, y = _to_tensors(train_samples)
    has_val = bool(val_samples)
    if has_val:
        xv, slrv, yv = _to_tensors(val_samples)

    history: list[dict] = []
    best_val = float("inf")
    best_state = None
    best_epoch = -1
    stall = 0
    for epoch in range(train_cfg.epochs):
        t0 = time.perf_counter()
        model.train()
        order = rng.permutation(len(x))
        epoch_losses, epoch_weights = [], []
        last_delta = float("nan")
        for b, lo in enumerate(range(0, len(order), train_cfg.batch_size)):
            idx = order[lo : lo + train_cfg.batch_size]
            optimizer.zero_grad()
            pred = model(x[idx], slr[idx])
            loss, parts = hybrid_terms(pred, y[idx], loss_cfg)
            if not torch.isfinite(loss):
                raise TrainingDiverged(epoch, b, parts)
            loss.backward()
            optimizer.step()
            epoch_losses.append(float(loss.detach()))
            epoch_weights.append(len(idx))
            last_delta = parts["delta"]
        train_loss = float(np.average(epoch_losses, weights=epoch_weights))
        record = {
            "epoch": epoch,
            "train_loss": train_loss,
            "val_loss": None,
            "delta": last_delta,
            "seconds": time.perf_counter() - t0,
        }
        if has_val:
            val_loss = _eval_loss(model, xv, slrv, yv, loss_cfg, train_cfg.batch_size)
            record["val_loss"] = val_loss
            if val_loss < best_val:
                best_val = val_loss
                best_state = {k: v.clone() for k, v in model.state_dict().items()}
                best_epoch = epoch
                stall = 0
            else:
                stall += 1
        history.append(record)
        if has_val and stall >= train_cfg.early_stop_patience:
            break

    if best_state is not None:
        model.load_state_dict(best_state)
    if train_cfg.checkpoint_dir:
        save_checkpoint(train_cfg.checkpoint_dir, model, history)
    model.best_epoch = best_epoch if has_val else (history[-1]["epoch"] if history else -1)
    return model, history


def finetune(
    model: FloodNet,
    new_train: Sequence[Sample],
    replay_pool: Sequence[Sample],
    new_val: Sequence[Sample] | None,
    curriculum_cfg: CurriculumConfig,
    train_cfg: TrainConfig,
    loss_cfg: LossConfig | None = None,
) -> tuple[FloodNet, list[dict]]:
    """Curriculum fine-tuning on new-condition data with replay.

    Each batch slot independently draws from the new pool with probability
    f(epoch) (linear from start_new_frac to end_new_frac) and from the
    replay pool otherwise. Early stopping tracks loss on new_val.
    """
    if not new_train:
        raise ValueError("fine-tuning needs new data")
    if not replay_pool:
        raise ValueError("fine-tuning needs a replay pool of old data")
    torch.manual_seed(train_cfg.seed)
    rng = np.random.default_rng(train_cfg.seed)
    optimizer = torch.optim.Adam(
        model.parameters(), lr=train_cfg.lr, betas=train_cfg.betas, eps=train_cfg.epsilon
    )
    loss_cfg = loss_cfg or LossConfig()
    xn, slrn, yn = _to_tensors(new_train)
    xo, slro, yo = _to_tensors(replay_pool)
    has_val = bool(new_val)
    if has_val:
        xv, slrv, yv = _to_tensors(new_val)

    steps = max(1, -(-(len(new_train) + len(replay_pool)) // train_cfg.batch_size))
    history: list[dict] = []
    best_val = float("inf")
    best_state = None
    stall = 0
    for epoch in range(train_cfg.epochs):
        f_new = curriculum_cfg.new_fraction(epoch, train_cfg.epochs)
        model.train()
        epoch_losses = []
        n_new_drawn = 0
        for b in range(steps):
            take_new = rng.random(train_cfg.batch_size) < f_new
            n_new_drawn += int(take_new.sum())
            xs, ss, ys = [], [], []
            for is_new in take_new:
                if is_new:
                    i = int(rng.integers(len(xn)))
                    xs.append(xn[i]); ss.append(slrn[i]); ys.append(yn[i])
                else:
                    i = int(rng.integers(len(xo)))
                    xs.append(xo[i]); ss.append(slro[i]); ys.append(yo[i])
            optimizer.zero_grad()
            pred = model(torch.stack(xs), torch.stack(ss))
            loss, parts = hybrid_terms(pred, torch.stack(ys), loss_cfg)
            if not torch.isfinite(loss):
                raise TrainingDiverged(epoch, b, parts)
            loss.backward()
            optimizer.step()
            epoch_losses.append(float(loss.detach()))
        record = {
            "epoch": epoch,
            "train_loss": float(np.mean(epoch_losses)),
            "val_loss": None,
            "new_fraction_target": f_new,
            "new_fraction_drawn": n_new_drawn / (steps * train_cfg.batch_size),
        }
        if has_val:
            val_loss = _eval_loss(model, xv, slrv, yv, loss_cfg, train_cfg.batch_size)
            record["val_loss"] = val_loss
            if val_loss < best_val:
                best_val = val_loss
                best_state = {k: v.clone() for k, v in model.state_dict().items()}
                stall = 0
            else:
                stall += 1
        history.append(record)
        if has_val and stall >= train_cfg.early_stop_patience:
            break
    if best_state is not None:
        model.load_state_dict(best_state)
    if train_cfg.checkpoint_dir:
        save_checkpoint(train_cfg.checkpoint_dir, model, history)
    return model, history


def train_ensemble(
    train_samples: Sequence[Sample],
    val_samples: Sequence[Sample] | None,
    model_cfg: ModelConfig,
    loss_cfg: LossConfig,
    train_cfg: TrainConfig,
    ensemble_cfg: EnsembleConfig,
) -> list[FloodNet]:
    """Independently seeded trainings; order of members is immaterial."""
    members = []
    for seed in ensemble_cfg.seeds:
        member_dir = (
            str(Path(train_cfg.checkpoint_dir) / f"member_{seed}")
            if train_cfg.checkpoint_dir
            else None
        )
        member_cfg = replace(train_cfg, seed=seed, checkpoint_dir=member_dir)
        model, _ = train(train_samples, val_samples, model_cfg, loss_cfg, member_cfg)
        members.append(model)
    return members


def predict_with_uncertainty(
    models: Sequence[FloodNet], input_grid, slr_m: float
) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise ensemble mean and population standard deviation.

    Statistics are computed on member deviations from the first member,
    so identical members yield a bit-exact member mean and an exactly
    zero std regardless of the member count.
    """
    if len(models) < 2:
        raise ValueError("uncertainty needs at least 2 ensemble members")
    x = torch.as_tensor(np.asarray(input_grid), dtype=torch.float32)[None, None]
    slr = torch.tensor([float(slr_m)])
    preds = []
    with torch.no_grad():
        for model in models:
            model.eval()
            preds.append(model(x, slr)[0, 0].numpy())
    stack = np.stack(preds).astype(np.float64)
    shifted = stack - stack[0]
    mean = stack[0] + shifted.mean(axis=0)
    return mean, shifted.std(axis=0, ddof=0)


def grad_cam(
    model: FloodNet,
    input_grid,
    slr_m: float,
    target_layer: str | None = None,
) -> np.ndarray:
    """Attention heatmap in [0, 1] over the input grid.

    Channel weights are the spatially pooled gradients of the summed
    positive output w.r.t. the target layer's activations (default: the
    last decoder block); the rectified weighted activation sum is
    upsampled to the input size and min-max normalized.
    """
    modules = dict(model.named_modules())
    if target_layer is None:
        layer = model.decoder_blocks[-1]
    elif target_layer in modules:
        layer = modules[target_layer]
    else:
        raise ValueError(f"model has no layer named {target_layer!r}")

    captured: dict[str, torch.Tensor] = {}

    def fwd_hook(_module, _inp, out):
        captured["act"] = out

    handle = layer.register_forward_hook(fwd_hook)
    try:
        model.eval()
        x = torch.as_tensor(np.asarray(input_grid), dtype=torch.float32)[None, None]
        out = model(x, torch.tensor([float(slr_m)]))
        target = out.clamp(min=0).sum()
        act = captured["act"]
        grads = torch.autograd.grad(target, act, allow_unused=False)[0]
    finally:
        handle.remove()

    weights = grads.mean(dim=(2, 3), keepdim=True)
    cam = F.relu((weights * act).sum(dim=1, keepdim=True))
    cam = F.interpolate(cam, size=x.shape[-2:], mode="bilinear", align_corners=False)
    cam = cam[0, 0].detach().numpy()
    lo, hi = float(cam.min()), float(cam.max())
    if hi <= 0:
        return np.zeros_like(cam)
    if hi == lo:
        return np.ones_like(cam)
    return (cam - lo) / (hi - lo)


def save_checkpoint(directory: str | Path, model: FloodNet, history: Sequence[dict] | None = None) -> None:
    """Persist config JSON, parameter container, history CSV, and JSONL log."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "config.json").write_text(
        json.dumps({"model": model.cfg.to_dict(), "format_version": 1}, indent=2)
    )
    arrays = {name: tensor.detach().numpy() for name, tensor in model.state_dict().items()}
    write_container(directory / "params.ftc", arrays, meta={"model_version": "1"})
    if history:
        with open(directory / "history.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(history[0].keys()))
            writer.writeheader()
            writer.writerows(history)
        with open(directory / "log.jsonl", "w") as fh:
            for record in history:
                fh.write(json.dumps(record) + "\n")


def load_checkpoint(directory: str | Path) -> FloodNet:
    directory = Path(directory)
    config_path = directory / "config.json"
    params_path = directory / "params.ftc"
    if not config_path.exists() or not params_path.exists():
        raise FileNotFoundError(
            f"checkpoint at {directory} is missing config.json or params.ftc"
        )
    cfg = ModelConfig.from_dict(json.loads(config_path.read_text())["model"])
    arrays, _ = read_container(params_path)
    model = FloodNet(cfg)
    state = {name: torch.from_numpy(np.ascontiguousarray(arr)) for name, arr in arrays.items()}
    model.load_state_dict(state)
    model.eval()
    return model
