"""Hybrid robust regression objective: Huber + Log-Cosh + Quantile.

The three per-element losses are combined as a convex mixture whose
weights sum to 1. The Huber threshold is set per batch from the clamped
median absolute error and treated as a constant during backpropagation.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch


@dataclass(frozen=True)
class LossConfig:
    alpha_h: float = 0.3
    alpha_c: float = 0.5
    alpha_q: float = 0.2
    delta_lo: float = 0.3
    delta_hi: float = 0.7
    tau: float = 0.5

    def __post_init__(self):
        if min(self.alpha_h, self.alpha_c, self.alpha_q) < 0:
            raise ValueError("loss weights must be nonnegative")
        total = self.alpha_h + self.alpha_c + self.alpha_q
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"loss weights must sum to 1, got {total}")
        if not 0 < self.delta_lo <= self.delta_hi:
            raise ValueError(f"need 0 < delta_lo <= delta_hi, got ({self.delta_lo}, {self.delta_hi})")
        if not 0 < self.tau < 1:
            raise ValueError(f"tau must be in (0, 1), got {self.tau}")


def _pair(y_pred, y_true) -> tuple[torch.Tensor, torch.Tensor]:
    y_pred = torch.as_tensor(y_pred)
    y_true = torch.as_tensor(y_true, dtype=y_pred.dtype)
    if y_pred.shape != y_true.shape:
        raise ValueError(f"shape mismatch: {tuple(y_pred.shape)} vs {tuple(y_true.shape)}")
    return y_pred, y_true


def huber(y_pred, y_true, delta: float) -> torch.Tensor:
    """Per-element Huber loss: quadratic within delta, linear outside."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    y_pred, y_true = _pair(y_pred, y_true)
    err = y_pred - y_true
    abs_err = err.abs()
    return torch.where(abs_err <= delta, 0.5 * err**2, delta * abs_err - 0.5 * delta**2)


def log_cosh(y_pred, y_true) -> torch.Tensor:
    """Per-element log(cosh(error)), in the overflow-safe form
    |e| + log1p(exp(-2|e|)) - log 2."""
    y_pred, y_true = _pair(y_pred, y_true)
    abs_err = (y_pred - y_true).abs()
    ln2 = torch.log(torch.tensor(2.0, dtype=abs_err.dtype))
    return abs_err + torch.log1p(torch.exp(-2 * abs_err)) - ln2


def quantile(y_pred, y_true, tau: float) -> torch.Tensor:
    """Per-element pinball loss: tau * e on overprediction, (1 - tau) * (-e) under."""
    if not 0 < tau < 1:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    y_pred, y_true = _pair(y_pred, y_true)
    err = y_pred - y_true
    return torch.where(err >= 0, tau * err, (tau - 1) * err)


def dynamic_delta(y_pred, y_true, cfg: LossConfig) -> float:
    """Clamped batch median absolute error; constant w.r.t. gradients."""
    y_pred, y_true = _pair(y_pred, y_true)
    with torch.no_grad():
        med = torch.quantile((y_pred - y_true).abs().reshape(-1).double(), 0.5)
    return float(med.clamp(cfg.delta_lo, cfg.delta_hi))


def hybrid_terms(
    y_pred,
    y_true,
    cfg: LossConfig | None = None,
    delta: float | None = None,
) -> tuple[torch.Tensor, dict[str, float]]:
    """Hybrid loss plus a component breakdown for diagnostics.

    delta overrides the dynamic batch threshold (used by tests and for
    reporting); the breakdown values are detached floats.
    """
    cfg = cfg or LossConfig()
    y_pred, y_true = _pair(y_pred, y_true)
    if delta is None:
        delta = dynamic_delta(y_pred, y_true, cfg)
    h = huber(y_pred, y_true, delta).mean()
    c = log_cosh(y_pred, y_true).mean()
    q = quantile(y_pred, y_true, cfg.tau).mean()
    total = cfg.alpha_h * h + cfg.alpha_c * c + cfg.alpha_q * q
    parts = {
        "huber": float(h.detach()),
        "log_cosh": float(c.detach()),
        "quantile": float(q.detach()),
        "delta": float(delta),
    }
    return total, parts


def hybrid_loss(y_pred, y_true, cfg: LossConfig | None = None, delta: float | None = None) -> torch.Tensor:
    """Mean over elements of the weighted Huber/Log-Cosh/Quantile mixture."""
    total, _ = hybrid_terms(y_pred, y_true, cfg, delta)
    return total
