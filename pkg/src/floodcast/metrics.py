"""Evaluation metrics for predicted peak-water-level grids.

All metrics average a per-sample statistic over the prediction set:
mean absolute error, root mean square error, relative total absolute
error, explained variance, error-threshold exceedance rates, dry-zone
accuracy, and the Dice overlap of binarized flood extents. Samples that
make a metric undefined (all-zero truth, zero truth variance, no dry
pixels) are excluded with a logged warning rather than aborting a run.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

ZERO_TOL = 1e-6  # float32 output-head noise floor, meters


def _stack(preds, truths) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray([np.asarray(g, dtype=np.float64) for g in preds])
    t = np.asarray([np.asarray(g, dtype=np.float64) for g in truths])
    if p.size == 0 or t.size == 0:
        raise ValueError("need at least one prediction/truth pair")
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: predictions {p.shape} vs truths {t.shape}")
    return p.reshape(p.shape[0], -1), t.reshape(t.shape[0], -1)


def amae(preds, truths) -> float:
    """Mean over samples of the per-sample mean absolute error."""
    p, t = _stack(preds, truths)
    return float(np.abs(t - p).mean(axis=1).mean())


def armse(preds, truths) -> float:
    """Mean over samples of the per-sample root mean square error."""
    p, t = _stack(preds, truths)
    return float(np.sqrt(((t - p) ** 2).mean(axis=1)).mean())


def artae(preds, truths) -> float:
    """Mean per-sample L1 error relative to the truth's L1 mass, percent."""
    p, t = _stack(preds, truths)
    norms = np.abs(t).sum(axis=1)
    valid = norms > 0
    if not valid.any():
        raise ValueError("every sample has an all-zero truth; ARTAE is undefined")
    if not valid.all():
        logger.warning("ARTAE: excluded %d all-zero-truth sample(s)", int((~valid).sum()))
    ratios = np.abs(t - p).sum(axis=1)[valid] / norms[valid]
    return float(ratios.mean() * 100.0)


def r2(preds, truths) -> float:
    """Mean per-sample coefficient of determination."""
    p, t = _stack(preds, truths)
    ss_res = ((t - p) ** 2).sum(axis=1)
    ss_tot = ((t - t.mean(axis=1, keepdims=True)) ** 2).sum(axis=1)
    valid = ss_tot > 0
    if not valid.any():
        raise ValueError("every sample has zero truth variance; R^2 is undefined")
    if not valid.all():
        logger.warning("R^2: excluded %d zero-variance sample(s)", int((~valid).sum()))
    return float((1.0 - ss_res[valid] / ss_tot[valid]).mean())


def threshold_exceedance(preds, truths, delta_thresh: float) -> float:
    """Mean per-sample fraction of pixels with |error| > delta_thresh, percent."""
    p, t = _stack(preds, truths)
    return float((np.abs(t - p) > delta_thresh).mean(axis=1).mean() * 100.0)


def acc0(preds, truths, zero_tol: float = ZERO_TOL, literal: bool = False) -> float:
    """Dry-zone accuracy, percent.

    Over pixels whose truth is exactly zero, the fraction predicted dry
    (|pred| <= zero_tol), averaged per sample. ``literal=True`` instead
    computes the fraction of dry pixels in the truth itself, independent
    of predictions (compatibility with the plain zero-count definition).
    """
    p, t = _stack(preds, truths)
    per_sample = []
    skipped = 0
    for pi, ti in zip(p, t):
        dry = ti == 0
        if literal:
            per_sample.append(dry.mean())
            continue
        if not dry.any():
            skipped += 1
            continue
        per_sample.append((np.abs(pi[dry]) <= zero_tol).mean())
    if skipped:
        logger.warning("Acc[0]: excluded %d sample(s) with no dry-truth pixels", skipped)
    if not per_sample:
        logger.warning("Acc[0]: no sample has dry-truth pixels; returning nan")
        return float("nan")
    return float(np.mean(per_sample) * 100.0)


def dsc(preds, truths, zero_tol: float = ZERO_TOL) -> float:
    """Mean per-sample Dice overlap of binarized flood extents.

    Pixels with value > zero_tol count as inundated; two empty masks
    overlap perfectly by convention.
    """
    p, t = _stack(preds, truths)
    scores = []
    for pi, ti in zip(p, t):
        pred_wet = pi > zero_tol
        true_wet = ti > zero_tol
        tp = (pred_wet & true_wet).sum()
        fp = (pred_wet & ~true_wet).sum()
        fn = (~pred_wet & true_wet).sum()
        denom = 2 * tp + fp + fn
        scores.append(1.0 if denom == 0 else 2 * tp / denom)
    return float(np.mean(scores))


@dataclass(frozen=True)
class NaiveBaseline:
    """Constant predictor emitting the training-set mean grid value."""

    mean_value: float

    def predict(self, shape: tuple[int, ...]) -> np.ndarray:
        return np.full(shape, self.mean_value, dtype=np.float64)

    def predict_like(self, truths) -> np.ndarray:
        t = np.asarray([np.asarray(g, dtype=np.float64) for g in truths])
        return np.full_like(t, self.mean_value)


def naive_baseline(train_truths) -> NaiveBaseline:
    t = np.asarray([np.asarray(g, dtype=np.float64) for g in train_truths])
    if t.size == 0:
        raise ValueError("need at least one training sample")
    return NaiveBaseline(mean_value=float(t.mean()))


@dataclass
class MetricsReport:
    """The seven-metric evaluation record for a prediction set."""

    amae: float
    armse: float
    artae_pct: float
    r2: float
    delta_gt_05_pct: float
    delta_gt_01_pct: float
    acc0_pct: float
    dsc: float
    n_samples: int
    per_sample: list[dict] = field(default_factory=list)

    def to_dict(self, include_per_sample: bool = False) -> dict:
        def clean(v):
            return None if isinstance(v, float) and not math.isfinite(v) else v

        out = {
            "amae": clean(self.amae),
            "armse": clean(self.armse),
            "artae_pct": clean(self.artae_pct),
            "r2": clean(self.r2),
            "delta_gt_05_pct": clean(self.delta_gt_05_pct),
            "delta_gt_01_pct": clean(self.delta_gt_01_pct),
            "acc0_pct": clean(self.acc0_pct),
            "dsc": clean(self.dsc),
            "n_samples": self.n_samples,
        }
        if include_per_sample:
            out["per_sample"] = [
                {k: clean(v) for k, v in row.items()} for row in self.per_sample
            ]
        return out

    def to_json(self, include_per_sample: bool = False) -> str:
        return json.dumps(self.to_dict(include_per_sample), indent=2)

    def write_csv(self, path: str | Path) -> None:
        """Per-sample breakdown as CSV."""
        if not self.per_sample:
            raise ValueError("report has no per-sample breakdown")
        cols = list(self.per_sample[0].keys())
        lines = [",".join(cols)]
        for row in self.per_sample:
            lines.append(",".join("" if row[c] is None else f"{row[c]}" for c in cols))
        Path(path).write_text("\n".join(lines) + "\n")


def _per_sample_rows(p: np.ndarray, t: np.ndarray, deltas, zero_tol) -> list[dict]:
    rows = []
    for i, (pi, ti) in enumerate(zip(p, t)):
        err = np.abs(ti - pi)
        norm = np.abs(ti).sum()
        var = ((ti - ti.mean()) ** 2).sum()
        dry = ti == 0
        pred_wet, true_wet = pi > zero_tol, ti > zero_tol
        tp = (pred_wet & true_wet).sum()
        denom = 2 * tp + (pred_wet & ~true_wet).sum() + (~pred_wet & true_wet).sum()
        rows.append(
            {
                "sample": i,
                "mae": float(err.mean()),
                "rmse": float(np.sqrt((err**2).mean())),
                "artae_pct": float(err.sum() / norm * 100) if norm > 0 else None,
                "r2": float(1 - (err**2).sum() / var) if var > 0 else None,
                f"exceed_{deltas[0]}_pct": float((err > deltas[0]).mean() * 100),
                f"exceed_{deltas[1]}_pct": float((err > deltas[1]).mean() * 100),
                "acc0_pct": float((np.abs(pi[dry]) <= zero_tol).mean() * 100) if dry.any() else None,
                "dsc": 1.0 if denom == 0 else float(2 * tp / denom),
            }
        )
    return rows


def evaluate(
    preds,
    truths,
    deltas: tuple[float, float] = (0.5, 0.1),
    zero_tol: float = ZERO_TOL,
) -> MetricsReport:
    """Assemble the full report over a prediction set."""
    p, t = _stack(preds, truths)
    return MetricsReport(
        amae=amae(p, t),
        armse=armse(p, t),
        artae_pct=artae(p, t),
        r2=r2(p, t),
        delta_gt_05_pct=threshold_exceedance(p, t, deltas[0]),
        delta_gt_01_pct=threshold_exceedance(p, t, deltas[1]),
        acc0_pct=acc0(p, t, zero_tol),
        dsc=dsc(p, t, zero_tol),
        n_samples=p.shape[0],
        per_sample=_per_sample_rows(p, t, deltas, zero_tol),
    )
