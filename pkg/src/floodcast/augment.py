"""Random-remove cutout augmentation for the sparse training corpus.

Each variant occludes small square regions of the input grid around a
random subset of the nonzero (shoreline-context) cells, simulating
imperfect or missing data. Output grids and the SLR scalar are left
untouched unless PWL scaling is explicitly enabled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from floodcast.core import Sample


@dataclass(frozen=True)
class AugmentConfig:
    multiplicity: int = 24
    cutout_size: int = 9
    segment_fraction: float = 0.2
    scale_range: tuple[float, float] = (1.0, 1.0)  # (1, 1) disables PWL scaling
    seed: int = 0

    def __post_init__(self):
        if self.multiplicity < 1:
            raise ValueError(f"multiplicity must be >= 1, got {self.multiplicity}")
        if self.cutout_size < 1 or self.cutout_size % 2 == 0:
            raise ValueError(f"cutout_size must be odd and positive, got {self.cutout_size}")
        # fraction 0 is allowed as the degenerate identity augmentation
        if not 0 <= self.segment_fraction <= 1:
            raise ValueError(f"segment_fraction must be in [0, 1], got {self.segment_fraction}")
        lo, hi = self.scale_range
        if not 0 < lo <= hi:
            raise ValueError(f"scale_range must satisfy 0 < lo <= hi, got {self.scale_range}")

    @property
    def scaling_enabled(self) -> bool:
        return self.scale_range != (1.0, 1.0)


def random_remove(sample: Sample, cfg: AugmentConfig, draw: int) -> Sample:
    """One seeded cutout variant of ``sample``.

    The (cfg.seed, draw) pair fully determines the variant, so corpora can
    be rebuilt or parallelized without coordination. All-zero inputs come
    back unchanged (nothing to occlude).
    """
    rng = np.random.default_rng([cfg.seed, draw])
    input_grid = sample.input_grid.copy()
    output_grid = sample.output_grid.copy()

    nonzero = np.argwhere(input_grid != 0)
    k = math.ceil(cfg.segment_fraction * len(nonzero))
    if k > 0:
        half = cfg.cutout_size // 2
        n_rows, n_cols = input_grid.shape
        chosen = rng.choice(len(nonzero), size=k, replace=False)
        for ci, cj in nonzero[chosen]:
            input_grid[
                max(0, ci - half) : min(n_rows, ci + half + 1),
                max(0, cj - half) : min(n_cols, cj + half + 1),
            ] = 0.0

    if cfg.scaling_enabled:
        output_grid *= rng.uniform(*cfg.scale_range)

    return Sample(
        input_grid=input_grid,
        slr_m=sample.slr_m,
        output_grid=output_grid,
        scenario_id=sample.scenario_id,
    )


def expand_corpus(samples: Sequence[Sample], cfg: AugmentConfig) -> list[Sample]:
    """Expand the corpus by cfg.multiplicity.

    Every sample contributes itself (its draw-0 variant is the identity)
    plus multiplicity - 1 cutout variants, each with a corpus-unique draw
    index so regeneration is reproducible.
    """
    expanded: list[Sample] = []
    for idx, sample in enumerate(samples):
        expanded.append(sample)
        for variant in range(1, cfg.multiplicity):
            expanded.append(random_remove(sample, cfg, draw=idx * cfg.multiplicity + variant))
    return expanded
