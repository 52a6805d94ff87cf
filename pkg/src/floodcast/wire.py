"""Run-length-encoded sparse grid payloads for the HTTP API.

Flood grids are mostly zeros, so responses carry only the nonzero runs:

    {"n_rows": R, "n_cols": C, "runs": [[start, [v, v, ...]], ...]}

where ``start`` is the flat row-major index of the first cell of a run of
consecutive nonzero values. Runs are ordered by start index and never
overlap or touch (adjacent nonzero cells always share one run). Values
are finite floats; the decoder fills everything else with zero. The
round trip is lossless for float32 grids.
"""

from __future__ import annotations

import numpy as np


def encode_sparse_grid(grid: np.ndarray) -> dict:
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise ValueError(f"expected a 2-D grid, got shape {grid.shape}")
    flat = grid.ravel()
    nonzero = np.flatnonzero(flat)
    runs: list[list] = []
    if nonzero.size:
        breaks = np.flatnonzero(np.diff(nonzero) > 1) + 1
        for chunk in np.split(nonzero, breaks):
            runs.append([int(chunk[0]), [float(v) for v in flat[chunk]]])
    return {"n_rows": int(grid.shape[0]), "n_cols": int(grid.shape[1]), "runs": runs}


def decode_sparse_grid(payload: dict, dtype=np.float32) -> np.ndarray:
    n_rows, n_cols = int(payload["n_rows"]), int(payload["n_cols"])
    flat = np.zeros(n_rows * n_cols, dtype=dtype)
    for start, values in payload["runs"]:
        start = int(start)
        if start < 0 or start + len(values) > flat.size:
            raise ValueError(f"run [{start}, +{len(values)}] falls outside the grid")
        flat[start : start + len(values)] = values
    return flat.reshape(n_rows, n_cols)
