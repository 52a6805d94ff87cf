"""Scenario-inference HTTP service consumed by the explorer UI.

Endpoints (JSON over HTTP):

* ``GET /health`` -> {"status": "ok", "version": ...}
* ``GET /region`` -> region name, OLU count and boundaries, served SLR
  range, grid size, model version.
* ``POST /predict`` -> predicted grid as a sparse RLE payload (see
  floodcast.wire), with optional ensemble-uncertainty and attention
  overlays, timing, and summary statistics.

The loaded model is immutable; prediction requests can run concurrently.
"""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from floodcast import __version__
from floodcast.core import GridSpec, ProtectionScenario, RegionSpec
from floodcast.metrics import dsc as dsc_metric
from floodcast.network import FloodNet
from floodcast.preprocess import classify_points
from floodcast.synthgen import SynthConfig, synth_region, _CELL_DEG
from floodcast.tensorio import read_container
from floodcast.training import grad_cam, load_checkpoint, predict_with_uncertainty
from floodcast.wire import decode_sparse_grid, encode_sparse_grid


@dataclass
class ServiceBundle:
    """Everything the endpoints need, loaded once and then read-only."""

    models: list[FloodNet]
    region: RegionSpec
    grid: GridSpec
    slr_range: tuple[float, float]
    version: str
    support_mask: np.ndarray | None = None  # bool (n, n); None = every cell
    # depth below which a cell counts as dry in the summary statistics;
    # regression outputs hover slightly above zero on dry land
    wet_threshold_m: float = 0.01
    _gradcam_lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def olu_count(self) -> int:
        return self.region.olu_count

    def build_input_grid(self, bits: tuple[int, ...]) -> np.ndarray:
        """Classify the (supported) grid cells against the requested bits."""
        scenario = ProtectionScenario(bits=bits, slr_m=0.0)
        n = self.grid.n
        xs = np.linspace(self.grid.x_min, self.grid.x_max, n)
        ys = np.linspace(self.grid.y_min, self.grid.y_max, n)
        lon = np.repeat(xs, n)
        lat = np.tile(ys, n)
        if self.support_mask is not None:
            flat_mask = self.support_mask.ravel()
            lon, lat = lon[flat_mask], lat[flat_mask]
        classes = classify_points(lat, lon, scenario, self.region)
        grid = np.zeros((n, n), dtype=np.float32)
        values = np.asarray([pc.c for pc in classes], dtype=np.float32)
        if self.support_mask is not None:
            grid.ravel()[np.flatnonzero(self.support_mask.ravel())] = values
        else:
            grid = values.reshape(n, n)
        return grid


def _params_digest(checkpoint_dir: str | Path) -> str:
    blob = (Path(checkpoint_dir) / "params.ftc").read_bytes()
    return hashlib.sha256(blob).hexdigest()[:12]


def load_synth_bundle(
    checkpoint_dir: str | Path,
    synth_cfg: SynthConfig,
    slr_range: tuple[float, float] = (0.0, 2.0),
    ensemble_root: str | Path | None = None,
) -> ServiceBundle:
    """Bundle for a toy-coastline checkpoint (or ensemble of them)."""
    if ensemble_root is not None:
        member_dirs = sorted(Path(ensemble_root).glob("member_*"))
        if len(member_dirs) < 2:
            raise FileNotFoundError(f"no ensemble members under {ensemble_root}")
        models = [load_checkpoint(d) for d in member_dirs]
        version = _params_digest(member_dirs[0])
    else:
        models = [load_checkpoint(checkpoint_dir)]
        version = _params_digest(checkpoint_dir)
    n = synth_cfg.n
    grid = GridSpec(n=n, x_min=0.0, x_max=(n - 1) * _CELL_DEG, y_min=0.0, y_max=(n - 1) * _CELL_DEG)
    return ServiceBundle(
        models=models,
        region=synth_region(synth_cfg),
        grid=grid,
        slr_range=slr_range,
        version=version,
    )


def load_region_bundle(
    checkpoint_dir: str | Path,
    region: RegionSpec,
    support_path: str | Path,
    slr_range: tuple[float, float] = (0.0, 2.0),
) -> ServiceBundle:
    """Bundle for a real-region checkpoint; the support container (written
    by the preprocess command) fixes which cells can carry context."""
    arrays, meta = read_container(support_path)
    return ServiceBundle(
        models=[load_checkpoint(checkpoint_dir)],
        region=region,
        grid=GridSpec.from_dict(meta["grid"]),
        slr_range=slr_range,
        version=_params_digest(checkpoint_dir),
        support_mask=arrays["support"].astype(bool),
    )


class PredictRequest(BaseModel):
    bits: str
    slr_m: float
    uncertainty: bool = False
    gradcam: bool = False
    reference: dict | None = None  # RLE truth grid for a DSC summary


def create_app(bundle: ServiceBundle) -> FastAPI:
    app = FastAPI(title="floodcast", version=__version__)
    # the explorer UI is served from a different origin (file:// or a dev server)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__, "model_version": bundle.version}

    @app.get("/region")
    def region():
        return {
            "name": bundle.region.name,
            "olu_count": bundle.olu_count,
            "olu_boundaries": [
                [[lat, lon] for lat, lon in poly] for poly in bundle.region.olu_boundaries
            ],
            "slr_range": list(bundle.slr_range),
            "grid_n": bundle.grid.n,
            "model_version": bundle.version,
        }

    @app.post("/predict")
    def predict(req: PredictRequest):
        if len(req.bits) != bundle.olu_count or any(c not in "01" for c in req.bits):
            raise HTTPException(
                status_code=400,
                detail=(
                    f"bits must be a string of exactly {bundle.olu_count} characters "
                    f"from {{0,1}} for region {bundle.region.name!r}; got {req.bits!r}"
                ),
            )
        if not np.isfinite(req.slr_m) or req.slr_m < 0:
            raise HTTPException(status_code=400, detail="slr_m must be finite and >= 0")
        if req.uncertainty and len(bundle.models) < 2:
            raise HTTPException(
                status_code=400, detail="uncertainty requires a served ensemble (>= 2 members)"
            )

        bits = tuple(int(c) for c in req.bits)
        t0 = time.perf_counter()
        try:
            input_grid = bundle.build_input_grid(bits)
            x = torch.from_numpy(input_grid)[None, None]
            slr = torch.tensor([float(req.slr_m)])
            if len(bundle.models) > 1:
                # a served ensemble always answers with its mean, so the
                # uncertainty flag only adds the std overlay
                mean, std = predict_with_uncertainty(bundle.models, input_grid, req.slr_m)
                prediction = mean.astype(np.float32)
                if not req.uncertainty:
                    std = None
            else:
                with torch.no_grad():
                    prediction = bundle.models[0](x, slr)[0, 0].numpy()
                std = None
            heatmap = None
            if req.gradcam:
                with bundle._gradcam_lock:
                    heatmap = grad_cam(bundle.models[0], input_grid, req.slr_m)
        except HTTPException:
            raise
        except Exception as exc:  # model failure -> 5xx per the API contract
            raise HTTPException(status_code=500, detail=f"inference failed: {exc}") from exc
        elapsed_ms = (time.perf_counter() - t0) * 1000.0

        summary = {
            "flooded_cells": int((prediction >= bundle.wet_threshold_m).sum()),
            "max_pwl": float(prediction.max()),
            "mean_pwl": float(prediction.mean()),
            "wet_threshold_m": bundle.wet_threshold_m,
        }
        if req.reference is not None:
            try:
                truth = decode_sparse_grid(req.reference)
            except (KeyError, TypeError, ValueError) as exc:
                raise HTTPException(status_code=400, detail=f"bad reference grid: {exc}") from exc
            if truth.shape != prediction.shape:
                raise HTTPException(
                    status_code=400,
                    detail=f"reference shape {truth.shape} != prediction {prediction.shape}",
                )
            summary["dsc_vs_reference"] = dsc_metric([prediction], [truth])

        response = {
            "cells": encode_sparse_grid(prediction),
            "model_version": bundle.version,
            "inference_ms": elapsed_ms,
            "summary": summary,
        }
        if std is not None:
            response["std_cells"] = encode_sparse_grid(std)
        if heatmap is not None:
            response["heatmap_cells"] = encode_sparse_grid(heatmap)
        return response

    return app


def serve(bundle: ServiceBundle, port: int, host: str = "127.0.0.1") -> None:
    """Run the service until interrupted."""
    import uvicorn

    uvicorn.run(create_app(bundle), host=host, port=port, log_level="warning")
