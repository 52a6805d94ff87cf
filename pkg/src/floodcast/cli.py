"""Command-line entry points.

Every command takes ``--config run.json`` (see floodcast.config) and is
reproducible given the same config and seed. Exit codes: 0 success,
1 user error (bad config, missing inputs), 2 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from floodcast import __version__
from floodcast.augment import expand_corpus
from floodcast.config import ConfigError, RunConfig, load_run_config
from floodcast.core import Sample, decode_scenario
from floodcast.metrics import evaluate
from floodcast.preprocess import (
    build_grid_spec,
    build_sample,
    load_region_json,
    load_table_csv,
    pwl_histogram,
    utm_to_latlon,
)
from floodcast.core import InundationPoint, InundationTable
from floodcast.synthgen import generate, generate_corpus, write_manifest
from floodcast.tensorio import load_sample, read_container, save_sample, write_container
from floodcast.training import (
    CurriculumConfig,
    finetune,
    load_checkpoint,
    save_checkpoint,
    train,
    train_ensemble,
)


class UserError(Exception):
    """Invalid input or configuration; maps to exit code 1."""


def _save_split(directory: Path, samples, region: str = "", grid=None) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for sample in samples:
        save_sample(directory / f"{sample.scenario_id}.ftc", sample, region=region, grid=grid)


def _load_split(directory: Path) -> list[Sample]:
    if not directory.is_dir():
        raise UserError(f"dataset split directory not found: {directory}")
    files = sorted(directory.glob("*.ftc"))
    if not files:
        raise UserError(f"no sample containers in {directory}")
    return [load_sample(f) for f in files]


def cmd_synthgen(cfg: RunConfig, args) -> int:
    out_dir = Path(cfg.paths.out_dir)
    corpus = generate_corpus(
        cfg.synth, cfg.corpus.slr_levels, cfg.corpus.scenarios, cfg.corpus.split
    )
    for split in ("train", "val", "test"):
        _save_split(out_dir / split, corpus[split], region="synthetic")
    out_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(out_dir / "manifest.json", corpus["manifest"])
    print(
        f"synthgen: wrote {sum(len(corpus[s]) for s in ('train', 'val', 'test'))} samples "
        f"to {out_dir} (train/val/test = "
        f"{len(corpus['train'])}/{len(corpus['val'])}/{len(corpus['test'])})"
    )
    return 0


def cmd_preprocess(cfg: RunConfig, args) -> int:
    if cfg.mode != "region":
        raise UserError("preprocess requires mode='region' (use synthgen for synthetic data)")
    if not cfg.paths.boundaries or not cfg.paths.tables_dir:
        raise UserError("region mode needs paths.boundaries and paths.tables_dir")
    region = load_region_json(cfg.paths.boundaries)
    tables_dir = Path(cfg.paths.tables_dir)
    csv_files = sorted(tables_dir.glob("*.csv"))
    if not csv_files:
        raise UserError(f"no scenario CSV files in {tables_dir}")

    tables = []
    for path in csv_files:
        scenario = decode_scenario(path.stem, region.olu_count)
        table = load_table_csv(path, scenario)
        if cfg.coords.mode == "utm":
            pts = []
            for p in table.points:
                lat, lon = utm_to_latlon(p.x, p.y, cfg.coords.zone, cfg.coords.northern)
                pts.append(InundationPoint(x=lon, y=lat, pwl=p.pwl))
            table = InundationTable(scenario=scenario, points=tuple(pts))
        tables.append(table)

    grid = build_grid_spec(tables, cfg.grid_n)
    samples = [build_sample(t, region, grid) for t in tables]

    out_dir = Path(cfg.paths.out_dir)
    rng = np.random.default_rng(cfg.synth.seed)
    order = rng.permutation(len(samples))
    n_train = int(round(cfg.corpus.split[0] * len(samples)))
    n_val = int(round(cfg.corpus.split[1] * len(samples)))
    split_ids = {
        "train": order[:n_train],
        "val": order[n_train : n_train + n_val],
        "test": order[n_train + n_val :],
    }
    for name, idx in split_ids.items():
        _save_split(out_dir / name, [samples[i] for i in idx], region=region.name, grid=grid)
    support = np.zeros((grid.n, grid.n), dtype=np.float32)
    for s in samples:
        support[s.input_grid != 0] = 1.0
    write_container(
        out_dir / "support.ftc",
        {"support": support},
        meta={"grid": grid.to_dict(), "region": region.name},
    )
    manifest = {
        "generator": "preprocess",
        "region": region.name,
        "grid": grid.to_dict(),
        "total": len(samples),
        "splits": {name: {"count": len(idx)} for name, idx in split_ids.items()},
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    print(f"preprocess: {len(samples)} scenarios -> {out_dir}")
    return 0


def cmd_augment(cfg: RunConfig, args) -> int:
    out_dir = Path(cfg.paths.out_dir)
    for split in args.splits:
        samples = _load_split(out_dir / split)
        expanded = expand_corpus(samples, cfg.augment)
        target = out_dir / f"{split}_augmented"
        target.mkdir(parents=True, exist_ok=True)
        for k, sample in enumerate(expanded):
            save_sample(target / f"{k:06d}_{sample.scenario_id}.ftc", sample)
        print(f"augment: {split}: {len(samples)} -> {len(expanded)} samples in {target}")
    return 0


def cmd_train(cfg: RunConfig, args) -> int:
    out_dir = Path(cfg.paths.out_dir)
    train_samples = _load_split(out_dir / args.train_split)
    val_dir = out_dir / args.val_split
    val_samples = _load_split(val_dir) if val_dir.is_dir() else None
    train_cfg = cfg.train
    if args.seed is not None:
        train_cfg = dataclasses.replace(train_cfg, seed=args.seed)
    train_cfg = dataclasses.replace(train_cfg, checkpoint_dir=cfg.paths.checkpoint_dir)
    model, history = train(train_samples, val_samples, cfg.model, cfg.loss, train_cfg)
    print(
        f"train: {len(history)} epochs, final train loss "
        f"{history[-1]['train_loss']:.6f}, checkpoint -> {cfg.paths.checkpoint_dir}"
    )
    return 0


def cmd_finetune(cfg: RunConfig, args) -> int:
    model = load_checkpoint(args.checkpoint or cfg.paths.checkpoint_dir)
    new_train = _load_split(Path(args.new_dir))
    replay = _load_split(Path(args.replay_dir))
    new_val = _load_split(Path(args.val_dir)) if args.val_dir else None
    train_cfg = dataclasses.replace(
        cfg.train, epochs=args.epochs or cfg.train.epochs, checkpoint_dir=args.out_checkpoint
    )
    model, history = finetune(
        model, new_train, replay, new_val, cfg.curriculum, train_cfg, cfg.loss
    )
    print(f"finetune: {len(history)} epochs, checkpoint -> {args.out_checkpoint}")
    return 0


def cmd_ensemble(cfg: RunConfig, args) -> int:
    out_dir = Path(cfg.paths.out_dir)
    train_samples = _load_split(out_dir / args.train_split)
    val_dir = out_dir / args.val_split
    val_samples = _load_split(val_dir) if val_dir.is_dir() else None
    train_cfg = dataclasses.replace(cfg.train, checkpoint_dir=cfg.paths.checkpoint_dir)
    members = train_ensemble(
        train_samples, val_samples, cfg.model, cfg.loss, train_cfg, cfg.ensemble
    )
    print(f"ensemble: trained {len(members)} members -> {cfg.paths.checkpoint_dir}/member_*")
    return 0


def _predict_split(cfg: RunConfig, checkpoint: str, split: str) -> tuple[Path, float]:
    import torch

    model = load_checkpoint(checkpoint)
    out_dir = Path(cfg.paths.out_dir)
    samples = _load_split(out_dir / split)
    pred_dir = out_dir / f"pred_{split}"
    pred_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    for sample in samples:
        x = torch.from_numpy(sample.input_grid)[None, None]
        with torch.no_grad():
            pred = model(x, torch.tensor([sample.slr_m]))[0, 0].numpy()
        save_sample(
            pred_dir / f"{sample.scenario_id}.ftc",
            Sample(
                input_grid=sample.input_grid,
                slr_m=sample.slr_m,
                output_grid=pred,
                scenario_id=sample.scenario_id,
            ),
        )
    return pred_dir, time.perf_counter() - t0


def cmd_infer(cfg: RunConfig, args) -> int:
    pred_dir, seconds = _predict_split(cfg, args.checkpoint or cfg.paths.checkpoint_dir, args.split)
    count = len(list(pred_dir.glob("*.ftc")))
    print(f"infer: {count} scenarios in {seconds:.2f}s -> {pred_dir}")
    return 0


def cmd_evaluate(cfg: RunConfig, args) -> int:
    out_dir = Path(cfg.paths.out_dir)
    if args.pred_dir:
        pred_dir = Path(args.pred_dir)
    else:
        pred_dir, _ = _predict_split(cfg, args.checkpoint or cfg.paths.checkpoint_dir, args.split)
    truth_dir = Path(args.truth_dir) if args.truth_dir else out_dir / args.split

    truths = {p.name: load_sample(p) for p in sorted(truth_dir.glob("*.ftc"))}
    preds = {p.name: load_sample(p) for p in sorted(pred_dir.glob("*.ftc"))}
    common = sorted(set(truths) & set(preds))
    if not common:
        raise UserError(f"no matching sample names between {pred_dir} and {truth_dir}")
    report = evaluate(
        [preds[k].output_grid for k in common],
        [truths[k].output_grid for k in common],
        deltas=cfg.eval.deltas,
        zero_tol=cfg.eval.zero_tol,
    )
    report_path = Path(args.report or out_dir / "report.json")
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(report.to_json())
    report.write_csv(report_path.with_suffix(".csv"))
    print(report.to_json())
    print(f"evaluate: report -> {report_path}")
    return 0


def cmd_gradcam(cfg: RunConfig, args) -> int:
    from floodcast.training import grad_cam

    model = load_checkpoint(args.checkpoint or cfg.paths.checkpoint_dir)
    scenario = decode_scenario(args.scenario, cfg.synth.k_olus)
    sample = generate(scenario, cfg.synth)
    heatmap = grad_cam(model, sample.input_grid, sample.slr_m, args.layer)
    write_container(
        args.out, {"heatmap": heatmap}, meta={"scenario": args.scenario, "layer": args.layer or ""}
    )
    print(f"gradcam: heatmap for {args.scenario} -> {args.out}")
    return 0


def cmd_stats(cfg: RunConfig, args) -> int:
    samples = _load_split(Path(cfg.paths.out_dir) / args.split)
    record = pwl_histogram(samples, bins=args.bins)
    print(
        json.dumps(
            {
                "split": args.split,
                "n_samples": len(samples),
                "n_cells": record.n_cells,
                "zero_mass": record.zero_mass,
                "bin_edges": list(record.bin_edges),
                "bin_masses": list(record.bin_masses),
            },
            indent=2,
        )
    )
    return 0


def cmd_serve(cfg: RunConfig, args) -> int:
    from floodcast.service import load_region_bundle, load_synth_bundle, serve

    checkpoint = args.checkpoint or cfg.paths.checkpoint_dir
    if cfg.mode == "synth":
        bundle = load_synth_bundle(
            checkpoint, cfg.synth, cfg.serve.slr_range, ensemble_root=args.ensemble_root
        )
    else:
        if not cfg.paths.boundaries:
            raise UserError("region mode needs paths.boundaries to serve")
        region = load_region_json(cfg.paths.boundaries)
        bundle = load_region_bundle(
            checkpoint, region, Path(cfg.paths.out_dir) / "support.ftc", cfg.serve.slr_range
        )
    port = args.port or int(os.environ.get("FLOODCAST_PORT", cfg.serve.port))
    print(f"serve: {bundle.region.name} model {bundle.version} on port {port}")
    serve(bundle, port=port, host=args.host)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="floodcast", description="Coastal flood surrogate modeling toolkit"
    )
    parser.add_argument("--version", action="version", version=f"floodcast {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="run configuration JSON")
        p.set_defaults(fn=fn)
        return p

    add("synthgen", cmd_synthgen, "generate the synthetic corpus and splits")
    add("preprocess", cmd_preprocess, "turn raw scenario CSV tables into sample containers")

    p = add("augment", cmd_augment, "expand splits with cutout augmentation")
    p.add_argument("--splits", nargs="+", default=["train", "val"])

    p = add("train", cmd_train, "primary training")
    p.add_argument("--train-split", default="train")
    p.add_argument("--val-split", default="val")
    p.add_argument("--seed", type=int, default=None)

    p = add("finetune", cmd_finetune, "curriculum fine-tuning on new-condition data")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--new-dir", required=True)
    p.add_argument("--replay-dir", required=True)
    p.add_argument("--val-dir", default=None)
    p.add_argument("--out-checkpoint", required=True)
    p.add_argument("--epochs", type=int, default=None)

    p = add("ensemble", cmd_ensemble, "train the deep ensemble")
    p.add_argument("--train-split", default="train")
    p.add_argument("--val-split", default="val")

    p = add("infer", cmd_infer, "batch inference over a split")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--split", default="test")

    p = add("evaluate", cmd_evaluate, "metric report over predictions vs truths")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--split", default="test")
    p.add_argument("--pred-dir", default=None)
    p.add_argument("--truth-dir", default=None)
    p.add_argument("--report", default=None)

    p = add("gradcam", cmd_gradcam, "attention heatmap for one scenario")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--scenario", required=True, help="scenario string, e.g. 10110010_1.0")
    p.add_argument("--layer", default=None)
    p.add_argument("--out", required=True)

    p = add("stats", cmd_stats, "PWL distribution of a split")
    p.add_argument("--split", default="train")
    p.add_argument("--bins", type=int, default=20)

    p = add("serve", cmd_serve, "run the scenario-inference HTTP service")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--ensemble-root", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--host", default="127.0.0.1")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_run_config(args.config)
        return args.fn(cfg, args)
    except (ConfigError, UserError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
