"""Command-line surface: simulate, beamform, decimate, train, eval, render, gradcheck.

Exit codes: 0 success, 1 usage error, 2 data/validation error.  When --seed is
omitted the MLA_FORGE_SEED environment variable (default 0) supplies it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .datastore import (
    build_dataset,
    load_checkpoint,
    load_image_tensor,
    load_manifest,
    load_pairs,
    load_rf_sweep,
    save_checkpoint,
    save_cube,
    save_image,
    save_rf_sweep,
    write_json,
)
from .evaluation import evaluate_split
from .fieldsim import PHANTOM_KINDS, make_phantom, simulate_sweep
from .geometry import AcquisitionConfig, hann_window
from .imaging import BeamformedImage, MlaConfig, apodized_sum, mla_line_plan
from .metrics import adjacent_correlation_profile
from .neural import (
    NetConfig,
    TrainConfig,
    TrainingSet,
    grad_check,
    make_check_sample,
    normalize_pair,
    train,
)
from .render import render_bmode_png
from .rx_frontend import build_iq_cube, iq_demodulate, sla_line_plan

__all__ = ["cli_run", "main"]


def _default_seed() -> int:
    return int(os.environ.get("MLA_FORGE_SEED", "0"))


def _load_config(path: str | None) -> AcquisitionConfig:
    if path is None:
        return AcquisitionConfig()
    return AcquisitionConfig.from_json(Path(path).read_text())


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mla-forge",
        description="Simulate phased-array acquisitions, decimate to MLA, "
        "train and evaluate the correction network.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize an SLA sweep for a phantom")
    p.add_argument("--out", required=True, help="output directory for RF frames")
    p.add_argument("--config", help="AcquisitionConfig JSON (defaults to paper scale)")
    p.add_argument("--phantom", choices=PHANTOM_KINDS, default="random_speckle")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--scatterers", type=int, default=200)
    p.add_argument("--noise-sigma", type=float, default=0.0)

    p = sub.add_parser("beamform", help="RF sweep -> SLA cube and Hann image")
    p.add_argument("--rf-dir", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("decimate", help="RF sweep -> m-MLA cube and uncorrected image")
    p.add_argument("--rf-dir", required=True)
    p.add_argument("--m", type=int, choices=(5, 7), required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("dataset", help="build a training dataset of cube/target pairs")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="AcquisitionConfig JSON (defaults to paper scale)")
    p.add_argument("--m", type=int, choices=(1, 5, 7), default=5)
    p.add_argument("--frames", type=int, default=80)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--scatterers", type=int, default=200)

    p = sub.add_parser("train", help="train the correction network on a dataset")
    p.add_argument("--data", required=True, help="dataset manifest JSON path")
    p.add_argument("--out", required=True, help="checkpoint output directory")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--base-channels", type=int, default=32)
    p.add_argument("--bifurcations", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("eval", help="report decorrelation and SSIM for a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--reference-m", type=int, default=5,
                   help="hypothetical group factor for D_c on m=1 datasets")
    p.add_argument("--dynamic-range", type=float, default=60.0)

    p = sub.add_parser("render", help="image tensor -> B-mode PNG with correlation plot")
    p.add_argument("--image", required=True, help="beamformed image .mlat path")
    p.add_argument("--out", required=True, help="output PNG path")
    p.add_argument("--dynamic-range", type=float, default=60.0)

    p = sub.add_parser("gradcheck", help="finite-difference check of the tiny network")
    p.add_argument("--elements", type=int, default=4)
    p.add_argument("--spatial", type=int, default=16)
    p.add_argument("--bifurcations", type=int, default=2)
    p.add_argument("--base-channels", type=int, default=4)
    p.add_argument("--coords", type=int, default=200)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=None)
    return parser


def _cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else _default_seed()
    phantom = make_phantom(args.phantom, seed, cfg, n_scatterers=args.scatterers)
    frames = simulate_sweep(cfg, phantom, noise_sigma=args.noise_sigma, noise_seed=seed)
    save_rf_sweep(
        args.out,
        cfg,
        frames,
        phantom_meta={
            "kind": args.phantom,
            "seed": seed,
            "n_scatterers": args.scatterers,
            "noise_sigma": args.noise_sigma,
        },
    )
    print(f"wrote {len(frames)} RF frames to {args.out}")
    return 0


def _beamform_common(rf_dir: str, out_dir: str, mla: MlaConfig) -> int:
    cfg, frames = load_rf_sweep(rf_dir)
    plan = mla_line_plan(cfg, mla) if mla.factor > 1 else sla_line_plan(cfg)
    needed = sorted({ev for _, ev in plan})
    missing = [ev for ev in needed if ev not in frames]
    if missing:
        raise ValueError(f"RF sweep is missing transmit events {missing}")
    iq = {ev: iq_demodulate(frames[ev], cfg) for ev in needed}
    cube = build_iq_cube(iq, plan, cfg)
    image = apodized_sum(cube, hann_window(cfg.element_count))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_cube(out / "cube.mlat", cube, cfg, plan, mla.factor)
    save_image(out / "image.mlat", image.data, image.provenance, mla.factor, cfg)
    print(f"wrote cube {cube.data.shape} and image to {out}")
    return 0


def _cmd_train(args) -> int:
    manifest_path = Path(args.data)
    manifest = load_manifest(manifest_path)
    base = manifest_path.parent
    inputs, targets, split_of = load_pairs(manifest, base, splits=("train", "val"))
    if not inputs:
        raise ValueError("dataset has no train/val samples")
    pairs = [normalize_pair(x, y) for x, y in zip(inputs, targets)]
    data = TrainingSet(
        inputs=[p[0] for p in pairs],
        targets=[p[1] for p in pairs],
        train_indices=[i for i, s in enumerate(split_of) if s == "train"],
        val_indices=[i for i, s in enumerate(split_of) if s == "val"],
    )
    net_cfg = NetConfig(
        input_channels=2 * manifest.config.element_count,
        bifurcations=args.bifurcations,
        conv_layers=2 * args.bifurcations,
        base_channels=args.base_channels,
    )
    seed = args.seed if args.seed is not None else _default_seed()
    train_cfg = TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        max_epochs=args.epochs,
        seed=seed,
    )
    params, history = train(data, net_cfg, train_cfg)
    out = Path(args.out)
    save_checkpoint(out, params, net_cfg)
    write_json(
        out / "history.json",
        {
            "train_config": asdict(train_cfg),
            "epochs": [asdict(h) for h in history],
        },
    )
    best = min(h.val_loss for h in history if not np.isnan(h.val_loss))
    print(f"trained {len(history) - 1} epochs; best validation L1 {best:.6g}")
    return 0


def _cmd_eval(args) -> int:
    manifest_path = Path(args.data)
    manifest = load_manifest(manifest_path)
    report = evaluate_split(
        manifest,
        manifest_path.parent,
        args.checkpoint,
        split=args.split,
        dynamic_range_db=args.dynamic_range,
        reference_factor=args.reference_m,
    )
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _cmd_render(args) -> int:
    data, meta = load_image_tensor(args.image)
    factor = int(meta.get("mla_factor", 1))
    img = BeamformedImage(
        data=data,
        provenance=meta.get("provenance", "sla"),
        mla=MlaConfig(factor=factor if factor % 2 == 1 else 1),
    )
    render_bmode_png(img, args.out, dynamic_range_db=args.dynamic_range)
    profile = adjacent_correlation_profile(img)
    print(f"wrote {args.out} (mean adjacent correlation {profile.rho.mean():.3f})")
    return 0


def _cmd_gradcheck(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    net_cfg = NetConfig(
        input_channels=2 * args.elements,
        bifurcations=args.bifurcations,
        conv_layers=2 * args.bifurcations,
        base_channels=args.base_channels,
        channel_cap=max(args.base_channels * 4, args.base_channels),
    )
    sample = make_check_sample(net_cfg, spatial=(args.spatial, args.spatial), seed=seed)
    report = grad_check(net_cfg, sample, tolerance=args.tolerance,
                        n_coords=args.coords, seed=seed)
    status = "PASS" if report.passed else "FAIL"
    print(
        f"gradcheck {status}: max relative error {report.max_rel_error:.3e} "
        f"over {report.coords_checked} coordinates (tolerance {report.tolerance:.1e})"
    )
    if not report.passed:
        print("analytic gradients disagree with finite differences", file=sys.stderr)
        return 2
    return 0


def _cmd_dataset(args) -> int:
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else _default_seed()
    manifest = build_dataset(
        cfg,
        MlaConfig(factor=args.m),
        n_frames=args.frames,
        seed_base=seed,
        out_dir=args.out,
        n_scatterers=args.scatterers,
    )
    counts = {s: len(manifest.split_entries(s)) for s in ("train", "val", "test")}
    print(f"wrote {len(manifest.entries)} samples to {args.out} (splits {counts})")
    return 0


def cli_run(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for usage problems; report usage as 1
        return 0 if exc.code == 0 else 1
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "beamform":
            return _beamform_common(args.rf_dir, args.out, MlaConfig(factor=1))
        if args.command == "decimate":
            return _beamform_common(args.rf_dir, args.out, MlaConfig(factor=args.m))
        if args.command == "dataset":
            return _cmd_dataset(args)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "render":
            return _cmd_render(args)
        if args.command == "gradcheck":
            return _cmd_gradcheck(args)
        parser.error(f"unknown command {args.command!r}")
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 1


def main() -> None:
    sys.exit(cli_run(sys.argv[1:]))
