"""Command-line interface.

Subcommands: train, restore, sweep, compare, export-coeffs, serve.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
Set CFS_LOG to control log verbosity (DEBUG/INFO/WARNING/...).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import degrade as D
from .model import ModelConfig, build_model, restore_image, write_coefficients_csv
from .degrade import DegradationSpec
from .train import LossConfig, TrainRun, train_step1, train_step2
from .evaluate import (sweep_alpha, compare_methods, comparison_to_csv,
                       comparison_to_json_dict, fidelity)
from .checkpoint import save_checkpoint, load_checkpoint

logger = logging.getLogger("controlres")


def parse_alphas(text: str) -> list:
    """Grid spec: 'start:stop:step' (inclusive) or comma-separated values."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("alpha range must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step == 0:
            return [start]
        n = int(round((stop - start) / step)) + 1
        if n < 1:
            raise ValueError("empty alpha range")
        return [round(start + i * step, 10) for i in range(n)]
    return [float(p) for p in text.split(",")]


def _load_dataset(path) -> list:
    return D.load_images(path)


def _load_spec(path) -> DegradationSpec:
    return DegradationSpec.from_dict(json.loads(Path(path).read_text()))


def _dataset_from_config(data_cfg: dict, channels: int) -> list:
    if data_cfg.get("dir"):
        return D.load_images(data_cfg["dir"])
    return D.make_texture_set(
        count=data_cfg.get("textures", 24),
        size=data_cfg.get("texture_size", 96),
        seed=data_cfg.get("texture_seed", 5),
        channels=channels,
    )


def cmd_train(args) -> int:
    cfg = json.loads(Path(args.config).read_text())
    model_cfg = ModelConfig.from_dict(cfg["model"])
    if model_cfg.task != args.task:
        raise ValueError(f"config task {model_cfg.task!r} != --task {args.task!r}")
    loss_d = cfg.get("loss", {})
    loss_cfg = LossConfig(
        step1_loss=loss_d.get("step1_loss", "mae"),
        step2_loss=loss_d.get("step2_loss", "mae"),
        adv_weight=loss_d.get("adv_weight", 0.01),
        gp_weight=loss_d.get("gp_weight", 10.0),
        spec_a=DegradationSpec.from_dict(cfg["degrade_a"]),
        spec_b=DegradationSpec.from_dict(cfg["degrade_b"]),
    ).validate()
    run_d = cfg.get("run", {})
    run = TrainRun(
        step=args.step,
        iterations=run_d.get("iterations", 2000),
        batch_size=run_d.get("batch_size", 16),
        lr=run_d.get("lr", 1e-4),
        lr_decay=run_d.get("lr_decay", 0.1),
        decay_interval=run_d.get("decay_interval"),
        seed=run_d.get("seed", 0),
    )

    images = _dataset_from_config(cfg.get("data", {}), model_cfg.image_channels)
    patch = cfg.get("patch", 40)
    stride = cfg.get("stride", 10)
    pair_seed = cfg.get("pair_seed", 11)

    if args.step == 1:
        model = build_model(model_cfg, seed=run.seed)
        data = D.build_pairs(images, loss_cfg.spec_a, patch, stride, seed=pair_seed)
        logger.info("step 1: %d pairs, %d iterations", len(data), run.iterations)
        train_step1(model, data, loss_cfg, run, log_path=args.log)
        prov = {"steps": [1], "spec_a": loss_cfg.spec_a.to_dict(),
                "iterations_step1": run.iterations, "seed": run.seed}
    else:
        init = args.init or cfg.get("init_checkpoint")
        if not init:
            raise ValueError("step 2 needs --init (or init_checkpoint in the config)")
        model = load_checkpoint(init)
        if model.config.to_dict() != model_cfg.to_dict():
            raise ValueError("checkpoint architecture differs from the config")
        data = D.build_pairs(images, loss_cfg.spec_b, patch, stride, seed=pair_seed)
        logger.info("step 2: %d pairs, %d iterations%s", len(data), run.iterations,
                    " (fixed coefficients)" if args.sa else "")
        train_step2(model, data, loss_cfg, run, sa=args.sa, log_path=args.log)
        prov = dict(model.provenance)
        prov["steps"] = sorted(set(prov.get("steps", [])) | {2})
        prov.update({"spec_b": loss_cfg.spec_b.to_dict(),
                     "iterations_step2": run.iterations,
                     "step2_loss": loss_cfg.step2_loss, "sa": args.sa})
    save_checkpoint(model, args.out, provenance=prov)
    print(f"saved checkpoint to {args.out}")
    return 0


def cmd_restore(args) -> int:
    model = load_checkpoint(args.ckpt)
    img = D.read_image(args.input)
    out = restore_image(model, img, args.alpha, mode=args.mode)
    D.write_image(args.output, out)
    line = f"alpha={args.alpha:g} -> {args.output}"
    if args.gt:
        gt = D.read_image(args.gt)
        psnr, rmse = fidelity(np.clip(out, 0, 255), gt)
        line += f" psnr={psnr:.4f} rmse={rmse:.4f}"
    print(line)
    return 0


def cmd_sweep(args) -> int:
    model = load_checkpoint(args.ckpt)
    images = _load_dataset(args.dataset)
    spec = _load_spec(args.spec)
    report = sweep_alpha(model, images, spec, parse_alphas(args.alphas), mode=args.mode)
    Path(args.out).write_text(json.dumps(report.to_json_dict(), indent=2))
    if args.csv:
        with open(args.csv, "w") as fp:
            report.write_csv(fp)
    if args.per_image_csv:
        with open(args.per_image_csv, "w") as fp:
            report.write_per_image_csv(fp)
    print(f"best_alpha={report.best_alpha:g} "
          f"best_psnr={max(report.mean_psnr):.4f} -> {args.out}")
    return 0


def cmd_compare(args) -> int:
    model = load_checkpoint(args.ckpt)
    model_sa = load_checkpoint(args.sa_ckpt)
    pair = (load_checkpoint(args.dni_a), load_checkpoint(args.dni_b))
    images = _load_dataset(args.dataset)
    spec = _load_spec(args.spec)
    reports = compare_methods(model, model_sa, pair, images, spec,
                              parse_alphas(args.alphas))
    Path(args.out).write_text(json.dumps(comparison_to_json_dict(reports), indent=2))
    if args.csv:
        with open(args.csv, "w") as fp:
            comparison_to_csv(fp, reports)
    for name in sorted(reports):
        rep = reports[name]
        print(f"{name}: best_alpha={rep.best_alpha:g} best_psnr={max(rep.mean_psnr):.4f}")
    return 0


def cmd_export_coeffs(args) -> int:
    model = load_checkpoint(args.ckpt)
    with open(args.out, "w") as fp:
        table = write_coefficients_csv(fp, model, parse_alphas(args.alphas))
    print(f"wrote {table.shape[0]}x{table.shape[1]}x{table.shape[2]} table to {args.out}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    model = load_checkpoint(args.ckpt)
    serve(model, port=args.port, host=args.host, max_pixels=args.max_pixels,
          ui_dir=args.ui_dir)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="controlres",
        description="Controllable image restoration: train, restore, sweep, serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run one training step")
    p.add_argument("--task", required=True, choices=["denoise", "deblock", "sr"])
    p.add_argument("--step", required=True, type=int, choices=[1, 2])
    p.add_argument("--config", required=True, help="JSON training config")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--init", help="input checkpoint (step 2)")
    p.add_argument("--sa", action="store_true",
                   help="step 2 ablation: fixed coefficients, mapper untrained")
    p.add_argument("--log", help="JSON-lines training log path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("restore", help="restore one image at a control value")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--alpha", required=True, type=float)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--gt", help="ground truth image for PSNR")
    p.add_argument("--mode", default="adaptive", choices=["adaptive", "sa", "main"])
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("sweep", help="PSNR curve over a control-value grid")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--alphas", required=True, help="start:stop:step or comma list")
    p.add_argument("--dataset", required=True, help="image dir or JSON manifest")
    p.add_argument("--spec", required=True, help="degradation spec JSON file")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--csv", help="also write a summary CSV")
    p.add_argument("--per-image-csv", help="long-form per-image CSV")
    p.add_argument("--mode", default="adaptive", choices=["adaptive", "sa", "main"])
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="adaptive vs fixed-coefficient vs interpolation")
    p.add_argument("--ckpt", required=True, help="adaptive model")
    p.add_argument("--sa-ckpt", required=True, help="fixed-coefficient model")
    p.add_argument("--dni-a", required=True, help="interpolation endpoint A")
    p.add_argument("--dni-b", required=True, help="interpolation endpoint B")
    p.add_argument("--dataset", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--alphas", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-coeffs", help="coupling coefficient table as CSV")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--alphas", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_coeffs)

    p = sub.add_parser("serve", help="HTTP restoration service")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--max-pixels", type=int, default=1024 * 1024)
    p.add_argument("--ui-dir", help="static UI bundle served under /ui")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("CFS_LOG", "INFO").upper(),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args) or 0
    except KeyboardInterrupt:
        return 130
    except Exception as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
