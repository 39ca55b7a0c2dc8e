#!/usr/bin/env python3
"""Sweep the control variable on degraded images and chart PSNR vs control.

Reproduces the one-curve view of the control mechanism: degrade held-out
images at a level the model never saw, restore at each grid value, and find
the interior optimum. Writes report JSON + CSV and (if matplotlib is around)
a PNG plot.
"""

import argparse
import json
from pathlib import Path

from controlres.checkpoint import load_checkpoint
from controlres.degrade import DegradationSpec
from controlres.evaluate import sweep_alpha
from controlres.experiment import TrendSetup, evaluation_images, trend_margins


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--ckpt", default="demos/out/denoiser/adaptive.ckpt")
    ap.add_argument("--sigma", type=float, default=30.0)
    ap.add_argument("--alphas", default="-0.2:1.2:0.1")
    ap.add_argument("--out", default="demos/out/sweep")
    args = ap.parse_args()

    from controlres.cli import parse_alphas
    grid = parse_alphas(args.alphas)
    model = load_checkpoint(args.ckpt)
    images = evaluation_images(TrendSetup())
    spec = DegradationSpec(kind="awgn", sigma=args.sigma, seed=23)
    report = sweep_alpha(model, images, spec, grid)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report.to_json_dict(), indent=2))
    with open(out / "report.csv", "w") as fp:
        report.write_csv(fp)

    print(f"noise {args.sigma:g}: control -> mean PSNR")
    for a, p in zip(report.alphas, report.mean_psnr):
        marker = "  <- best" if a == report.best_alpha else ""
        print(f"  {a:+.2f}  {p:6.2f} dB{marker}")
    print(json.dumps(trend_margins(report), indent=2))

    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.plot(report.alphas, report.mean_psnr, "o-")
        ax.axvline(report.best_alpha, ls="--", c="gray")
        ax.set_xlabel("control value")
        ax.set_ylabel("mean PSNR (dB)")
        ax.set_title(f"noise {args.sigma:g} (unseen)")
        fig.tight_layout()
        fig.savefig(out / "curve.png", dpi=120)
        print(f"plot: {out}/curve.png")
    except ImportError:
        pass


if __name__ == "__main__":
    main()
