#!/usr/bin/env python3
"""Adaptive coefficients vs fixed coefficients vs parameter interpolation.

Evaluates all three control strategies on the same held-out degradation and
prints their curves side by side (plus a PNG chart when matplotlib exists).
Expects the checkpoints from demos/03.
"""

import argparse
import json
from pathlib import Path

from controlres.checkpoint import load_checkpoint
from controlres.degrade import DegradationSpec
from controlres.evaluate import compare_methods, comparison_to_csv, comparison_to_json_dict
from controlres.experiment import TrendSetup, evaluation_images


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dir", default="demos/out/denoiser")
    ap.add_argument("--sigma", type=float, default=30.0)
    ap.add_argument("--out", default="demos/out/comparison")
    args = ap.parse_args()

    d = Path(args.dir)
    model = load_checkpoint(d / "adaptive.ckpt")
    model_sa = load_checkpoint(d / "sa.ckpt")
    pair = (load_checkpoint(d / "main.ckpt"), load_checkpoint(d / "dni_b.ckpt"))
    images = evaluation_images(TrendSetup())
    spec = DegradationSpec(kind="awgn", sigma=args.sigma, seed=23)
    grid = [round(0.1 * i, 1) for i in range(11)]
    reports = compare_methods(model, model_sa, pair, images, spec, grid)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "comparison.json").write_text(
        json.dumps(comparison_to_json_dict(reports), indent=2))
    with open(out / "comparison.csv", "w") as fp:
        comparison_to_csv(fp, reports)

    print(f"{'control':>8s} " + " ".join(f"{m:>9s}" for m in sorted(reports)))
    for i, a in enumerate(grid):
        row = " ".join(f"{reports[m].mean_psnr[i]:9.2f}" for m in sorted(reports))
        print(f"{a:8.1f} {row}")
    for m in sorted(reports):
        rep = reports[m]
        print(f"{m}: best control {rep.best_alpha:g} -> {max(rep.mean_psnr):.2f} dB")

    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(5.5, 3.4))
        for m in sorted(reports):
            ax.plot(grid, reports[m].mean_psnr, "o-", label=m)
        ax.set_xlabel("control value")
        ax.set_ylabel("mean PSNR (dB)")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out / "comparison.png", dpi=120)
        print(f"plot: {out}/comparison.png")
    except ImportError:
        pass


if __name__ == "__main__":
    main()
