#!/usr/bin/env python3
"""Perception-leaning super-resolution: step 2 with the adversarial term.

Trains a tiny x2 upscaler whose main branch minimizes pixel error and whose
tuning branch adds a Wasserstein critic with gradient penalty, so the
control value trades fidelity against the critic's notion of realism.
Desk-scale: expect direction, not photorealism.
"""

import argparse
from pathlib import Path

from controlres.model import ModelConfig, build_model
from controlres.degrade import DegradationSpec, make_texture_set, build_pairs
from controlres.train import LossConfig, TrainRun, train_step1, train_step2
from controlres.checkpoint import save_checkpoint
from controlres.evaluate import sweep_alpha


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=800)
    ap.add_argument("--out", default="demos/out/sr_adv")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    cfg = ModelConfig(task="sr", num_modules=2, channels=12, sr_scale=2,
                      control_dim=32, mapper_hidden=(32, 32, 32))
    spec = DegradationSpec(kind="bicubic_down", scale=2, seed=1)
    loss_cfg = LossConfig(step1_loss="mae", step2_loss="mae+adv",
                          adv_weight=0.01, gp_weight=10.0, spec_a=spec, spec_b=spec)
    images = make_texture_set(12, 64, seed=31)
    data = build_pairs(images, spec, patch=32, stride=16, seed=2)
    model = build_model(cfg, seed=0)

    print(f"step 1 (pixel loss), {args.steps} steps")
    run1 = TrainRun(step=1, iterations=args.steps, batch_size=8, lr=1e-3, seed=0)
    train_step1(model, data, loss_cfg, run1)
    print(f"  final mae {run1.loss_history[-1]:.4f}")

    print(f"step 2 (pixel + 0.01 adversarial), {args.steps} steps")
    run2 = TrainRun(step=2, iterations=args.steps, batch_size=8, lr=1e-4, seed=1)
    train_step2(model, data, loss_cfg, run2)
    print(f"  final gen loss {run2.loss_history[-1]:.4f}, "
          f"critic loss {run2.critic_history[-1]:.4f}")

    ckpt = out / "sr_adv.ckpt"
    save_checkpoint(model, ckpt, provenance={"steps": [1, 2], "adv": True})
    eval_imgs = make_texture_set(3, 64, seed=99)
    rep = sweep_alpha(model, eval_imgs, spec, [0.0, 0.25, 0.5, 0.75, 1.0])
    print("control -> PSNR (distortion endpoint is control 0):")
    for a, p in zip(rep.alphas, rep.mean_psnr):
        print(f"  {a:4.2f}  {p:6.2f} dB")
    print(f"saved {ckpt}")


if __name__ == "__main__":
    main()
