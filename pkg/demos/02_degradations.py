#!/usr/bin/env python3
"""Synthesize every degradation on a procedural texture and report PSNRs.

Writes the clean image and each degraded variant as PGM files so they can be
inspected (or uploaded to the control UI).
"""

import argparse
from pathlib import Path

from controlres import degrade as D
from controlres.evaluate import fidelity


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="demos/out/degradations")
    ap.add_argument("--size", type=int, default=128)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    clean = D.make_texture(args.size, seed=42)
    D.write_image(out / "clean.pgm", clean)
    variants = {
        "awgn_s25.pgm": D.add_awgn(clean, 25.0, seed=1),
        "awgn_s50.pgm": D.add_awgn(clean, 50.0, seed=1),
        "jpeg_q10.pgm": D.jpeg_degrade(clean, 10),
        "jpeg_q40.pgm": D.jpeg_degrade(clean, 40),
        "blur_17_2.6.pgm": D.gaussian_blur(clean, 17, 2.6),
        "bicubic_x4_down_up.pgm": D.bicubic_resize(
            D.bicubic_resize(clean, 1, 4), 4, 1),
    }
    print(f"{'variant':28s} psnr(dB)   rmse")
    for name, img in variants.items():
        crop = img[:, : clean.shape[1], : clean.shape[2]]
        psnr, rmse = fidelity(crop.clip(0, 255), clean[:, : crop.shape[1], : crop.shape[2]])
        D.write_image(out / name, img)
        print(f"{name:28s} {psnr:7.2f} {rmse:8.2f}")
    print(f"\nfiles in {out}/")


if __name__ == "__main__":
    main()
