#!/usr/bin/env python3
"""Two-step training of a tiny controllable denoiser.

Step 1 trains the main branch on noise level 25 (control value 0); step 2
freezes it and trains the tuning branch plus coefficient mapper on noise
level 50 (control value 1). Also trains the fixed-coefficient ablation and
the second endpoint of the parameter-interpolation baseline so the
comparison demo has everything it needs.

Defaults are sized for a coffee-break run; pass --steps 8000 for the
full desk-scale protocol used by the acceptance suite.
"""

import argparse
import time
from pathlib import Path

from controlres.experiment import TrendSetup, run_seed


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="demos/out/denoiser")
    ap.add_argument("--steps", type=int, default=1500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--sigma-a", type=float, default=25.0)
    ap.add_argument("--sigma-b", type=float, default=50.0)
    args = ap.parse_args()

    setup = TrendSetup(sigma_a=args.sigma_a, sigma_b=args.sigma_b,
                       iterations=args.steps)
    out = Path(args.out)
    print(f"training 2x{args.steps} steps (+ ablation and baseline) -> {out}")
    t0 = time.perf_counter()
    paths = run_seed(setup, args.seed, out, with_sa=True, with_dni_b=True)
    print(f"done in {(time.perf_counter() - t0) / 60:.1f} min")
    for name, p in paths.items():
        print(f"  {name:9s} {p}")
    print("\nnext: python demos/04_control_sweep.py --ckpt", paths["adaptive"])


if __name__ == "__main__":
    main()
