"""Desk-scale reference experiment.

Train both endpoints of a tiny gray denoiser (noise 20 for the main branch,
noise 40 for the tuning branch), then sweep the control variable on images
degraded at an unseen intermediate level (noise 30). A healthy run shows a
single-peaked PSNR curve whose best control value lies strictly inside
(0, 1) and beats both endpoints; the fixed-coefficient ablation and the
parameter-interpolation baseline are trained/evaluated under the same
protocol for comparison.

Everything is deterministic per seed, and seeds are independent, so several
seeds can train in parallel worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from pathlib import Path

from .model import build_model, ModelConfig
from .degrade import DegradationSpec, make_texture_set, build_pairs
from .train import LossConfig, TrainRun, train_step1, train_step2
from .evaluate import sweep_alpha, sweep_dni, SweepReport
from .checkpoint import save_checkpoint, load_checkpoint


@dataclass
class TrendSetup:
    sigma_a: float = 20.0          # step-1 endpoint noise level
    sigma_b: float = 40.0          # step-2 endpoint noise level
    sigma_test: float = 30.0       # held-out evaluation level
    modules: int = 3
    channels: int = 16
    control_dim: int = 64
    mapper_hidden: tuple = (64, 64, 64)
    patch: int = 24
    stride: int = 12
    train_images: int = 48
    image_size: int = 96
    data_seed: int = 5
    eval_images: int = 6
    eval_seed: int = 900
    iterations: int = 8000
    batch_size: int = 6
    lr: float = 1e-3
    lr_decay: float = 0.25
    # denoising reference settings keep one loss for both steps; MSE trains
    # sharper level-specific filters than MAE
    loss: str = "mse"
    # each clean image enters the patch set this many times with independent
    # noise fields; frozen single-instance noise trains weaker, less
    # level-specific denoisers
    noise_replicas: int = 8
    grid: tuple = tuple(round(0.1 * i, 1) for i in range(11))

    def model_config(self) -> ModelConfig:
        return ModelConfig(task="denoise", num_modules=self.modules,
                           channels=self.channels, control_dim=self.control_dim,
                           mapper_hidden=self.mapper_hidden)

    def spec_a(self) -> DegradationSpec:
        return DegradationSpec(kind="awgn", sigma=self.sigma_a, seed=21)

    def spec_b(self) -> DegradationSpec:
        return DegradationSpec(kind="awgn", sigma=self.sigma_b, seed=22)

    def spec_test(self) -> DegradationSpec:
        return DegradationSpec(kind="awgn", sigma=self.sigma_test, seed=23)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mapper_hidden"] = list(self.mapper_hidden)
        d["grid"] = list(self.grid)
        return d


def training_images(setup: TrendSetup):
    return make_texture_set(setup.train_images, setup.image_size, seed=setup.data_seed)


def evaluation_images(setup: TrendSetup):
    return make_texture_set(setup.eval_images, setup.image_size, seed=setup.eval_seed)


def _run(setup: TrendSetup, seed: int, step: int) -> TrainRun:
    return TrainRun(step=step, iterations=setup.iterations,
                    batch_size=setup.batch_size, lr=setup.lr,
                    lr_decay=setup.lr_decay, seed=seed)


def run_seed(setup: TrendSetup, seed: int, out_dir, with_sa: bool = True,
             with_dni_b: bool = False) -> dict:
    """Train one seed of the protocol; returns {name: checkpoint path}.

    Writes main.ckpt (after step 1), adaptive.ckpt (after step 2), and
    optionally sa.ckpt (fixed-coefficient step 2 from the same step-1 state)
    and dni_b.ckpt (a main-branch-only net trained on the second endpoint,
    the other half of the interpolation baseline).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    images = training_images(setup) * max(setup.noise_replicas, 1)
    cfg = LossConfig(step1_loss=setup.loss, step2_loss=setup.loss,
                     spec_a=setup.spec_a(), spec_b=setup.spec_b())
    data_a = build_pairs(images, cfg.spec_a, setup.patch, setup.stride, seed=31)
    data_b = build_pairs(images, cfg.spec_b, setup.patch, setup.stride, seed=32)
    paths = {}

    model = build_model(setup.model_config(), seed=seed)
    run1 = train_step1(model, data_a, cfg, _run(setup, seed, 1))
    paths["main"] = out_dir / "main.ckpt"
    save_checkpoint(model, paths["main"], provenance={
        "steps": [1], "seed": seed, "spec_a": cfg.spec_a.to_dict(),
        "final_loss_step1": run1.loss_history[-1], "setup": setup.to_dict()})

    adaptive = load_checkpoint(paths["main"])
    run2 = train_step2(adaptive, data_b, cfg, _run(setup, seed + 1000, 2))
    paths["adaptive"] = out_dir / "adaptive.ckpt"
    save_checkpoint(adaptive, paths["adaptive"], provenance={
        "steps": [1, 2], "seed": seed, "spec_b": cfg.spec_b.to_dict(),
        "final_loss_step2": run2.loss_history[-1]})

    if with_sa:
        sa_model = load_checkpoint(paths["main"])
        train_step2(sa_model, data_b, cfg, _run(setup, seed + 1000, 2), sa=True)
        paths["sa"] = out_dir / "sa.ckpt"
        save_checkpoint(sa_model, paths["sa"], provenance={
            "steps": [1, 2], "seed": seed, "sa": True})

    if with_dni_b:
        b_model = build_model(setup.model_config(), seed=seed + 5000)
        cfg_b = LossConfig(spec_a=cfg.spec_b, spec_b=cfg.spec_b)
        train_step1(b_model, data_b, cfg_b, _run(setup, seed, 1))
        paths["dni_b"] = out_dir / "dni_b.ckpt"
        save_checkpoint(b_model, paths["dni_b"], provenance={
            "steps": [1], "seed": seed + 5000, "endpoint": "b"})

    return {k: str(v) for k, v in paths.items()}


def sweep_seed(setup: TrendSetup, paths: dict) -> dict:
    """Evaluate one trained seed on the held-out level; {name: SweepReport}."""
    images = evaluation_images(setup)
    spec = setup.spec_test()
    grid = list(setup.grid)
    out = {"adaptive": sweep_alpha(load_checkpoint(paths["adaptive"]), images,
                                   spec, grid, mode="adaptive")}
    if "sa" in paths:
        out["sa"] = sweep_alpha(load_checkpoint(paths["sa"]), images, spec,
                                grid, mode="sa")
    if "dni_b" in paths:
        out["dni"] = sweep_dni(load_checkpoint(paths["main"]),
                               load_checkpoint(paths["dni_b"]), images, spec, grid)
    return out


def trend_margins(report: SweepReport) -> dict:
    """Summary of one curve: best point and its margin over both endpoints."""
    psnr = report.mean_psnr
    best_idx = psnr.index(max(psnr))
    return {
        "best_alpha": report.best_alpha,
        "best_psnr": psnr[best_idx],
        "endpoint_low": psnr[0],
        "endpoint_high": psnr[-1],
        "margin": psnr[best_idx] - max(psnr[0], psnr[-1]),
        "interior": 0 < best_idx < len(psnr) - 1,
    }
