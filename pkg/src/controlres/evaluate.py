"""Fidelity metrics and control-value sweeps.

A sweep degrades every dataset image once (seeded per image), restores it at
each grid value of the control variable and reports per-image and mean
PSNR/RMSE; the grid point with the highest mean PSNR is recorded as the best
operating point. Sweeps run in the three network modes (adaptive
coefficients, fixed-coefficient ablation, main branch only) plus the
parameter-interpolation baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import CfsModel, run_model, restore_image, dni_interpolate, param_checksum
from .degrade import DegradationSpec, degrade_image


def fidelity(pred: np.ndarray, target: np.ndarray):
    """(psnr_db, rmse) on the 0-255 scale; identical images report inf PSNR."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    rmse = float(np.sqrt(np.mean((pred - target) ** 2)))
    if rmse == 0.0:
        return math.inf, 0.0
    return 20.0 * math.log10(255.0 / rmse), rmse


@dataclass
class SweepReport:
    alphas: list
    mean_psnr: list
    mean_rmse: list
    psnr_matrix: list               # images x alphas
    best_alpha: float
    spec: dict = field(default_factory=dict)
    model_id: str = ""
    mode: str = "adaptive"

    def to_json_dict(self) -> dict:
        return {
            "alphas": self.alphas,
            "mean_psnr": [_jnum(v) for v in self.mean_psnr],
            "mean_rmse": self.mean_rmse,
            "psnr_matrix": [[_jnum(v) for v in row] for row in self.psnr_matrix],
            "best_alpha": self.best_alpha,
            "spec": self.spec,
            "model_id": self.model_id,
            "mode": self.mode,
        }

    def write_csv(self, fp):
        fp.write("alpha,mean_psnr,mean_rmse\n")
        for a, p, r in zip(self.alphas, self.mean_psnr, self.mean_rmse):
            fp.write(f"{a:g},{_csvnum(p)},{_csvnum(r)}\n")

    def write_per_image_csv(self, fp):
        fp.write("image,alpha,psnr\n")
        for i, row in enumerate(self.psnr_matrix):
            for a, p in zip(self.alphas, row):
                fp.write(f"{i},{a:g},{_csvnum(p)}\n")


def _jnum(v: float):
    return "inf" if math.isinf(v) else v


def _csvnum(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:.6f}"


def _eval_one(model: CfsModel, degraded, clean, alpha, mode):
    out = restore_image(model, degraded, alpha, mode)
    # SR padding can overshoot the original frame by up to scale-1 pixels
    out = out[:, : clean.shape[1], : clean.shape[2]]
    return fidelity(np.clip(out, 0.0, 255.0), clean)


def _report(alphas, psnr, rmse, spec, model_id, mode) -> SweepReport:
    mean_psnr = psnr.mean(axis=0)
    best = int(np.argmax(mean_psnr))
    return SweepReport(
        alphas=[float(a) for a in alphas],
        mean_psnr=[float(v) for v in mean_psnr],
        mean_rmse=[float(v) for v in rmse.mean(axis=0)],
        psnr_matrix=[[float(v) for v in row] for row in psnr],
        best_alpha=float(alphas[best]),
        spec=spec.to_dict(),
        model_id=model_id,
        mode=mode,
    )


def sweep_alpha(model: CfsModel, images, spec: DegradationSpec, alphas,
                mode: str = "adaptive") -> SweepReport:
    """Full deterministic sweep of the control variable over a dataset."""
    alphas = list(alphas)
    if not alphas:
        raise ValueError("alpha grid must be non-empty")
    spec.validate()
    psnr = np.zeros((len(images), len(alphas)))
    rmse = np.zeros_like(psnr)
    for i, clean in enumerate(images):
        degraded = degrade_image(clean, spec, salt=i)
        for j, a in enumerate(alphas):
            psnr[i, j], rmse[i, j] = _eval_one(model, degraded, clean, a, mode)
    return _report(alphas, psnr, rmse, spec, param_checksum(model)[:16], mode)


def sweep_dni(model_a: CfsModel, model_b: CfsModel, images, spec: DegradationSpec,
              alphas) -> SweepReport:
    """Sweep the parameter-interpolation baseline between two trained nets."""
    alphas = list(alphas)
    if not alphas:
        raise ValueError("alpha grid must be non-empty")
    spec.validate()
    psnr = np.zeros((len(images), len(alphas)))
    rmse = np.zeros_like(psnr)
    degraded = [degrade_image(img, spec, salt=i) for i, img in enumerate(images)]
    for j, a in enumerate(alphas):
        net = dni_interpolate(model_a, model_b, a)
        for i, clean in enumerate(images):
            psnr[i, j], rmse[i, j] = _eval_one(net, degraded[i], clean, a, "main")
    ident = f"{param_checksum(model_a)[:8]}+{param_checksum(model_b)[:8]}"
    return _report(alphas, psnr, rmse, spec, ident, "dni")


def compare_methods(model_cfs: CfsModel, model_sa: CfsModel, dni_pair,
                    images, spec: DegradationSpec, alphas) -> dict:
    """Adaptive model vs fixed-coefficient ablation vs parameter interpolation.

    Returns {method: SweepReport} over the same grid; serialize with
    :func:`comparison_to_csv` / :func:`comparison_to_json_dict` (rows ordered
    by method name, then alpha).
    """
    model_a, model_b = dni_pair
    if model_a.config.to_dict() != model_b.config.to_dict():
        raise ValueError("interpolation pair architectures differ")
    return {
        "adaptive": sweep_alpha(model_cfs, images, spec, alphas, mode="adaptive"),
        "dni": sweep_dni(model_a, model_b, images, spec, alphas),
        "sa": sweep_alpha(model_sa, images, spec, alphas, mode="sa"),
    }


def comparison_to_json_dict(reports: dict) -> dict:
    out = {name: reports[name].to_json_dict() for name in sorted(reports)}
    for name in sorted(reports):
        out[name]["best_psnr"] = _jnum(max(reports[name].mean_psnr))
    return out


def comparison_to_csv(fp, reports: dict):
    fp.write("method,alpha,mean_psnr,mean_rmse\n")
    for name in sorted(reports):
        rep = reports[name]
        for a, p, r in zip(rep.alphas, rep.mean_psnr, rep.mean_rmse):
            fp.write(f"{name},{a:g},{_csvnum(p)},{_csvnum(r)}\n")


def grid_unimodal(values, tol: float = 0.01) -> bool:
    """True if the curve has no interior strict local minimum (ties within
    ``tol`` do not count as dips)."""
    v = np.asarray(values, dtype=np.float64)
    for i in range(1, len(v) - 1):
        if v[i] < min(v[i - 1], v[i + 1]) - tol:
            return False
    return True
