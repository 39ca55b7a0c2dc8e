import io
import json
import math

import numpy as np
import pytest

from controlres.model import ModelConfig, build_model, restore_image
from controlres.degrade import DegradationSpec, make_texture_set, degrade_image
from controlres.evaluate import (fidelity, sweep_alpha, sweep_dni, compare_methods,
                                 comparison_to_csv, comparison_to_json_dict,
                                 grid_unimodal, SweepReport)

TINY = dict(task="denoise", num_modules=2, channels=4, control_dim=8,
            mapper_hidden=(8, 8, 8))


def tiny_model(seed=0):
    return build_model(ModelConfig(**TINY), seed=seed)


class TestFidelity:
    def test_identical_images_report_infinite_psnr(self):
        img = make_texture_set(1, 16, seed=0)[0]
        psnr, rmse = fidelity(img, img)
        assert math.isinf(psnr) and rmse == 0.0

    def test_unit_rmse_closed_form(self):
        a = np.zeros((1, 10, 10))
        psnr, rmse = fidelity(a + 1.0, a)
        assert rmse == 1.0
        assert abs(psnr - 48.1308) < 1e-4  # 20*log10(255)

    def test_rmse_ten_closed_form(self):
        a = np.zeros((1, 10, 10))
        psnr, rmse = fidelity(a + 10.0, a)
        assert rmse == 10.0
        assert abs(psnr - 28.1308) < 1e-4

    def test_symmetric_and_shift_invariant(self):
        rng = np.random.default_rng(1)
        a = rng.uniform(0, 255, (1, 12, 12))
        b = rng.uniform(0, 255, (1, 12, 12))
        pab, _ = fidelity(a, b)
        pba, _ = fidelity(b, a)
        assert abs(pab - pba) < 1e-12
        pshift, _ = fidelity(a + 3.0, b + 3.0)
        assert abs(pab - pshift) < 1e-9

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            fidelity(np.zeros((1, 4, 4)), np.zeros((1, 4, 5)))


class TestSweep:
    def test_single_entry_grid_matches_main_branch(self):
        model = tiny_model()
        images = make_texture_set(2, 32, seed=3)
        spec = DegradationSpec(kind="awgn", sigma=15.0, seed=7)
        rep = sweep_alpha(model, images, spec, [0.0])
        assert rep.alphas == [0.0] and rep.best_alpha == 0.0
        # alpha=0 entry equals the main-branch-only evaluation to the last bit
        ref = sweep_alpha(model, images, spec, [0.0], mode="main")
        assert rep.mean_psnr == ref.mean_psnr
        assert rep.psnr_matrix == ref.psnr_matrix

    def test_reproducible(self):
        model = tiny_model()
        images = make_texture_set(2, 32, seed=4)
        spec = DegradationSpec(kind="awgn", sigma=20.0, seed=8)
        grid = [0.0, 0.5, 1.0]
        a = sweep_alpha(model, images, spec, grid)
        b = sweep_alpha(model, images, spec, grid)
        assert a.psnr_matrix == b.psnr_matrix and a.best_alpha == b.best_alpha

    def test_negative_grid_supported(self):
        model = tiny_model()
        images = make_texture_set(1, 24, seed=5)
        spec = DegradationSpec(kind="awgn", sigma=10.0, seed=9)
        rep = sweep_alpha(model, images, spec, [-0.3, 0.0, 0.3])
        assert rep.alphas[0] == -0.3
        assert np.isfinite(rep.mean_psnr).all()

    def test_matrix_dimensions_and_best_alpha_invariant(self):
        model = tiny_model()
        images = make_texture_set(3, 24, seed=6)
        spec = DegradationSpec(kind="awgn", sigma=10.0, seed=10)
        grid = [0.0, 0.25, 0.5]
        rep = sweep_alpha(model, images, spec, grid)
        assert len(rep.psnr_matrix) == 3
        assert all(len(row) == 3 for row in rep.psnr_matrix)
        assert rep.best_alpha in grid
        best_idx = grid.index(rep.best_alpha)
        assert rep.mean_psnr[best_idx] == max(rep.mean_psnr)

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            sweep_alpha(tiny_model(), make_texture_set(1, 24, seed=0),
                        DegradationSpec(), [])

    def test_json_and_csv_serialization(self):
        model = tiny_model()
        images = make_texture_set(1, 24, seed=7)
        spec = DegradationSpec(kind="awgn", sigma=5.0, seed=11)
        rep = sweep_alpha(model, images, spec, [0.0, 1.0])
        d = rep.to_json_dict()
        json.dumps(d)  # must be strictly serializable
        buf = io.StringIO()
        rep.write_csv(buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "alpha,mean_psnr,mean_rmse"
        assert len(lines) == 3

    def test_infinite_psnr_serialized_as_inf_string(self):
        rep = SweepReport(alphas=[0.0], mean_psnr=[math.inf], mean_rmse=[0.0],
                          psnr_matrix=[[math.inf]], best_alpha=0.0)
        assert rep.to_json_dict()["mean_psnr"] == ["inf"]
        buf = io.StringIO()
        rep.write_csv(buf)
        assert "inf" in buf.getvalue().splitlines()[1]


class TestCompare:
    def test_structure_and_ordering(self):
        model = tiny_model(seed=1)
        model_sa = tiny_model(seed=2)
        pair = (tiny_model(seed=3), tiny_model(seed=4))
        images = make_texture_set(1, 24, seed=8)
        spec = DegradationSpec(kind="awgn", sigma=10.0, seed=12)
        grid = [0.0, 0.5, 1.0]
        reports = compare_methods(model, model_sa, pair, images, spec, grid)
        assert set(reports) == {"adaptive", "sa", "dni"}
        assert all(reports[k].alphas == grid for k in reports)
        buf = io.StringIO()
        comparison_to_csv(buf, reports)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "method,alpha,mean_psnr,mean_rmse"
        methods = [ln.split(",")[0] for ln in lines[1:]]
        assert methods == ["adaptive"] * 3 + ["dni"] * 3 + ["sa"] * 3
        json.dumps(comparison_to_json_dict(reports))

    def test_dni_alpha0_equals_network_a_standalone(self):
        a, b = tiny_model(seed=5), tiny_model(seed=6)
        images = make_texture_set(2, 24, seed=9)
        spec = DegradationSpec(kind="awgn", sigma=10.0, seed=13)
        rep = sweep_dni(a, b, images, spec, [0.0, 0.5])
        standalone = sweep_alpha(a, images, spec, [0.0], mode="main")
        assert rep.mean_psnr[0] == standalone.mean_psnr[0]

    def test_dni_architecture_mismatch_rejected(self):
        a = tiny_model()
        b = build_model(ModelConfig(**{**TINY, "num_modules": 3}), seed=0)
        images = make_texture_set(1, 24, seed=0)
        with pytest.raises(ValueError):
            compare_methods(a, a, (a, b), images, DegradationSpec(), [0.0])


class TestUnimodal:
    def test_accepts_concave_curve(self):
        assert grid_unimodal([1.0, 2.0, 3.0, 2.5, 2.0])

    def test_accepts_monotone(self):
        assert grid_unimodal([1.0, 2.0, 3.0])

    def test_rejects_interior_dip(self):
        assert not grid_unimodal([3.0, 1.0, 3.0])

    def test_tolerates_small_ties(self):
        assert grid_unimodal([2.0, 1.995, 2.0], tol=0.01)
        assert not grid_unimodal([2.0, 1.94, 2.0], tol=0.01)


class TestSrSweep:
    def test_sr_restores_and_scores(self):
        cfg = ModelConfig(task="sr", num_modules=2, channels=4, sr_scale=2,
                          control_dim=8, mapper_hidden=(8, 8, 8))
        model = build_model(cfg, seed=0)
        images = make_texture_set(1, 24, seed=10)
        spec = DegradationSpec(kind="bicubic_down", scale=2, seed=0)
        rep = sweep_alpha(model, images, spec, [0.0, 1.0])
        assert np.isfinite(rep.mean_psnr).all()
        lr = degrade_image(images[0], spec)
        out = restore_image(model, lr, 0.0)
        assert out.shape[-1] == 24
