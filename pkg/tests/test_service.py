import base64
import json
import threading
import urllib.request
import urllib.error

import numpy as np
import pytest

from controlres import degrade as D
from controlres.model import ModelConfig, build_model, restore_image
from controlres.service import make_server

TINY = dict(task="denoise", num_modules=2, channels=6, control_dim=8,
            mapper_hidden=(8, 8, 8))


@pytest.fixture(scope="module")
def server():
    model = build_model(ModelConfig(**TINY), seed=3)
    model.provenance = {"steps": [1, 2]}
    srv = make_server(model, port=0, max_pixels=64 * 64)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{srv.server_address[1]}"
    yield base, model
    srv.shutdown()
    srv.server_close()


def get(base, path):
    try:
        with urllib.request.urlopen(base + path) as resp:
            return resp.status, json.loads(resp.read().decode())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read().decode())


def post(base, path, payload):
    body = json.dumps(payload).encode()
    req = urllib.request.Request(base + path, data=body,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read().decode())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read().decode())


def b64_pgm(img):
    return base64.b64encode(D.write_image_bytes(img, "pgm")).decode()


def sample_image(size=24, seed=1):
    return D.to_uint8(D.make_texture(size, seed=seed)).astype(np.float32)


class TestGetEndpoints:
    def test_health(self, server):
        base, _ = server
        status, body = get(base, "/health")
        assert status == 200 and body == {"status": "ok"}

    def test_model_info(self, server):
        base, model = server
        status, body = get(base, "/model")
        assert status == 200
        assert body["config"]["num_modules"] == 2
        assert body["provenance"]["steps"] == [1, 2]
        assert body["model_id"]

    def test_coeffs_shape(self, server):
        base, model = server
        status, body = get(base, "/coeffs?alpha=0.5")
        assert status == 200
        assert len(body["coefficients"]) == 2          # M vectors
        assert all(len(v) == 6 for v in body["coefficients"])  # length C

    def test_coeffs_zero_alpha_is_zero(self, server):
        base, _ = server
        _, body = get(base, "/coeffs?alpha=0")
        assert all(v == 0.0 for row in body["coefficients"] for v in row)

    def test_coeffs_missing_alpha_is_400(self, server):
        base, _ = server
        status, _ = get(base, "/coeffs")
        assert status == 400

    def test_unknown_route_404(self, server):
        base, _ = server
        status, _ = get(base, "/nope")
        assert status == 404


class TestRestore:
    def test_alpha0_equals_main_branch_output(self, server):
        base, model = server
        img = sample_image()
        status, body = post(base, "/restore", {"image": b64_pgm(img), "alpha_in": 0.0})
        assert status == 200
        assert body["alpha_in"] == 0.0 and body["model_id"]
        returned = D.read_image_bytes(base64.b64decode(body["image"]))
        expected = D.to_uint8(restore_image(model, img, 0.0, mode="main")).astype(np.float32)
        assert np.array_equal(returned, expected)

    def test_psnr_present_with_ground_truth(self, server):
        base, _ = server
        clean = sample_image(seed=2)
        noisy = D.to_uint8(D.add_awgn(clean, 20.0, seed=3)).astype(np.float32)
        status, body = post(base, "/restore", {
            "image": b64_pgm(noisy), "alpha_in": 0.25, "ground_truth": b64_pgm(clean)})
        assert status == 200
        assert isinstance(body["psnr"], float) and body["rmse"] > 0
        assert body["time_ms"] >= 0

    def test_alpha_not_clamped_server_side(self, server):
        # extrapolation below the trained range is a feature
        base, _ = server
        img = sample_image(seed=9)
        status, body = post(base, "/restore", {"image": b64_pgm(img), "alpha_in": -0.3})
        assert status == 200 and body["alpha_in"] == -0.3

    def test_nan_alpha_rejected_400(self, server):
        base, _ = server
        img = sample_image()
        for bad in ["NaN", float("nan"), float("inf"), None, "0.5"]:
            payload = json.loads(json.dumps({"image": b64_pgm(img)}))
            payload["alpha_in"] = bad
            status, body = post(base, "/restore", payload)
            assert status == 400, bad
            assert "error" in body

    def test_undecodable_image_400(self, server):
        base, _ = server
        status, body = post(base, "/restore", {
            "image": base64.b64encode(b"not an image").decode(), "alpha_in": 0.0})
        assert status == 400 and "error" in body

    def test_invalid_base64_400(self, server):
        base, _ = server
        status, _ = post(base, "/restore", {"image": "!!!", "alpha_in": 0.0})
        assert status == 400

    def test_oversized_image_413(self, server):
        base, _ = server
        big = np.zeros((1, 80, 80), dtype=np.float32)  # above the 64*64 cap
        status, body = post(base, "/restore", {"image": b64_pgm(big), "alpha_in": 0.0})
        assert status == 413

    def test_wrong_channel_count_400(self, server):
        base, _ = server
        rgb = D.to_uint8(D.make_texture(16, seed=5, channels=3)).astype(np.float32)
        status, _ = post(base, "/restore", {"image": b64_pgm(rgb), "alpha_in": 0.0})
        assert status == 400

    def test_missing_body_400(self, server):
        base, _ = server
        status, _ = post(base, "/restore", {})
        assert status == 400

    def test_concurrent_identical_requests_identical_outputs(self, server):
        base, _ = server
        img = sample_image(seed=6)
        payload = {"image": b64_pgm(img), "alpha_in": 0.4}
        results = [None] * 4
        def hit(i):
            results[i] = post(base, "/restore", payload)
        threads = [threading.Thread(target=hit, args=(i,)) for i in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert all(r[0] == 200 for r in results)
        images = {r[1]["image"] for r in results}
        assert len(images) == 1


class TestSweepEndpoint:
    def test_sweep_over_uploaded_images(self, server):
        base, _ = server
        imgs = [b64_pgm(sample_image(seed=s)) for s in (7, 8)]
        status, body = post(base, "/sweep", {
            "images": imgs,
            "spec": {"kind": "awgn", "sigma": 15.0, "seed": 4},
            "alphas": [0.0, 0.5, 1.0],
        })
        assert status == 200
        assert body["alphas"] == [0.0, 0.5, 1.0]
        assert len(body["psnr_matrix"]) == 2
        assert body["best_alpha"] in body["alphas"]

    def test_sweep_needs_images(self, server):
        base, _ = server
        status, _ = post(base, "/sweep", {
            "spec": {"kind": "awgn", "sigma": 15.0}, "alphas": [0.0]})
        assert status == 400

    def test_sweep_bad_spec_400(self, server):
        base, _ = server
        status, _ = post(base, "/sweep", {
            "images": [b64_pgm(sample_image())],
            "spec": {"kind": "sparkle"}, "alphas": [0.0]})
        assert status == 400

    def test_sweep_empty_grid_400(self, server):
        base, _ = server
        status, _ = post(base, "/sweep", {
            "images": [b64_pgm(sample_image())],
            "spec": {"kind": "awgn", "sigma": 5.0}, "alphas": []})
        assert status == 400


class TestStaticUi:
    def test_ui_served_when_configured(self, tmp_path):
        model = build_model(ModelConfig(**TINY), seed=0)
        (tmp_path / "index.html").write_text("<html>control panel</html>")
        srv = make_server(model, port=0, ui_dir=tmp_path)
        thread = threading.Thread(target=srv.serve_forever, daemon=True)
        thread.start()
        try:
            base = f"http://127.0.0.1:{srv.server_address[1]}"
            with urllib.request.urlopen(base + "/ui/") as resp:
                assert b"control panel" in resp.read()
            # path traversal is refused
            try:
                with urllib.request.urlopen(base + "/ui/../secrets") as resp:
                    assert resp.status == 404
            except urllib.error.HTTPError as err:
                assert err.code == 404
        finally:
            srv.shutdown()
            srv.server_close()

    def test_404_without_ui(self, server):
        base, _ = server
        status, _ = get(base, "/ui/")
        assert status == 404
