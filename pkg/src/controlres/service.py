"""HTTP service exposing controllable restoration.

JSON over HTTP/1.1, stateless between requests; the loaded model is shared
immutable state and every request runs inference on its own graph, so
concurrent calls are safe and reproducible.

    GET  /health                liveness probe
    GET  /model                 architecture config + training provenance
    GET  /coeffs?alpha=0.5      coupling coefficient vectors at one control value
    POST /restore               {image, alpha_in, [ground_truth], [mode]}
    POST /sweep                 {images|dataset, spec, alphas, [mode]}
    GET  /ui/...                static control UI bundle (when configured)

Errors: 400 invalid payload, 404 unknown route, 413 image too large,
500 internal (with an error id). The control value is intentionally not
clamped server-side; probing outside the trained [0,1] range is supported.
"""

from __future__ import annotations

import base64
import json
import logging
import mimetypes
import time
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import urlparse, parse_qs

import numpy as np

from . import degrade as D
from .model import CfsModel, restore_image, export_coefficients, param_checksum, MODES
from .degrade import DegradationSpec
from .evaluate import sweep_alpha, fidelity

logger = logging.getLogger("controlres.service")


class BadRequest(ValueError):
    pass


class PayloadTooLarge(ValueError):
    pass


def _b64_image(field, max_pixels: int) -> np.ndarray:
    if not isinstance(field, str):
        raise BadRequest("image must be a base64 string")
    try:
        raw = base64.b64decode(field, validate=True)
        img = D.read_image_bytes(raw)
    except Exception as exc:
        raise BadRequest(f"undecodable image: {exc}") from None
    if img.shape[1] * img.shape[2] > max_pixels:
        raise PayloadTooLarge(
            f"image has {img.shape[1] * img.shape[2]} pixels, limit {max_pixels}")
    return img


def _finite_number(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise BadRequest(f"{name} must be a number")
    if not np.isfinite(value):
        raise BadRequest(f"{name} must be finite")
    return float(value)


def _encode_image(arr: np.ndarray):
    try:
        data = D.write_image_bytes(arr, "png")
        fmt = "png"
    except Exception:
        data = D.write_image_bytes(arr, "pgm" if arr.shape[0] == 1 else "ppm")
        fmt = "pgm" if arr.shape[0] == 1 else "ppm"
    return base64.b64encode(data).decode("ascii"), fmt


class RestorationState:
    def __init__(self, model: CfsModel, max_pixels: int, ui_dir=None):
        self.model = model
        self.max_pixels = max_pixels
        self.model_id = model.provenance.get("model_id") or param_checksum(model)[:16]
        self.ui_dir = Path(ui_dir).resolve() if ui_dir else None


class Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    state: RestorationState = None  # assigned by make_server

    # -- plumbing -----------------------------------------------------------

    def log_message(self, fmt, *args):  # route through logging, not stderr
        logger.debug("%s " + fmt, self.address_string(), *args)

    def _send_json(self, status: int, payload: dict):
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if length <= 0:
            raise BadRequest("missing request body")
        try:
            payload = json.loads(self.rfile.read(length).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise BadRequest(f"invalid JSON body: {exc}") from None
        if not isinstance(payload, dict):
            raise BadRequest("request body must be a JSON object")
        return payload

    def _dispatch(self, fn):
        try:
            status, payload = fn()
        except BadRequest as exc:
            status, payload = 400, {"error": str(exc)}
        except PayloadTooLarge as exc:
            status, payload = 413, {"error": str(exc)}
        except Exception as exc:  # noqa: BLE001 - no failure may escape to the client
            error_id = uuid.uuid4().hex[:12]
            logger.exception("internal error %s", error_id)
            status, payload = 500, {"error": str(exc), "error_id": error_id}
        self._send_json(status, payload)

    # -- routes ---------------------------------------------------------------

    def do_GET(self):
        url = urlparse(self.path)
        if url.path == "/health":
            return self._send_json(200, {"status": "ok"})
        if url.path == "/model":
            return self._dispatch(self._get_model)
        if url.path == "/coeffs":
            return self._dispatch(lambda: self._get_coeffs(parse_qs(url.query)))
        if url.path == "/" or url.path.startswith("/ui"):
            return self._serve_static(url.path)
        self._send_json(404, {"error": f"unknown route {url.path}"})

    def do_POST(self):
        url = urlparse(self.path)
        if url.path == "/restore":
            return self._dispatch(self._post_restore)
        if url.path == "/sweep":
            return self._dispatch(self._post_sweep)
        self._send_json(404, {"error": f"unknown route {url.path}"})

    def _get_model(self):
        st = self.state
        return 200, {
            "config": st.model.config.to_dict(),
            "provenance": st.model.provenance,
            "model_id": st.model_id,
            "max_pixels": st.max_pixels,
        }

    def _get_coeffs(self, query):
        if "alpha" not in query:
            raise BadRequest("missing alpha query parameter")
        try:
            alpha = float(query["alpha"][0])
        except ValueError:
            raise BadRequest("alpha must be a number") from None
        if not np.isfinite(alpha):
            raise BadRequest("alpha must be finite")
        table = export_coefficients(self.state.model, [alpha])[0]
        return 200, {
            "alpha": alpha,
            "modules": [str(k) for k in self.state.model._head_keys()],
            "coefficients": [[float(v) for v in row] for row in table],
        }

    def _post_restore(self):
        st = self.state
        req = self._read_json()
        if "image" not in req or "alpha_in" not in req:
            raise BadRequest("restore request needs image and alpha_in")
        alpha = _finite_number(req["alpha_in"], "alpha_in")
        mode = req.get("mode", "adaptive")
        if mode not in MODES:
            raise BadRequest(f"mode must be one of {MODES}")
        img = _b64_image(req["image"], st.max_pixels)
        if img.shape[0] != st.model.config.image_channels:
            raise BadRequest(
                f"expected {st.model.config.image_channels}-channel image, got {img.shape[0]}")
        t0 = time.perf_counter()
        out = restore_image(st.model, img, alpha, mode=mode)
        elapsed_ms = (time.perf_counter() - t0) * 1000.0
        encoded, fmt = _encode_image(out)
        resp = {
            "image": encoded,
            "format": fmt,
            "alpha_in": alpha,
            "mode": mode,
            "model_id": st.model_id,
            "time_ms": round(elapsed_ms, 3),
        }
        if "ground_truth" in req and req["ground_truth"] is not None:
            gt = _b64_image(req["ground_truth"], st.max_pixels)
            cropped = out[:, : gt.shape[1], : gt.shape[2]]
            if cropped.shape != gt.shape:
                raise BadRequest("ground truth shape does not match the output")
            psnr, rmse = fidelity(np.clip(cropped, 0, 255), gt)
            resp["psnr"] = "inf" if np.isinf(psnr) else psnr
            resp["rmse"] = rmse
        return 200, resp

    def _post_sweep(self):
        st = self.state
        req = self._read_json()
        try:
            spec = DegradationSpec.from_dict(req["spec"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BadRequest(f"bad degradation spec: {exc}") from None
        alphas = req.get("alphas")
        if not isinstance(alphas, list) or not alphas:
            raise BadRequest("alphas must be a non-empty list")
        alphas = [_finite_number(a, "alpha") for a in alphas]
        mode = req.get("mode", "adaptive")
        if mode not in MODES:
            raise BadRequest(f"mode must be one of {MODES}")
        if "images" in req:
            if not isinstance(req["images"], list) or not req["images"]:
                raise BadRequest("images must be a non-empty list")
            images = [_b64_image(f, st.max_pixels) for f in req["images"]]
        elif "dataset" in req:
            try:
                images = D.load_images(req["dataset"])
            except (OSError, ValueError) as exc:
                raise BadRequest(f"cannot load dataset: {exc}") from None
        else:
            raise BadRequest("sweep request needs images or dataset")
        report = sweep_alpha(st.model, images, spec, alphas, mode=mode)
        return 200, report.to_json_dict()

    # -- static UI ----------------------------------------------------------------

    def _serve_static(self, path: str):
        st = self.state
        if st.ui_dir is None:
            return self._send_json(404, {"error": "no UI bundle configured"})
        if path in ("/", "/ui"):
            self.send_response(302)
            self.send_header("Location", "/ui/")
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        rel = path[len("/ui/"):] or "index.html"
        target = (st.ui_dir / rel).resolve()
        if not str(target).startswith(str(st.ui_dir)) or not target.is_file():
            return self._send_json(404, {"error": "not found"})
        body = target.read_bytes()
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


def make_server(model: CfsModel, port: int = 8000, host: str = "127.0.0.1",
                max_pixels: int = 1024 * 1024, ui_dir=None) -> ThreadingHTTPServer:
    state = RestorationState(model, max_pixels, ui_dir)
    handler = type("BoundHandler", (Handler,), {"state": state})
    return ThreadingHTTPServer((host, port), handler)


def serve(model: CfsModel, port: int = 8000, host: str = "127.0.0.1",
          max_pixels: int = 1024 * 1024, ui_dir=None):
    server = make_server(model, port, host, max_pixels, ui_dir)
    logger.info("serving on http://%s:%d (model %s)", host, port,
                server.RequestHandlerClass.state.model_id)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
