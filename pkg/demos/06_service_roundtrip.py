#!/usr/bin/env python3
"""Spin up the HTTP service in-process and exercise every endpoint.

Shows the request/response shapes the control UI relies on: health, model
info, coefficient export, single restore (with PSNR against ground truth)
and a control sweep.
"""

import argparse
import base64
import json
import threading
import urllib.request

from controlres import degrade as D
from controlres.checkpoint import load_checkpoint
from controlres.service import make_server


def call(base, path, payload=None):
    if payload is None:
        with urllib.request.urlopen(base + path) as resp:
            return json.loads(resp.read())
    req = urllib.request.Request(base + path, data=json.dumps(payload).encode(),
                                 headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--ckpt", default="demos/out/denoiser/adaptive.ckpt")
    args = ap.parse_args()

    model = load_checkpoint(args.ckpt)
    server = make_server(model, port=0)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    print(f"service on {base}")

    print("\nGET /health ->", call(base, "/health"))
    info = call(base, "/model")
    print("GET /model  -> config:", info["config"], "\n            model_id:", info["model_id"])

    coeffs = call(base, "/coeffs?alpha=0.5")
    print("GET /coeffs?alpha=0.5 -> first module head:",
          [round(v, 3) for v in coeffs["coefficients"][0][:6]], "...")

    clean = D.to_uint8(D.make_texture(96, seed=7)).astype("float32")
    noisy = D.to_uint8(D.add_awgn(clean, 30.0, seed=1)).astype("float32")
    b64 = lambda img: base64.b64encode(D.write_image_bytes(img, "pgm")).decode()

    for alpha in (0.0, 0.5, 1.0):
        resp = call(base, "/restore", {"image": b64(noisy), "alpha_in": alpha,
                                       "ground_truth": b64(clean)})
        print(f"POST /restore alpha={alpha:.1f} -> psnr {resp['psnr']:.2f} dB "
              f"({resp['time_ms']:.0f} ms, {resp['format']})")

    sweep = call(base, "/sweep", {"images": [b64(clean)],
                                  "spec": {"kind": "awgn", "sigma": 30.0, "seed": 1},
                                  "alphas": [round(0.1 * i, 1) for i in range(11)]})
    print(f"POST /sweep -> best control {sweep['best_alpha']:g} "
          f"({max(p for p in sweep['mean_psnr'] if p != 'inf'):.2f} dB)")
    server.shutdown()


if __name__ == "__main__":
    main()
