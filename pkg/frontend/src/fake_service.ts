/** Deterministic in-memory stand-in for the restoration service, used by the
 * UI tests. It honors the real service's contracts: restore at control 0 is
 * byte-identical to the main-branch-only mode, metrics come back verbatim,
 * and every response is a pure function of the request. */

import {
  Client,
  CoeffsResponse,
  ModelInfo,
  RestoreRequest,
  RestoreResponse,
  SweepReport,
  SweepRequest,
} from "./api.js";

export class FakeService {
  restoreCalls: RestoreRequest[] = [];
  sweepCalls: SweepRequest[] = [];
  /** artificial response delay hook for reordering tests */
  delays: Array<Promise<void>> = [];

  restore(req: RestoreRequest): RestoreResponse {
    this.restoreCalls.push(req);
    const mode = req.mode ?? "adaptive";
    // endpoint identity: adaptive at control 0 IS the main branch
    const effective = mode === "main" || req.alpha_in === 0 ? "main" : `${mode}@${req.alpha_in}`;
    const image = btoa(`restored|${req.image}|${effective}`);
    const resp: RestoreResponse = {
      image,
      format: "png",
      alpha_in: req.alpha_in,
      mode,
      model_id: "fake0001",
      time_ms: 1.5,
    };
    if (req.ground_truth !== undefined) {
      resp.psnr = 30 - Math.abs(req.alpha_in - 0.5) * 4; // peak at 0.5
      resp.rmse = 8 + Math.abs(req.alpha_in - 0.5);
    }
    return resp;
  }

  sweep(req: SweepRequest): SweepReport {
    this.sweepCalls.push(req);
    const mean_psnr = req.alphas.map((a) => 30 - Math.abs(a - 0.5) * 4);
    const best = req.alphas[mean_psnr.indexOf(Math.max(...mean_psnr))]!;
    return {
      alphas: [...req.alphas],
      mean_psnr,
      mean_rmse: req.alphas.map((a) => 8 + Math.abs(a - 0.5)),
      psnr_matrix: [mean_psnr.slice()],
      best_alpha: best,
      spec: { ...req.spec },
      model_id: "fake0001",
      mode: req.mode ?? "adaptive",
    };
  }

  model(): ModelInfo {
    return {
      config: { task: "denoise", num_modules: 3, channels: 16, image_channels: 1 },
      provenance: { steps: [1, 2] },
      model_id: "fake0001",
      max_pixels: 1 << 20,
    };
  }

  coeffs(alpha: number): CoeffsResponse {
    return {
      alpha,
      modules: ["0", "1", "2"],
      coefficients: [0, 1, 2].map((m) => [alpha * (m + 1), alpha * (m + 2)]),
    };
  }

  /** Client wired to this fake over a fetch-shaped transport. */
  client(): Client {
    const fetchImpl = async (url: string, init?: RequestInit): Promise<Response> => {
      const path = url.replace(/^[a-z]+:\/\/[^/]+/, "");
      const json = (body: unknown, status = 200) =>
        new Response(JSON.stringify(body), {
          status,
          headers: { "Content-Type": "application/json" },
        });
      if (path === "/health") return json({ status: "ok" });
      if (path === "/model") return json(this.model());
      if (path.startsWith("/coeffs")) {
        const alpha = Number(new URLSearchParams(path.split("?")[1] ?? "").get("alpha"));
        if (!Number.isFinite(alpha)) return json({ error: "alpha must be finite" }, 400);
        return json(this.coeffs(alpha));
      }
      const body = init?.body ? JSON.parse(String(init.body)) : {};
      if (path === "/restore") {
        if (typeof body.alpha_in !== "number" || !Number.isFinite(body.alpha_in)) {
          return json({ error: "alpha_in must be finite" }, 400);
        }
        const wait = this.delays.shift();
        if (wait) await wait;
        return json(this.restore(body as RestoreRequest));
      }
      if (path === "/sweep") return json(this.sweep(body as SweepRequest));
      return json({ error: "unknown route" }, 404);
    };
    return new Client("", fetchImpl);
  }
}
