/** Typed client for the restoration service. The UI computes no numbers of
 * its own: everything shown comes verbatim from these responses. */

export interface ModelInfo {
  config: {
    task: string;
    num_modules: number;
    channels: number;
    image_channels: number;
    [k: string]: unknown;
  };
  provenance: Record<string, unknown>;
  model_id: string;
  max_pixels: number;
}

export interface RestoreRequest {
  image: string; // base64 PNG or PGM
  alpha_in: number;
  ground_truth?: string;
  mode?: "adaptive" | "sa" | "main";
}

export interface RestoreResponse {
  image: string;
  format: string;
  alpha_in: number;
  mode: string;
  model_id: string;
  time_ms: number;
  psnr?: number | "inf";
  rmse?: number;
}

export interface DegradationSpec {
  kind: "awgn" | "jpeg" | "bicubic_down" | "blur_then_down";
  sigma?: number;
  quality?: number;
  scale?: number;
  seed?: number;
}

export interface SweepRequest {
  images: string[];
  spec: DegradationSpec;
  alphas: number[];
  mode?: "adaptive" | "sa" | "main";
}

export interface SweepReport {
  alphas: number[];
  mean_psnr: (number | "inf")[];
  mean_rmse: number[];
  psnr_matrix: (number | "inf")[][];
  best_alpha: number;
  spec: Record<string, unknown>;
  model_id: string;
  mode: string;
}

export interface CoeffsResponse {
  alpha: number;
  modules: string[];
  coefficients: number[][];
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class Client {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (...a) => fetch(...a),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchImpl(this.base + path, init);
    } catch (err) {
      throw new ApiError(0, `service unreachable: ${String(err)}`);
    }
    const body = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      const msg = typeof body?.error === "string" ? body.error : `HTTP ${resp.status}`;
      throw new ApiError(resp.status, msg);
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  health(): Promise<{ status: string }> {
    return this.request("/health");
  }

  model(): Promise<ModelInfo> {
    return this.request("/model");
  }

  coeffs(alpha: number): Promise<CoeffsResponse> {
    return this.request(`/coeffs?alpha=${encodeURIComponent(alpha)}`);
  }

  restore(req: RestoreRequest): Promise<RestoreResponse> {
    return this.post("/restore", req);
  }

  sweep(req: SweepRequest): Promise<SweepReport> {
    return this.post("/sweep", req);
  }
}
