/** DOM wiring for the control panel. Three panes (degraded input, restored
 * output, optional ground truth), a control slider spanning [-0.5, 1.5]
 * with the trained [0, 1] band highlighted, and the sweep chart. */

import { Client, DegradationSpec, SweepReport } from "./api.js";
import { Session, View } from "./state.js";
import { drawChart, hitTest, ChartLayout } from "./chart.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const api = new Client("");
let layout: ChartLayout | null = null;

function b64ToDataUrl(b64: string, format: string): string {
  const mime = format === "png" ? "image/png" : "application/octet-stream";
  return `data:${mime};base64,${b64}`;
}

function fmtPsnr(v: number | "inf" | undefined): string {
  if (v === undefined) return "-";
  return v === "inf" ? "inf" : `${v.toFixed(2)} dB`;
}

function render(view: View): void {
  $<HTMLSpanElement>("alpha-value").textContent = view.alpha.toFixed(2);
  ($<HTMLInputElement>("alpha-slider")).value = String(view.alpha);

  const inputPane = $<HTMLImageElement>("pane-input");
  if (view.inputImage) inputPane.src = b64ToDataUrl(view.inputImage, "png");

  const gtPane = $<HTMLImageElement>("pane-gt");
  const gtBox = $<HTMLElement>("box-gt");
  if (view.groundTruth) {
    gtPane.src = b64ToDataUrl(view.groundTruth, "png");
    gtBox.style.display = "";
  } else {
    gtBox.style.display = "none";
  }

  const outPane = $<HTMLImageElement>("pane-output");
  const outLabel = $<HTMLSpanElement>("output-alpha");
  if (view.result) {
    // image and its control value come from the same response: never mixed
    outPane.src = b64ToDataUrl(view.result.image, view.result.format);
    outLabel.textContent = view.result.alpha_in.toFixed(2);
    $<HTMLSpanElement>("metric-psnr").textContent = fmtPsnr(view.result.psnr);
    $<HTMLSpanElement>("metric-rmse").textContent =
      view.result.rmse === undefined ? "-" : view.result.rmse.toFixed(3);
    $<HTMLSpanElement>("metric-time").textContent = `${view.result.time_ms.toFixed(0)} ms`;
  }
  $<HTMLElement>("busy").style.visibility = view.busy || view.sweepBusy ? "visible" : "hidden";

  const banner = $<HTMLElement>("error-banner");
  banner.textContent = view.error ?? "";
  banner.style.display = view.error ? "" : "none";

  const canvas = $<HTMLCanvasElement>("sweep-chart");
  layout = drawChart(canvas, view.sweep, view.alpha);
  $<HTMLSpanElement>("best-alpha").textContent =
    view.sweep ? view.sweep.best_alpha.toFixed(2) : "-";
}

const session = new Session(api, render);

async function fileToBase64(file: File): Promise<string> {
  const buf = new Uint8Array(await file.arrayBuffer());
  let s = "";
  for (let i = 0; i < buf.length; i += 0x8000) {
    s += String.fromCharCode(...buf.subarray(i, i + 0x8000));
  }
  return btoa(s);
}

function currentSpec(): DegradationSpec {
  const kind = $<HTMLSelectElement>("spec-kind").value as DegradationSpec["kind"];
  const level = Number($<HTMLInputElement>("spec-level").value);
  const spec: DegradationSpec = { kind, seed: 23 };
  if (kind === "awgn") spec.sigma = level;
  else if (kind === "jpeg") spec.quality = level;
  else spec.scale = level;
  return spec;
}

function sweepGrid(): number[] {
  const grid: number[] = [];
  for (let i = 0; i <= 10; i++) grid.push(Math.round(i) / 10);
  return grid;
}

async function loadSample(name: string): Promise<void> {
  const fetchB64 = async (path: string) => {
    const resp = await fetch(path);
    if (!resp.ok) throw new Error(`cannot load ${path}`);
    const buf = new Uint8Array(await resp.arrayBuffer());
    let s = "";
    for (let i = 0; i < buf.length; i += 0x8000) {
      s += String.fromCharCode(...buf.subarray(i, i + 0x8000));
    }
    return btoa(s);
  };
  const [degraded, gt] = await Promise.all([
    fetchB64(`samples/${name}_degraded.png`),
    fetchB64(`samples/${name}_clean.png`),
  ]);
  session.setImage(degraded, gt);
}

function wire(): void {
  const slider = $<HTMLInputElement>("alpha-slider");
  slider.addEventListener("input", () => session.setAlpha(Number(slider.value)));

  $<HTMLInputElement>("file-degraded").addEventListener("change", async (ev) => {
    const input = ev.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) return;
    const gtFile = $<HTMLInputElement>("file-gt").files?.[0] ?? null;
    session.setImage(await fileToBase64(file),
                     gtFile ? await fileToBase64(gtFile) : null);
  });
  $<HTMLInputElement>("file-gt").addEventListener("change", async (ev) => {
    const gtFile = (ev.target as HTMLInputElement).files?.[0];
    if (!gtFile || !session.view.inputImage) return;
    session.setImage(session.view.inputImage, await fileToBase64(gtFile));
  });

  $<HTMLSelectElement>("sample-picker").addEventListener("change", (ev) => {
    const name = (ev.target as HTMLSelectElement).value;
    if (name) void loadSample(name);
  });

  $<HTMLButtonElement>("run-sweep").addEventListener("click", () => {
    void session.runSweep(currentSpec(), sweepGrid());
  });

  const canvas = $<HTMLCanvasElement>("sweep-chart");
  canvas.addEventListener("click", (ev) => {
    if (!layout) return;
    const rect = canvas.getBoundingClientRect();
    const hit = hitTest(layout, ev.clientX - rect.left, ev.clientY - rect.top);
    if (hit) session.jumpTo(hit.alpha);
  });

  void api
    .model()
    .then((info) => {
      $<HTMLSpanElement>("model-info").textContent =
        `${info.config.task} / ${info.config.num_modules} modules / ` +
        `${info.config.channels} ch / ${info.model_id.slice(0, 8)}`;
    })
    .catch(() => {
      session.view.error = "service unreachable";
      render(session.view);
    });

  render(session.view);
}

wire();

export { render, session, api };
export type { SweepReport };
