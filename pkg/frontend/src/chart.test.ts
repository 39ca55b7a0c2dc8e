import { describe, expect, it } from "vitest";
import { layoutChart, hitTest } from "./chart.js";
import { SweepReport } from "./api.js";

function report(overrides: Partial<SweepReport> = {}): SweepReport {
  const alphas = [0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
  const mean_psnr = alphas.map((a) => 28 - (a - 0.5) ** 2 * 10);
  return {
    alphas,
    mean_psnr,
    mean_rmse: alphas.map(() => 9),
    psnr_matrix: [mean_psnr],
    best_alpha: 0.5,
    spec: { kind: "awgn", sigma: 30 },
    model_id: "m",
    mode: "adaptive",
    ...overrides,
  };
}

describe("layoutChart", () => {
  it("keeps report values exactly (no resampling)", () => {
    const rep = report();
    const layout = layoutChart(rep, 640, 240);
    expect(layout.points.length).toBe(rep.alphas.length); // 11 markers for 11 grid points
    expect(layout.points.map((p) => p.alpha)).toEqual(rep.alphas);
    expect(layout.points.map((p) => p.psnr)).toEqual(rep.mean_psnr);
  });

  it("marks exactly the best point", () => {
    const layout = layoutChart(report(), 640, 240);
    const best = layout.points.filter((p) => p.best);
    expect(best.length).toBe(1);
    expect(best[0]!.alpha).toBe(0.5);
  });

  it("is monotone in x over the grid", () => {
    const layout = layoutChart(report(), 640, 240);
    const xs = layout.points.map((p) => p.x);
    for (let i = 1; i < xs.length; i++) expect(xs[i]!).toBeGreaterThan(xs[i - 1]!);
  });

  it("pins infinite psnr to the top while keeping the value", () => {
    const rep = report({ mean_psnr: ["inf", 20, 21, 22, 23, 24, 25, 24, 23, 22, 21] });
    const layout = layoutChart(rep, 640, 240);
    expect(layout.points[0]!.psnr).toBe("inf");
    const finiteYs = layout.points.slice(1).map((p) => p.y);
    expect(layout.points[0]!.y).toBeLessThanOrEqual(Math.min(...finiteYs));
  });
});

describe("hitTest", () => {
  it("finds the nearest marker and ignores far clicks", () => {
    const layout = layoutChart(report(), 640, 240);
    const target = layout.points[5]!;
    const hit = hitTest(layout, target.x + 3, target.y - 3);
    expect(hit?.alpha).toBe(target.alpha);
    expect(hitTest(layout, target.x + 200, target.y + 120)).toBeNull();
  });

  it("clicking the best marker reports the best control value", () => {
    const rep = report();
    const layout = layoutChart(rep, 640, 240);
    const best = layout.points.find((p) => p.best)!;
    expect(hitTest(layout, best.x, best.y)?.alpha).toBe(rep.best_alpha);
  });
});
