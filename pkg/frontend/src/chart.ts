/** Canvas line chart of mean PSNR vs control value, with clickable points.
 * Point data comes straight from a SweepReport; infinite PSNR entries are
 * drawn pinned to the top of the axis but keep their exact report values in
 * the hit-test payload. */

import { SweepReport } from "./api.js";

export interface ChartPoint {
  alpha: number;
  psnr: number | "inf";
  x: number;
  y: number;
  best: boolean;
}

export interface ChartLayout {
  points: ChartPoint[];
  xOf(alpha: number): number;
  yOf(psnr: number): number;
}

const PAD = { left: 44, right: 12, top: 10, bottom: 26 };

function finiteValues(report: SweepReport): number[] {
  return report.mean_psnr.filter((v): v is number => v !== "inf");
}

/** Pure geometry so tests can verify fidelity without a canvas. */
export function layoutChart(report: SweepReport, width: number, height: number): ChartLayout {
  const finite = finiteValues(report);
  const lo = finite.length ? Math.min(...finite) : 0;
  const hi = finite.length ? Math.max(...finite) : 1;
  const span = hi - lo || 1;
  const a0 = Math.min(...report.alphas);
  const a1 = Math.max(...report.alphas);
  const aspan = a1 - a0 || 1;
  const xOf = (alpha: number) =>
    PAD.left + ((alpha - a0) / aspan) * (width - PAD.left - PAD.right);
  const yOf = (psnr: number) =>
    height - PAD.bottom - ((psnr - lo) / span) * (height - PAD.top - PAD.bottom);
  const points = report.alphas.map((alpha, i) => {
    const psnr = report.mean_psnr[i]!;
    return {
      alpha,
      psnr,
      x: xOf(alpha),
      y: psnr === "inf" ? PAD.top : yOf(psnr),
      best: alpha === report.best_alpha,
    };
  });
  return { points, xOf, yOf };
}

/** Nearest point within `radius` px of the click, or null. */
export function hitTest(layout: ChartLayout, x: number, y: number, radius = 12): ChartPoint | null {
  let bestPoint: ChartPoint | null = null;
  let bestDist = radius * radius;
  for (const p of layout.points) {
    const d = (p.x - x) ** 2 + (p.y - y) ** 2;
    if (d <= bestDist) {
      bestDist = d;
      bestPoint = p;
    }
  }
  return bestPoint;
}

export function drawChart(
  canvas: HTMLCanvasElement,
  report: SweepReport | null,
  currentAlpha: number,
): ChartLayout | null {
  const ctx = canvas.getContext("2d");
  if (!ctx) return null;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  if (!report) {
    ctx.fillStyle = "#8b93a7";
    ctx.font = "13px system-ui";
    ctx.fillText("run a sweep to chart PSNR vs control value", PAD.left, height / 2);
    return null;
  }
  const layout = layoutChart(report, width, height);

  ctx.strokeStyle = "#3c4254";
  ctx.beginPath();
  ctx.moveTo(PAD.left, PAD.top);
  ctx.lineTo(PAD.left, height - PAD.bottom);
  ctx.lineTo(width - PAD.right, height - PAD.bottom);
  ctx.stroke();

  const finite = finiteValues(report);
  if (finite.length) {
    ctx.fillStyle = "#8b93a7";
    ctx.font = "11px system-ui";
    ctx.fillText(Math.max(...finite).toFixed(2), 4, PAD.top + 10);
    ctx.fillText(Math.min(...finite).toFixed(2), 4, height - PAD.bottom);
    ctx.fillText(String(Math.min(...report.alphas)), PAD.left - 6, height - 8);
    ctx.fillText(String(Math.max(...report.alphas)), width - PAD.right - 18, height - 8);
  }

  ctx.strokeStyle = "#5ea0ef";
  ctx.beginPath();
  layout.points.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
  ctx.stroke();

  const cx = layout.xOf(currentAlpha);
  ctx.strokeStyle = "#46608a";
  ctx.setLineDash([4, 3]);
  ctx.beginPath();
  ctx.moveTo(cx, PAD.top);
  ctx.lineTo(cx, canvas.height - PAD.bottom);
  ctx.stroke();
  ctx.setLineDash([]);

  for (const p of layout.points) {
    ctx.beginPath();
    ctx.arc(p.x, p.y, p.best ? 5 : 3, 0, Math.PI * 2);
    ctx.fillStyle = p.best ? "#f2b84b" : "#5ea0ef";
    ctx.fill();
  }
  return layout;
}
