import { escapeXml } from "./text.js";
import { DensityGrid } from "./types.js";

const WIDTH = 440;
const HEIGHT = 220;
const PAD_LEFT = 56;
const PAD_RIGHT = 16;
const PAD_TOP = 28;
const PAD_BOTTOM = 40;

/** Line plot of a density grid from the service. Axis tick labels repeat
 * grid values verbatim; the plot scales coordinates only. */
export function renderDensity(grid: DensityGrid): string {
  const n = Math.min(grid.x.length, grid.density.length);
  if (n < 2) {
    return `<div class="density-empty">no density points</div>`;
  }
  const xs = grid.x.slice(0, n);
  const ys = grid.density.slice(0, n);
  const xMin = xs[0] ?? 0;
  const xMax = xs[n - 1] ?? 1;
  const yMax = Math.max(...ys);
  const plotW = WIDTH - PAD_LEFT - PAD_RIGHT;
  const plotH = HEIGHT - PAD_TOP - PAD_BOTTOM;
  const sx = (x: number) =>
    PAD_LEFT + (xMax === xMin ? 0 : ((x - xMin) / (xMax - xMin)) * plotW);
  const sy = (y: number) => PAD_TOP + (yMax === 0 ? plotH : (1 - y / yMax) * plotH);
  const points = xs
    .map((x, i) => `${sx(x).toFixed(2)},${sy(ys[i] ?? 0).toFixed(2)}`)
    .join(" ");
  const axisY = HEIGHT - PAD_BOTTOM;
  return (
    `<svg class="density" viewBox="0 0 ${WIDTH} ${HEIGHT}" ` +
    `width="${WIDTH}" height="${HEIGHT}" role="img">` +
    `<text class="title" x="${PAD_LEFT}" y="18">${escapeXml(grid.parameter)}</text>` +
    `<line class="axis" x1="${PAD_LEFT}" y1="${axisY}" x2="${WIDTH - PAD_RIGHT}" y2="${axisY}"/>` +
    `<line class="axis" x1="${PAD_LEFT}" y1="${PAD_TOP}" x2="${PAD_LEFT}" y2="${axisY}"/>` +
    `<polyline class="curve" fill="none" points="${points}"/>` +
    `<text class="tick" x="${PAD_LEFT}" y="${axisY + 16}" text-anchor="middle">${xMin}</text>` +
    `<text class="tick" x="${WIDTH - PAD_RIGHT}" y="${axisY + 16}" text-anchor="end">${xMax}</text>` +
    `<text class="tick" x="${PAD_LEFT - 6}" y="${PAD_TOP + 4}" text-anchor="end">${yMax}</text>` +
    `<text class="tick" x="${PAD_LEFT - 6}" y="${axisY}" text-anchor="end">0</text>` +
    `<text class="scale" x="${WIDTH - PAD_RIGHT}" y="${HEIGHT - 6}" text-anchor="end">` +
    `scale: ${escapeXml(grid.scale)}</text>` +
    `</svg>`
  );
}

/** Placeholder shown when the service refuses to plot a prior. */
export function renderDensityError(code: string, message: string): string {
  if (code === "improper_prior") {
    return (
      `<div class="density-placeholder improper">` +
      `<p class="headline">improper prior: not plottable</p>` +
      `<p class="detail">${escapeXml(message)}</p>` +
      `</div>`
    );
  }
  return (
    `<div class="density-placeholder error">` +
    `<p class="headline">no density available</p>` +
    `<p class="detail">${escapeXml(message)}</p>` +
    `</div>`
  );
}
