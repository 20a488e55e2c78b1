// Tiny dependency-free SVG line chart for the count history.

import { FeedEntry } from "./api.js";

export interface ChartPoint {
  x: number;
  y: number;
  count: number;
}

export function feedCounts(entries: FeedEntry[]): number[] {
  return entries.map((e) => parseInt(e.field1, 10)).filter((n) => !Number.isNaN(n));
}

export function chartPoints(
  counts: number[],
  width: number,
  height: number,
  pad = 6,
): ChartPoint[] {
  if (counts.length === 0) return [];
  const maxCount = Math.max(1, ...counts);
  const innerW = width - 2 * pad;
  const innerH = height - 2 * pad;
  const step = counts.length > 1 ? innerW / (counts.length - 1) : 0;
  return counts.map((count, i) => ({
    x: pad + (counts.length > 1 ? i * step : innerW / 2),
    y: pad + innerH - (count / maxCount) * innerH,
    count,
  }));
}

export function renderCountChart(entries: FeedEntry[], width = 420, height = 130): string {
  const counts = feedCounts(entries);
  const points = chartPoints(counts, width, height);
  if (points.length === 0) {
    return (
      `<svg width="${width}" height="${height}" role="img">` +
      `<text x="${width / 2}" y="${height / 2}" text-anchor="middle" class="chart-empty">` +
      `no telemetry yet</text></svg>`
    );
  }
  const path = points.map((p) => `${p.x.toFixed(1)},${p.y.toFixed(1)}`).join(" ");
  const dots = points
    .map(
      (p) =>
        `<circle cx="${p.x.toFixed(1)}" cy="${p.y.toFixed(1)}" r="2.5">` +
        `<title>${p.count}</title></circle>`,
    )
    .join("");
  return (
    `<svg width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" role="img">` +
    `<polyline fill="none" stroke-width="2" points="${path}"></polyline>${dots}</svg>`
  );
}
