// Dependency-free SVG chart builders for the stats view.

import type { StatsReport } from "./types.js";

export interface TrendPoint {
  x: number;
  y: number;
}

/** Map recent scores onto an SVG viewport; empty input gives no points. */
export function trendPoints(scores: number[], width = 300, height = 120,
                            pad = 8): TrendPoint[] {
  if (scores.length === 0) return [];
  const max = Math.max(...scores, 1);
  const min = Math.min(...scores, 0);
  const span = max - min || 1;
  const step = scores.length > 1 ? (width - 2 * pad) / (scores.length - 1) : 0;
  return scores.map((score, index) => ({
    x: pad + index * step,
    y: height - pad - ((score - min) / span) * (height - 2 * pad),
  }));
}

export function trendPath(scores: number[], width = 300, height = 120): string {
  const points = trendPoints(scores, width, height);
  if (points.length === 0) return "";
  return points
    .map((p, i) => `${i === 0 ? "M" : "L"}${p.x.toFixed(1)},${p.y.toFixed(1)}`)
    .join(" ");
}

export function scoreTrendSvg(report: StatsReport, width = 300, height = 120): string {
  if (report.recent_scores.length === 0) {
    return `<svg viewBox="0 0 ${width} ${height}" class="trend empty"><text x="8" y="20">no data yet</text></svg>`;
  }
  const path = trendPath(report.recent_scores, width, height);
  return `<svg viewBox="0 0 ${width} ${height}" class="trend">` +
    `<path d="${path}" fill="none" stroke="currentColor" stroke-width="2"/></svg>`;
}

export function winRateLabel(report: StatsReport): string {
  if (report.win_rate === null) return "no data yet";
  return `${Math.round(report.win_rate * 100)}%`;
}

export function statsSummaryLines(report: StatsReport): string[] {
  return [
    `episodes: ${report.episodes}`,
    `win rate: ${winRateLabel(report)}`,
    `mean score: ${report.mean_score.toFixed(2)} (max ${report.max_score})`,
    `model steps: ${report.model_steps}`,
    `fingerprint: ${report.fingerprint}`,
  ];
}
