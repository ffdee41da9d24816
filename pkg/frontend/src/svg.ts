/** SVG panel builder: mean error fraction vs queries per task. */

import { Series } from "./aggregate.js";

export interface PanelOptions {
  title: string;
  logY?: boolean;
}

const COLORS: Record<string, string> = {
  mv: "#888888",
  oracle_wmv: "#2d6a4f",
  prior: "#e07a1f",
  alg1: "#4361ee",
  alg2: "#e63946",
};

const FALLBACK_COLORS = ["#7209b7", "#0a9396", "#99582a", "#5f0f40"];

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function colorOf(algorithm: string, i: number): string {
  return COLORS[algorithm] ?? FALLBACK_COLORS[i % FALLBACK_COLORS.length];
}

function linTicks(min: number, max: number, count: number): number[] {
  const range = max - min || 1;
  const rough = range / count;
  const mag = Math.pow(10, Math.floor(Math.log10(rough)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((n) => n >= rough) ?? rough;
  const ticks: number[] = [];
  for (let v = Math.ceil(min / step) * step; v <= max + step * 0.01; v += step) ticks.push(v);
  return ticks;
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 0.01 && a < 10000) {
    return Number(v.toPrecision(3)).toString();
  }
  return v.toExponential(0);
}

export function renderPanel(series: Series[], opts: PanelOptions): string {
  const W = 560;
  const H = 360;
  const ml = 62;
  const mr = 16;
  const mt = 34;
  const mb = 46;
  const pw = W - ml - mr;
  const ph = H - mt - mb;

  const budgets = series.flatMap((s) => s.points.map((p) => p.budget));
  const xMin = Math.min(...budgets);
  const xMax = Math.max(...budgets);
  const xOf = (b: number) => ml + ((b - xMin) / (xMax - xMin || 1)) * pw;

  const means = series.flatMap((s) => s.points.map((p) => p.mean));
  const highs = series.flatMap((s) => s.points.map((p) => p.mean + p.stderr));
  let yOf: (v: number) => number;
  let yTicks: number[];
  let clamp = (v: number) => v;
  if (opts.logY) {
    // zero means cannot sit on a log axis; clamp to half a decade
    // below the smallest positive mean
    const positive = means.filter((v) => v > 0);
    const floor = positive.length ? Math.min(...positive) / 3 : 1e-4;
    clamp = (v: number) => Math.max(v, floor);
    const lo = Math.log10(floor);
    const hi = Math.log10(Math.max(...highs.map(clamp), floor * 10));
    yOf = (v) => mt + ph - ((Math.log10(clamp(v)) - lo) / (hi - lo || 1)) * ph;
    yTicks = [];
    for (let e = Math.ceil(lo); e <= hi + 1e-9; e++) yTicks.push(Math.pow(10, e));
  } else {
    const hi = Math.max(...highs, 1e-12) * 1.08;
    yOf = (v) => mt + ph - (v / hi) * ph;
    yTicks = linTicks(0, hi, 5);
  }

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}" font-family="Helvetica, Arial, sans-serif">`
  );
  parts.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  parts.push(
    `<text x="${ml + pw / 2}" y="18" text-anchor="middle" font-size="14" fill="#222">${esc(opts.title)}</text>`
  );

  for (const tick of yTicks) {
    const y = yOf(tick);
    if (y < mt - 1 || y > mt + ph + 1) continue;
    parts.push(`<line x1="${ml}" y1="${y}" x2="${ml + pw}" y2="${y}" stroke="#eee"/>`);
    parts.push(
      `<text x="${ml - 6}" y="${y + 3}" text-anchor="end" font-size="10" fill="#555">${fmt(tick)}</text>`
    );
  }
  for (const tick of linTicks(xMin, xMax, 6)) {
    const x = xOf(tick);
    parts.push(`<line x1="${x}" y1="${mt + ph}" x2="${x}" y2="${mt + ph + 4}" stroke="#555"/>`);
    parts.push(
      `<text x="${x}" y="${mt + ph + 16}" text-anchor="middle" font-size="10" fill="#555">${fmt(tick)}</text>`
    );
  }
  parts.push(`<line x1="${ml}" y1="${mt}" x2="${ml}" y2="${mt + ph}" stroke="#333"/>`);
  parts.push(`<line x1="${ml}" y1="${mt + ph}" x2="${ml + pw}" y2="${mt + ph}" stroke="#333"/>`);
  parts.push(
    `<text x="${ml + pw / 2}" y="${H - 10}" text-anchor="middle" font-size="12" fill="#222">queries per task</text>`
  );
  parts.push(
    `<text x="16" y="${mt + ph / 2}" text-anchor="middle" font-size="12" fill="#222" transform="rotate(-90 16 ${mt + ph / 2})">mean error fraction</text>`
  );

  series.forEach((s, i) => {
    const color = colorOf(s.algorithm, i);
    const path = s.points
      .map((p, k) => `${k === 0 ? "M" : "L"}${xOf(p.budget).toFixed(2)},${yOf(p.mean).toFixed(2)}`)
      .join(" ");
    parts.push(`<path d="${path}" fill="none" stroke="${color}" stroke-width="1.6"/>`);
    for (const p of s.points) {
      const x = xOf(p.budget);
      const yLo = yOf(clamp(p.mean - p.stderr));
      const yHi = yOf(clamp(p.mean + p.stderr));
      parts.push(`<line x1="${x}" y1="${yLo.toFixed(2)}" x2="${x}" y2="${yHi.toFixed(2)}" stroke="${color}"/>`);
      parts.push(
        `<line x1="${x - 3}" y1="${yLo.toFixed(2)}" x2="${x + 3}" y2="${yLo.toFixed(2)}" stroke="${color}"/>`
      );
      parts.push(
        `<line x1="${x - 3}" y1="${yHi.toFixed(2)}" x2="${x + 3}" y2="${yHi.toFixed(2)}" stroke="${color}"/>`
      );
      parts.push(`<circle cx="${x}" cy="${yOf(p.mean).toFixed(2)}" r="2.5" fill="${color}"/>`);
    }
  });

  series.forEach((s, i) => {
    const color = colorOf(s.algorithm, i);
    const x = ml + 10;
    const y = mt + 12 + i * 15;
    parts.push(`<line x1="${x}" y1="${y - 3}" x2="${x + 18}" y2="${y - 3}" stroke="${color}" stroke-width="1.6"/>`);
    parts.push(`<text x="${x + 24}" y="${y}" font-size="11" fill="#222">${esc(s.algorithm)}</text>`);
  });

  parts.push("</svg>");
  return parts.join("\n");
}
