/**
 * Minimal deterministic SVG chart building: linear panels with ticks, point
 * markers, polylines, dashed reference lines and a small legend. No external
 * renderer; the output is a plain SVG document string.
 */

export interface Series {
  x: number[];
  y: number[];
  label: string;
  color: string;
  dashed?: boolean;
  marker?: boolean;
}

export interface PanelSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
}

const PANEL_W = 440;
const PANEL_H = 330;
const MARGIN = { left: 58, right: 16, top: 34, bottom: 44 };

function finitePairs(s: Series): Array<[number, number]> {
  const out: Array<[number, number]> = [];
  for (let i = 0; i < s.x.length; i++) {
    if (Number.isFinite(s.x[i]) && Number.isFinite(s.y[i])) {
      out.push([s.x[i], s.y[i]]);
    }
  }
  return out;
}

function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (!(hi > lo)) {
    hi = lo + 1;
  }
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const candidates = [step, 2 * step, 2.5 * step, 5 * step, 10 * step];
  const chosen = candidates.find((c) => span / c <= count + 1) ?? 10 * step;
  const first = Math.ceil(lo / chosen) * chosen;
  const ticks: number[] = [];
  for (let v = first; v <= hi + 1e-12; v += chosen) {
    ticks.push(Math.abs(v) < 1e-12 ? 0 : v);
  }
  return ticks;
}

function fmtTick(v: number): string {
  if (v === 0) return "0";
  if (Math.abs(v) >= 1000 || Math.abs(v) < 0.01) return v.toExponential(0);
  return String(Math.round(v * 1000) / 1000);
}

export function renderPanel(spec: PanelSpec, x0: number, y0: number): string {
  const pts = spec.series.flatMap(finitePairs);
  let xLo = Math.min(...pts.map((p) => p[0]));
  let xHi = Math.max(...pts.map((p) => p[0]));
  let yLo = Math.min(...pts.map((p) => p[1]));
  let yHi = Math.max(...pts.map((p) => p[1]));
  if (pts.length === 0) {
    xLo = 0; xHi = 1; yLo = 0; yHi = 1;
  }
  const padY = 0.08 * (yHi - yLo || 1);
  yLo -= padY;
  yHi += padY;
  const padX = 0.05 * (xHi - xLo || 1);
  xLo -= padX;
  xHi += padX;
  const plotW = PANEL_W - MARGIN.left - MARGIN.right;
  const plotH = PANEL_H - MARGIN.top - MARGIN.bottom;
  const sx = (v: number) => x0 + MARGIN.left + ((v - xLo) / (xHi - xLo)) * plotW;
  const sy = (v: number) => y0 + MARGIN.top + (1 - (v - yLo) / (yHi - yLo)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<rect x="${x0 + MARGIN.left}" y="${y0 + MARGIN.top}" width="${plotW}" height="${plotH}" fill="none" stroke="#444"/>`
  );
  parts.push(
    `<text x="${x0 + PANEL_W / 2}" y="${y0 + 20}" text-anchor="middle" font-size="13" font-weight="bold">${spec.title}</text>`
  );
  for (const t of niceTicks(xLo, xHi)) {
    const px = sx(t);
    parts.push(`<line x1="${px}" y1="${sy(yLo)}" x2="${px}" y2="${sy(yLo) + 4}" stroke="#444"/>`);
    parts.push(`<text x="${px}" y="${sy(yLo) + 16}" text-anchor="middle" font-size="10">${fmtTick(t)}</text>`);
  }
  for (const t of niceTicks(yLo, yHi)) {
    const py = sy(t);
    parts.push(`<line x1="${sx(xLo) - 4}" y1="${py}" x2="${sx(xLo)}" y2="${py}" stroke="#444"/>`);
    parts.push(`<text x="${sx(xLo) - 6}" y="${py + 3}" text-anchor="end" font-size="10">${fmtTick(t)}</text>`);
  }
  parts.push(
    `<text x="${x0 + MARGIN.left + plotW / 2}" y="${y0 + PANEL_H - 8}" text-anchor="middle" font-size="11">${spec.xLabel}</text>`
  );
  parts.push(
    `<text x="${x0 + 14}" y="${y0 + MARGIN.top + plotH / 2}" text-anchor="middle" font-size="11" transform="rotate(-90 ${x0 + 14} ${y0 + MARGIN.top + plotH / 2})">${spec.yLabel}</text>`
  );
  let legendY = y0 + MARGIN.top + 12;
  for (const s of spec.series) {
    const pp = finitePairs(s);
    if (pp.length === 0) continue;
    const d = pp.map(([x, y], i) => `${i === 0 ? "M" : "L"}${sx(x).toFixed(2)},${sy(y).toFixed(2)}`).join(" ");
    const dash = s.dashed ? ' stroke-dasharray="6,4"' : "";
    parts.push(`<path d="${d}" fill="none" stroke="${s.color}" stroke-width="1.6"${dash}/>`);
    if (s.marker !== false && !s.dashed) {
      for (const [x, y] of pp) {
        parts.push(`<circle cx="${sx(x).toFixed(2)}" cy="${sy(y).toFixed(2)}" r="3" fill="${s.color}"/>`);
      }
    }
    const lx = x0 + MARGIN.left + plotW - 150;
    parts.push(`<line x1="${lx}" y1="${legendY - 3}" x2="${lx + 22}" y2="${legendY - 3}" stroke="${s.color}"${dash} stroke-width="1.6"/>`);
    parts.push(`<text x="${lx + 27}" y="${legendY}" font-size="10">${s.label}</text>`);
    legendY += 14;
  }
  return parts.join("\n");
}

export function renderFigure(panels: PanelSpec[], columns = 2): string {
  const rows = Math.ceil(panels.length / columns);
  const width = columns * PANEL_W;
  const height = rows * PANEL_H;
  const body = panels
    .map((p, i) => renderPanel(p, (i % columns) * PANEL_W, Math.floor(i / columns) * PANEL_H))
    .join("\n");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" width="${width}" height="${height}" font-family="Helvetica, Arial, sans-serif">\n` +
    `<rect width="${width}" height="${height}" fill="white"/>\n${body}\n</svg>\n`
  );
}
