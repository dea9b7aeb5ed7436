/** The three figure kinds over ktrace CSVs.
 *
 * Extraction keeps the raw column strings (the tests check they byte-match
 * the file); numbers are parsed only when mapping to pixels. Nothing here
 * recomputes errors or percentiles.
 */

import { Table, columnIndex } from "./csv";
import { Color, PALETTE, Raster } from "./raster";

const BLACK: Color = [0, 0, 0];
const GRAY: Color = [200, 200, 200];
const LIGHT: Color = [235, 235, 235];

export interface Series {
  label: string;
  x: string[];
  y: string[];
}

export function extractBetaCurves(table: Table): Series[] {
  const config = columnIndex(table, "config");
  const trial = columnIndex(table, "trial");
  const beta = columnIndex(table, "beta");
  const err = columnIndex(table, "rel_error");
  let rows = table.rows.filter((r) => r[trial] === "p90");
  if (rows.length === 0) {
    rows = table.rows.filter((r) => r[err] !== "");
  }
  if (rows.length === 0) {
    throw new Error("empty data: no rows with a rel_error value");
  }
  const byConfig = new Map<string, Series>();
  for (const r of rows) {
    let series = byConfig.get(r[config]);
    if (!series) {
      series = { label: r[config], x: [], y: [] };
      byConfig.set(r[config], series);
    }
    series.x.push(r[beta]);
    series.y.push(r[err]);
  }
  return [...byConfig.values()];
}

export interface GridCell {
  spectrum: string;
  q: string;
  b: string;
  r: string;
  krylov: string;
  naive: string;
}

export function extractProjectionGrid(table: Table): GridCell[] {
  const spectrum = columnIndex(table, "spectrum");
  const q = columnIndex(table, "q");
  const b = columnIndex(table, "b");
  const r = columnIndex(table, "r");
  const kry = columnIndex(table, "krylov_residual");
  const naive = columnIndex(table, "naive_residual");
  if (table.rows.length === 0) {
    throw new Error("empty data: projection CSV has no rows");
  }
  return table.rows.map((row) => ({
    spectrum: row[spectrum],
    q: row[q],
    b: row[b],
    r: row[r],
    krylov: row[kry],
    naive: row[naive],
  }));
}

export interface BarGroup {
  label: string;
  total: string;
  deflation: string;
}

export function extractAdaptiveCompare(table: Table): BarGroup[] {
  const config = columnIndex(table, "config");
  const trial = columnIndex(table, "trial");
  const matvecs = columnIndex(table, "matvecs");
  const deflation = columnIndex(table, "matvecs_deflation");
  const rows = table.rows.filter((r) => r[trial] === "mean");
  if (rows.length === 0) {
    throw new Error("empty data: no 'mean' summary rows to plot");
  }
  return rows.map((r) => ({
    label: r[config],
    total: r[matvecs],
    deflation: r[deflation],
  }));
}

function niceExp(v: number): string {
  return `1E${v}`;
}

interface Frame {
  x0: number;
  y0: number;
  w: number;
  h: number;
}

function drawLogLogFrame(
  img: Raster,
  frame: Frame,
  xRange: [number, number],
  yRange: [number, number],
): (x: number, y: number) => [number, number] {
  const { x0, y0, w, h } = frame;
  img.fillRect(x0, y0, w, h, LIGHT);
  const toPx = (x: number, y: number): [number, number] => [
    x0 + ((x - xRange[0]) / (xRange[1] - xRange[0])) * w,
    y0 + h - ((y - yRange[0]) / (yRange[1] - yRange[0])) * h,
  ];
  for (let e = Math.ceil(xRange[0]); e <= Math.floor(xRange[1]); e++) {
    const [px] = toPx(e, yRange[0]);
    img.fillRect(Math.round(px), y0, 1, h, GRAY);
    img.text(px - 8, y0 + h + 6, niceExp(e), BLACK);
  }
  for (let e = Math.ceil(yRange[0]); e <= Math.floor(yRange[1]); e++) {
    const [, py] = toPx(xRange[0], e);
    img.fillRect(x0, Math.round(py), w, 1, GRAY);
    img.text(x0 - img.textWidth(niceExp(e)) - 4, py - 3, niceExp(e), BLACK);
  }
  img.fillRect(x0, y0, w, 1, BLACK);
  img.fillRect(x0, y0 + h, w, 1, BLACK);
  img.fillRect(x0, y0, 1, h, BLACK);
  img.fillRect(x0 + w, y0, 1, h, BLACK);
  return toPx;
}

export function renderBetaCurves(table: Table): Raster {
  const series = extractBetaCurves(table);
  const img = new Raster(960, 560);
  const frame: Frame = { x0: 70, y0: 40, w: 560, h: 440 };

  const pts = series.map((s) =>
    s.x.map((xs, i) => [parseFloat(xs), parseFloat(s.y[i])] as [number, number])
      .filter(([x, y]) => x > 0 && y > 0),
  );
  const logs = pts.flat().map(([x, y]) => [Math.log10(x), Math.log10(y)]);
  if (logs.length === 0) {
    throw new Error("empty data: no positive (beta, rel_error) points");
  }
  const xs = logs.map((p) => p[0]);
  const ys = logs.map((p) => p[1]);
  const pad = 0.3;
  const xRange: [number, number] = [Math.min(...xs) - pad, Math.max(...xs) + pad];
  const yRange: [number, number] = [Math.min(...ys) - pad, Math.max(...ys) + pad];
  const toPx = drawLogLogFrame(img, frame, xRange, yRange);

  img.text(frame.x0, 16, "90TH PERCENTILE RELATIVE ERROR VS BETA (LOG-LOG)", BLACK);
  series.forEach((s, si) => {
    const color = PALETTE[si % PALETTE.length];
    const line = pts[si].map(([x, y]) => toPx(Math.log10(x), Math.log10(y)));
    for (let i = 1; i < line.length; i++) {
      img.line(line[i - 1][0], line[i - 1][1], line[i][0], line[i][1], color);
    }
    for (const [px, py] of line) {
      img.marker(px, py, color);
    }
    const ly = 40 + si * 14;
    img.fillRect(650, ly, 10, 10, color);
    img.text(664, ly + 1, s.label.slice(0, 46), BLACK);
  });
  return img;
}

function residualColor(value: number, lo: number, hi: number): Color {
  // log-scaled blue (small) to red (large)
  const t = hi > lo ? (Math.log10(value) - lo) / (hi - lo) : 0.5;
  const c = Math.max(0, Math.min(1, t));
  return [Math.round(60 + 195 * c), 70, Math.round(255 - 195 * c)];
}

export function renderProjectionGrid(table: Table): Raster {
  const cells = extractProjectionGrid(table);
  const panels = new Map<string, GridCell[]>();
  for (const cell of cells) {
    const key = `${cell.spectrum} R=${cell.r}`;
    const list = panels.get(key) ?? [];
    list.push(cell);
    panels.set(key, list);
  }
  const qs = [...new Set(cells.map((c) => parseFloat(c.q)))].sort((a, b) => a - b);
  const bs = [...new Set(cells.map((c) => parseFloat(c.b)))].sort((a, b) => a - b);
  const vals = cells.map((c) => parseFloat(c.krylov)).filter((v) => v > 0);
  const lo = Math.log10(Math.min(...vals));
  const hi = Math.log10(Math.max(...vals));

  const cellW = 64;
  const cellH = 28;
  const panelW = qs.length * cellW + 50;
  const panelH = bs.length * cellH + 64;
  const cols = Math.min(panels.size, 2);
  const rowsOfPanels = Math.ceil(panels.size / cols);
  const img = new Raster(40 + cols * (panelW + 20), 40 + rowsOfPanels * (panelH + 20));

  let panelIdx = 0;
  for (const [key, list] of panels) {
    const px0 = 40 + (panelIdx % cols) * (panelW + 20);
    const py0 = 40 + Math.floor(panelIdx / cols) * (panelH + 20);
    img.text(px0, py0 - 12, `${key} (KRYLOV RESIDUAL, BLANK = NOT COMPUTED)`, BLACK);
    const have = new Map(list.map((c) => [`${parseFloat(c.q)},${parseFloat(c.b)}`, c]));
    bs.forEach((bv, bi) => {
      img.text(px0 - 34, py0 + bi * cellH + 10, `B=${bv}`, BLACK);
      qs.forEach((qv, qi) => {
        const cx = px0 + 16 + qi * cellW;
        const cy = py0 + bi * cellH;
        const cell = have.get(`${qv},${bv}`);
        if (!cell) {
          // absent cell (q*b too large): rendered blank
          img.fillRect(cx, cy, cellW - 2, cellH - 2, [255, 255, 255]);
          for (let t = 0; t < cellW - 2; t += 4) {
            img.set(cx + t, cy + cellH / 2, GRAY);
          }
          return;
        }
        const v = parseFloat(cell.krylov);
        img.fillRect(cx, cy, cellW - 2, cellH - 2, residualColor(v, lo, hi));
        img.text(cx + 4, cy + cellH / 2 - 3, v.toExponential(1), [255, 255, 255]);
      });
    });
    qs.forEach((qv, qi) => {
      img.text(px0 + 16 + qi * cellW + 4, py0 + bs.length * cellH + 6, `Q=${qv}`, BLACK);
    });
    panelIdx += 1;
  }
  return img;
}

export function renderAdaptiveCompare(table: Table): Raster {
  const groups = extractAdaptiveCompare(table);
  const img = new Raster(960, 480);
  const frame: Frame = { x0: 70, y0: 40, w: 520, h: 360 };
  img.fillRect(frame.x0, frame.y0, frame.w, frame.h, LIGHT);
  const totals = groups.map((g) => parseFloat(g.total));
  const maxTotal = Math.max(...totals) * 1.1;
  const barW = Math.max(8, Math.floor(frame.w / (groups.length * 2)));

  const deflColor: Color = PALETTE[0];
  const sampColor: Color = PALETTE[4];
  groups.forEach((g, gi) => {
    const total = parseFloat(g.total);
    const defl = parseFloat(g.deflation);
    const x = frame.x0 + 10 + gi * 2 * barW;
    const hTotal = Math.round((total / maxTotal) * frame.h);
    const hDefl = Math.round((defl / maxTotal) * frame.h);
    const yBase = frame.y0 + frame.h;
    img.fillRect(x, yBase - hTotal, barW, hTotal - hDefl, sampColor);
    img.fillRect(x, yBase - hDefl, barW, hDefl, deflColor);
    img.text(x, yBase + 6, String(gi + 1), BLACK);
    const ly = 40 + gi * 14;
    img.text(620, ly, `${gi + 1}: ${g.label.slice(0, 52)}`, BLACK);
  });
  // y ticks at quarters of the max
  for (let i = 0; i <= 4; i++) {
    const v = (maxTotal * i) / 4;
    const y = frame.y0 + frame.h - Math.round((v / maxTotal) * frame.h);
    img.fillRect(frame.x0 - 4, y, 4, 1, BLACK);
    img.text(frame.x0 - img.textWidth(String(Math.round(v))) - 8, y - 3,
             String(Math.round(v)), BLACK);
  }
  img.text(frame.x0, 16, "MEAN MATVECS: DEFLATION (BLUE) + SAMPLING (ORANGE)", BLACK);
  img.fillRect(frame.x0, frame.y0, frame.w, 1, BLACK);
  img.fillRect(frame.x0, frame.y0 + frame.h, frame.w, 1, BLACK);
  img.fillRect(frame.x0, frame.y0, 1, frame.h, BLACK);
  return img;
}

export const KINDS: Record<string, (table: Table) => Raster> = {
  beta_curves: renderBetaCurves,
  projection_grid: renderProjectionGrid,
  adaptive_compare: renderAdaptiveCompare,
};
