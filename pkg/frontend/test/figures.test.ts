import fs from "node:fs";
import os from "node:os";
import path from "node:path";
import { describe, expect, it } from "vitest";

import {
  extractAdaptiveCompare,
  extractBetaCurves,
  extractProjectionGrid,
  renderAdaptiveCompare,
  renderBetaCurves,
  renderProjectionGrid,
} from "../src/charts";
import { parseCsv } from "../src/csv";
import { run } from "../src/main";

const FIXTURES = path.join(__dirname, "fixtures");
const PNG_SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

function fixture(name: string): string {
  return fs.readFileSync(path.join(FIXTURES, name), "utf-8");
}

/** Independent raw extraction: plain line/comma split (fixture fields are
 * never quoted), so series byte-matching is checked against the file text. */
function rawColumns(text: string): { header: string[]; rows: string[][] } {
  const lines = text.split("\n").filter((l) => l.length > 0);
  const header = lines[0].split(",");
  return { header, rows: lines.slice(1).map((l) => l.split(",")) };
}

describe("beta_curves", () => {
  it("series byte-match the CSV columns", () => {
    const text = fixture("spin.csv");
    const series = extractBetaCurves(parseCsv(text));
    const { header, rows } = rawColumns(text);
    const trial = header.indexOf("trial");
    const config = header.indexOf("config");
    const beta = header.indexOf("beta");
    const err = header.indexOf("rel_error");
    for (const s of series) {
      const expected = rows.filter((r) => r[trial] === "p90" && r[config] === s.label);
      expect(s.x).toEqual(expected.map((r) => r[beta]));
      expect(s.y).toEqual(expected.map((r) => r[err]));
    }
    expect(series.length).toBeGreaterThan(1);
  });

  it("renders a PNG without error", () => {
    const img = renderBetaCurves(parseCsv(fixture("spin.csv")));
    const png = img.toPng();
    expect(png.subarray(0, 8)).toEqual(PNG_SIGNATURE);
    expect(img.width).toBeGreaterThan(0);
  });

  it("reports missing columns by name", () => {
    expect(() => extractBetaCurves(parseCsv("experiment,trial\nspin,0\n")))
      .toThrow(/config/);
  });

  it("rejects empty data", () => {
    const header = fixture("spin.csv").split("\n")[0];
    expect(() => extractBetaCurves(parseCsv(header + "\n"))).toThrow(/empty/i);
  });
});

describe("projection_grid", () => {
  it("cells byte-match the CSV columns", () => {
    const text = fixture("projection.csv");
    const cells = extractProjectionGrid(parseCsv(text));
    const { header, rows } = rawColumns(text);
    const kry = header.indexOf("krylov_residual");
    expect(cells.map((c) => c.krylov)).toEqual(rows.map((r) => r[kry]));
  });

  it("renders with blanks for skipped cells", () => {
    const table = parseCsv(fixture("projection.csv"));
    const cells = extractProjectionGrid(table);
    // q=600 cells were never computed (600*2 > 1024)
    expect(cells.every((c) => parseFloat(c.q) * parseFloat(c.b) <= 1024)).toBe(true);
    const png = renderProjectionGrid(table).toPng();
    expect(png.subarray(0, 8)).toEqual(PNG_SIGNATURE);
  });
});

describe("adaptive_compare", () => {
  it("bars byte-match the mean rows", () => {
    const text = fixture("adaptive.csv");
    const groups = extractAdaptiveCompare(parseCsv(text));
    const { header, rows } = rawColumns(text);
    const trial = header.indexOf("trial");
    const matvecs = header.indexOf("matvecs");
    const means = rows.filter((r) => r[trial] === "mean");
    expect(groups.map((g) => g.total)).toEqual(means.map((r) => r[matvecs]));
    expect(groups.length).toBe(6); // 3 p-values x 2 algorithms
  });

  it("renders a PNG", () => {
    const png = renderAdaptiveCompare(parseCsv(fixture("adaptive.csv"))).toPng();
    expect(png.subarray(0, 8)).toEqual(PNG_SIGNATURE);
  });
});

describe("cli", () => {
  it("writes one image per experiment CSV", () => {
    const tmp = fs.mkdtempSync(path.join(os.tmpdir(), "figures-"));
    const jobs: Array<[string, string]> = [
      ["beta_curves", "spin.csv"],
      ["projection_grid", "projection.csv"],
      ["adaptive_compare", "adaptive.csv"],
    ];
    for (const [kind, csv] of jobs) {
      const out = path.join(tmp, `${kind}.png`);
      const rc = run([kind, path.join(FIXTURES, csv), "-o", out]);
      expect(rc).toBe(0);
      const buf = fs.readFileSync(out);
      expect(buf.subarray(0, 8)).toEqual(PNG_SIGNATURE);
      expect(buf.length).toBeGreaterThan(1000);
    }
  });
});
