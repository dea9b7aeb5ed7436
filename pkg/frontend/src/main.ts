#!/usr/bin/env node
/** figures <kind> <csv> -o <png> — render a ktrace experiment CSV. */

import fs from "node:fs";
import { KINDS } from "./charts";
import { parseCsv } from "./csv";

function usage(): never {
  console.error("usage: figures <beta_curves|projection_grid|adaptive_compare> <csv> -o <png>");
  process.exit(2);
}

export function run(argv: string[]): number {
  const args = argv.slice();
  const outIdx = args.indexOf("-o");
  if (outIdx < 0 || outIdx + 1 >= args.length) usage();
  const outPath = args[outIdx + 1];
  args.splice(outIdx, 2);
  if (args.length !== 2) usage();
  const [kind, csvPath] = args;
  const render = KINDS[kind];
  if (!render) usage();

  const text = fs.readFileSync(csvPath, "utf-8");
  const table = parseCsv(text);
  const img = render(table);
  fs.writeFileSync(outPath, img.toPng());
  console.log(`wrote ${outPath} (${img.width}x${img.height})`);
  return 0;
}

if (require.main === module) {
  try {
    process.exit(run(process.argv.slice(2)));
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    process.exit(1);
  }
}
