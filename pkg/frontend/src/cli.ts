/** CLI: render accuracy panels and the time-cost table from a grid manifest.
 *
 * usage: node dist/cli.js <curves|table|all> --manifest <path> --out <dir>
 *        [--smoothing N] [--group-by attack|defense] [--attack NAME]
 */

import { loadManifest } from "./metrics.js";
import { renderCurves, renderTimeTable, PlotSpec } from "./render.js";

function parseArgs(argv: string[]) {
  const verb = argv[0];
  const opts: Record<string, string> = {};
  for (let i = 1; i < argv.length; i += 2) {
    if (!argv[i].startsWith("--") || argv[i + 1] === undefined) {
      throw new Error(`bad argument ${argv[i]}`);
    }
    opts[argv[i].slice(2)] = argv[i + 1];
  }
  return { verb, opts };
}

export function main(argv: string[]): number {
  let verb: string;
  let opts: Record<string, string>;
  try {
    ({ verb, opts } = parseArgs(argv));
  } catch (e) {
    console.error(String(e));
    return 1;
  }
  if (!["curves", "table", "all"].includes(verb) || !opts.manifest) {
    console.error(
      "usage: cli <curves|table|all> --manifest <path> --out <dir> " +
        "[--smoothing N] [--group-by attack|defense] [--attack NAME]",
    );
    return 1;
  }
  const smoothing = Number(opts.smoothing ?? "1");
  if (!Number.isInteger(smoothing) || smoothing < 1) {
    console.error(`smoothing window must be an integer >= 1, got ${opts.smoothing}`);
    return 1;
  }
  const groupBy = (opts["group-by"] ?? "attack") as "attack" | "defense";
  if (groupBy !== "attack" && groupBy !== "defense") {
    console.error(`unknown group key ${groupBy}`);
    return 1;
  }
  const spec: PlotSpec = {
    manifest: loadManifest(opts.manifest),
    outputDir: opts.out ?? "plots",
    smoothingWindow: smoothing,
    panels: groupBy,
  };
  const missing: string[] = [];
  if (verb === "curves" || verb === "all") {
    const res = renderCurves(spec);
    res.written.forEach((p) => console.log(`wrote ${p}`));
    missing.push(...res.missing);
  }
  if (verb === "table" || verb === "all") {
    const res = renderTimeTable(spec, opts.attack);
    res.written.forEach((p) => console.log(`wrote ${p}`));
    missing.push(...res.missing);
  }
  for (const m of missing) console.error(`missing metrics file: ${m}`);
  return missing.length > 0 ? 1 : 0;
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
