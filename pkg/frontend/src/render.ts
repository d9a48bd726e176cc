/** Panel and table generation over a comparison-grid manifest. */

import { existsSync, mkdirSync, writeFileSync } from "fs";
import { join } from "path";

import {
  Manifest,
  ManifestCell,
  cellCsvPath,
  loadMetricsCsv,
  smooth,
} from "./metrics.js";
import { renderLineChart, Series } from "./svg.js";

export interface PlotSpec {
  manifest: Manifest;
  outputDir: string;
  smoothingWindow: number;
  /** panel grouping key: one panel per attack (lines = defenses) or the
   * transpose */
  panels: "attack" | "defense";
}

export interface RenderResult {
  written: string[];
  missing: string[];
}

function groupCells(manifest: Manifest, key: "attack" | "defense") {
  const groups = new Map<string, ManifestCell[]>();
  for (const cell of manifest.cells) {
    const k = key === "attack" ? cell.attack : cell.defense;
    if (!groups.has(k)) groups.set(k, []);
    groups.get(k)!.push(cell);
  }
  return groups;
}

export function renderCurves(spec: PlotSpec): RenderResult {
  mkdirSync(spec.outputDir, { recursive: true });
  const written: string[] = [];
  const missing: string[] = [];
  const groups = groupCells(spec.manifest, spec.panels);
  for (const [groupName, cells] of groups) {
    const series: Series[] = [];
    for (const cell of cells) {
      const csv = cellCsvPath(spec.manifest, cell);
      if (!existsSync(csv)) {
        missing.push(csv);
        continue;
      }
      const rows = loadMetricsCsv(csv);
      series.push({
        label: spec.panels === "attack" ? cell.defense : cell.attack,
        xs: rows.map((r) => r.round),
        ys: smooth(
          rows.map((r) => r.test_accuracy),
          spec.smoothingWindow,
        ),
      });
    }
    if (series.length === 0) continue;
    const svg = renderLineChart({
      title: `${spec.panels}: ${groupName}`,
      xLabel: "round",
      yLabel: "test accuracy",
      series,
      markerX:
        groupName === "none" && spec.panels === "attack"
          ? undefined
          : spec.manifest.attack_start_round,
    });
    const path = join(spec.outputDir, `panel_${groupName}.svg`);
    writeFileSync(path, svg);
    written.push(path);
  }
  return { written, missing };
}

/** Per-defense mean/variance of round wall time in seconds, two decimals.
 * Round 1 is excluded as warmup (noted in the footer); row order follows
 * the manifest. */
export function renderTimeTable(
  spec: PlotSpec,
  attack?: string,
): RenderResult {
  mkdirSync(spec.outputDir, { recursive: true });
  const missing: string[] = [];
  const rows: string[] = ["defense,attack,mean_s,var_s"];
  const lines: string[] = [
    pad("defense", 16) + pad("attack", 10) + pad("mean (s)", 10) +
      pad("var (s)", 10),
  ];
  for (const cell of spec.manifest.cells) {
    if (attack !== undefined && cell.attack !== attack) continue;
    const csv = cellCsvPath(spec.manifest, cell);
    if (!existsSync(csv)) {
      missing.push(csv);
      continue;
    }
    const data = loadMetricsCsv(csv).filter((r) => r.round >= 2);
    const secs = data.map((r) => r.wall_ms / 1000.0);
    const mean = secs.reduce((a, b) => a + b, 0) / Math.max(secs.length, 1);
    const variance =
      secs.reduce((a, b) => a + (b - mean) * (b - mean), 0) /
      Math.max(secs.length, 1);
    rows.push(
      `${cell.defense},${cell.attack},${mean.toFixed(2)},` +
        `${variance.toFixed(2)}`,
    );
    lines.push(
      pad(cell.defense, 16) + pad(cell.attack, 10) +
        pad(mean.toFixed(2), 10) + pad(variance.toFixed(2), 10),
    );
  }
  const footer = "# round 1 excluded as warmup";
  const csvPath = join(spec.outputDir, "time_table.csv");
  const txtPath = join(spec.outputDir, "time_table.txt");
  writeFileSync(csvPath, rows.join("\n") + "\n" + footer + "\n");
  writeFileSync(txtPath, lines.join("\n") + "\n" + footer + "\n");
  return { written: [csvPath, txtPath], missing };
}

function pad(s: string, width: number): string {
  return s.length >= width ? s + " " : s + " ".repeat(width - s.length);
}
