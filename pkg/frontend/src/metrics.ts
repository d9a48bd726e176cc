/** Strict readers for the experiment grid's manifest and metrics CSVs. */

import { readFileSync } from "fs";
import { join, dirname } from "path";

export interface ManifestCell {
  defense: string;
  attack: string;
  metrics_path: string;
  status: string;
  config?: Record<string, unknown>;
  error?: string;
}

export interface Manifest {
  attack_start_round: number;
  cells: ManifestCell[];
  dir: string;
}

export interface MetricsRow {
  round: number;
  test_accuracy: number;
  test_loss: number;
  wall_ms: number;
}

const CSV_COLUMNS = [
  "round",
  "test_accuracy",
  "test_loss",
  "wall_ms",
  "selected",
  "sampled",
  "true_malicious",
  "precision",
  "recall",
];

export function loadManifest(path: string): Manifest {
  const raw = JSON.parse(readFileSync(path, "utf8"));
  if (!Array.isArray(raw.cells)) {
    throw new Error(`manifest ${path} has no cells array`);
  }
  for (const cell of raw.cells) {
    for (const key of ["defense", "attack", "metrics_path", "status"]) {
      if (typeof cell[key] !== "string") {
        throw new Error(`manifest cell missing ${key}`);
      }
    }
  }
  const start = raw.attack_start_round;
  return {
    attack_start_round: typeof start === "number" ? start : 0,
    cells: raw.cells,
    dir: dirname(path),
  };
}

export function loadMetricsCsv(path: string): MetricsRow[] {
  const text = readFileSync(path, "utf8").trim();
  const lines = text.split("\n");
  const header = lines[0].split(",");
  if (header.join(",") !== CSV_COLUMNS.join(",")) {
    throw new Error(`unexpected CSV header in ${path}: ${lines[0]}`);
  }
  return lines.slice(1).map((line) => {
    const parts = line.split(",");
    return {
      round: Number(parts[0]),
      test_accuracy: Number(parts[1]),
      test_loss: Number(parts[2]),
      wall_ms: Number(parts[3]),
    };
  });
}

export function cellCsvPath(manifest: Manifest, cell: ManifestCell): string {
  return join(manifest.dir, cell.metrics_path);
}

/** Centered-window moving average used for curve smoothing. */
export function smooth(values: number[], window: number): number[] {
  if (window <= 1) return values.slice();
  const half = Math.floor(window / 2);
  return values.map((_, i) => {
    const lo = Math.max(0, i - half);
    const hi = Math.min(values.length - 1, i + half);
    let sum = 0;
    for (let j = lo; j <= hi; j++) sum += values[j];
    return sum / (hi - lo + 1);
  });
}
