/** Deterministic hand-rolled SVG line charts: fixed styling, fixed number
 * formatting, no timestamps, so identical inputs render identical bytes. */

export interface Series {
  label: string;
  xs: number[];
  ys: number[];
}

export interface ChartSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  /** x position for a dashed vertical marker (e.g. attack start), if any */
  markerX?: number;
  width?: number;
  height?: number;
  yDomain?: [number, number];
}

const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
  "#8c564b", "#17becf", "#7f7f7f",
];

const MARGIN = { top: 34, right: 16, bottom: 40, left: 48 };

function fmt(x: number): string {
  return x.toFixed(2).replace(/-0\.00/, "0.00");
}

function ticks(lo: number, hi: number, count: number): number[] {
  const out: number[] = [];
  for (let i = 0; i <= count; i++) out.push(lo + ((hi - lo) * i) / count);
  return out;
}

export function renderLineChart(spec: ChartSpec): string {
  const width = spec.width ?? 480;
  const height = spec.height ?? 320;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;

  const allX = spec.series.flatMap((s) => s.xs);
  const xLo = Math.min(...allX);
  const xHi = Math.max(...allX);
  const [yLo, yHi] = spec.yDomain ?? [0, 1];
  const sx = (x: number) =>
    MARGIN.left + ((x - xLo) / Math.max(xHi - xLo, 1e-9)) * plotW;
  const sy = (y: number) =>
    MARGIN.top + plotH - ((y - yLo) / Math.max(yHi - yLo, 1e-9)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
      `height="${height}" viewBox="0 0 ${width} ${height}" ` +
      `font-family="Helvetica,Arial,sans-serif">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<text x="${width / 2}" y="18" text-anchor="middle" font-size="13" ` +
      `font-weight="bold">${escapeXml(spec.title)}</text>`,
  );

  // gridlines + axis labels
  for (const t of ticks(yLo, yHi, 5)) {
    const y = fmt(sy(t));
    parts.push(
      `<line x1="${MARGIN.left}" y1="${y}" x2="${width - MARGIN.right}" ` +
        `y2="${y}" stroke="#dddddd" stroke-width="1"/>`,
    );
    parts.push(
      `<text x="${MARGIN.left - 6}" y="${fmt(sy(t) + 3.5)}" ` +
        `text-anchor="end" font-size="10">${fmt(t)}</text>`,
    );
  }
  for (const t of ticks(xLo, xHi, 6)) {
    parts.push(
      `<text x="${fmt(sx(t))}" y="${height - MARGIN.bottom + 16}" ` +
        `text-anchor="middle" font-size="10">${fmt(t)}</text>`,
    );
  }
  parts.push(
    `<text x="${MARGIN.left + plotW / 2}" y="${height - 8}" ` +
      `text-anchor="middle" font-size="11">${escapeXml(spec.xLabel)}</text>`,
  );
  parts.push(
    `<text x="14" y="${MARGIN.top + plotH / 2}" text-anchor="middle" ` +
      `font-size="11" transform="rotate(-90 14 ${MARGIN.top + plotH / 2})">` +
      `${escapeXml(spec.yLabel)}</text>`,
  );

  if (spec.markerX !== undefined && spec.markerX >= xLo &&
      spec.markerX <= xHi) {
    const x = fmt(sx(spec.markerX));
    parts.push(
      `<line x1="${x}" y1="${MARGIN.top}" x2="${x}" ` +
        `y2="${MARGIN.top + plotH}" stroke="#444444" stroke-width="1" ` +
        `stroke-dasharray="5,4" data-marker="attack-start"/>`,
    );
  }

  spec.series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const pts = s.xs
      .map((x, j) => `${fmt(sx(x))},${fmt(sy(s.ys[j]))}`)
      .join(" ");
    parts.push(
      `<polyline fill="none" stroke="${color}" stroke-width="1.6" ` +
        `data-series="${escapeXml(s.label)}" points="${pts}"/>`,
    );
    const ly = MARGIN.top + 6 + i * 14;
    parts.push(
      `<line x1="${width - MARGIN.right - 96}" y1="${ly}" ` +
        `x2="${width - MARGIN.right - 78}" y2="${ly}" stroke="${color}" ` +
        `stroke-width="2"/>`,
    );
    parts.push(
      `<text x="${width - MARGIN.right - 74}" y="${ly + 3.5}" ` +
        `font-size="10">${escapeXml(s.label)}</text>`,
    );
  });

  // frame
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" ` +
      `height="${plotH}" fill="none" stroke="#333333" stroke-width="1"/>`,
  );
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
