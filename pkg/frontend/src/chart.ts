/** History chart: SVG line of server-reported values over capture time,
 * horizontal shading for the server's signal bands, gaps where a reading
 * was Gray (dry night, unreadable chip), stepped segments for ordinal
 * scales. Pixel placement is the only arithmetic done client-side.
 */

import type { ChemicalKind, ChemicalPage, ReadingRecord } from "./types.js";

export interface SeriesPoint {
  t: number; // epoch ms
  value: number | null; // null renders as a gap
}

const SIGNAL_FILL: Record<string, string> = {
  green: "rgba(46, 125, 50, 0.14)",
  yellow: "rgba(240, 160, 0, 0.16)",
  red: "rgba(198, 40, 40, 0.14)",
};

const SVG_NS = "http://www.w3.org/2000/svg";

/** One point per processed record; Gray or missing measurements become gaps. */
export function buildHistorySeries(
  records: ReadingRecord[],
  chemical: ChemicalKind,
): SeriesPoint[] {
  return records
    .filter((r) => r.status !== "pending")
    .map((r) => {
      const item = r.report?.interpretations.find(
        (i) => i.chemical === chemical,
      );
      const measurement = r.reading?.measurements?.[chemical];
      const usable = item && item.signal !== "gray" && measurement;
      return {
        t: new Date(r.capturedAt).getTime(),
        value: usable ? measurement.value : null,
      };
    });
}

function yDomain(series: SeriesPoint[], page: ChemicalPage): [number, number] {
  const values = series
    .map((p) => p.value)
    .filter((v): v is number => v !== null);
  const knots = page.scale.values;
  const lo = Math.min(...knots, ...(values.length ? values : [Infinity]));
  const hi = Math.max(...knots, ...(values.length ? values : [-Infinity]));
  const pad = (hi - lo || 1) * 0.08;
  return [lo - pad, hi + pad];
}

function el(name: string, attrs: Record<string, string>): SVGElement {
  const node = document.createElementNS(SVG_NS, name);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  return node;
}

export interface ChartOptions {
  width?: number;
  height?: number;
  stepped?: boolean; // forced on for ordinal ("level") scales
}

export function renderHistoryChart(
  series: SeriesPoint[],
  page: ChemicalPage,
  options: ChartOptions = {},
): SVGElement {
  const width = options.width ?? 640;
  const height = options.height ?? 240;
  const margin = { left: 44, right: 12, top: 8, bottom: 22 };
  const innerW = width - margin.left - margin.right;
  const innerH = height - margin.top - margin.bottom;
  const stepped = options.stepped ?? page.unit === "level";

  const svg = el("svg", {
    viewBox: `0 0 ${width} ${height}`,
    width: String(width),
    height: String(height),
    role: "img",
    "aria-label": `${page.displayName} history`,
  });
  svg.classList.add("history-chart");

  const times = series.map((p) => p.t);
  const t0 = Math.min(...times);
  const t1 = Math.max(...times);
  const tSpan = t1 - t0 || 1;
  const [y0, y1] = yDomain(series, page);
  const x = (t: number) => margin.left + ((t - t0) / tSpan) * innerW;
  const y = (v: number) => margin.top + (1 - (v - y0) / (y1 - y0)) * innerH;

  // signal bands behind everything, one rect per rule interval
  for (const rule of page.rules) {
    const fill = SIGNAL_FILL[rule.signal];
    if (!fill) continue;
    const lo = Math.max(rule.min ?? -Infinity, y0);
    const hi = Math.min(rule.max ?? Infinity, y1);
    if (hi <= lo) continue;
    svg.appendChild(
      el("rect", {
        class: `band band-${rule.signal}`,
        x: String(margin.left),
        y: String(y(hi)),
        width: String(innerW),
        height: String(Math.max(y(lo) - y(hi), 0)),
        fill,
      }),
    );
  }

  // axis tick labels: scale knots on y, first/last capture on x
  for (const knot of page.scale.values) {
    if (knot < y0 || knot > y1) continue;
    const label = el("text", {
      class: "tick",
      x: String(margin.left - 6),
      y: String(y(knot) + 4),
      "text-anchor": "end",
      "font-size": "11",
    });
    label.textContent = String(knot);
    svg.appendChild(label);
  }
  if (series.length) {
    const stamps: [number, string][] = [
      [t0, new Date(t0).toLocaleDateString()],
      [t1, new Date(t1).toLocaleDateString()],
    ];
    for (const [t, text] of stamps) {
      const label = el("text", {
        class: "tick",
        x: String(x(t)),
        y: String(height - 6),
        "text-anchor": t === t0 ? "start" : "end",
        "font-size": "11",
      });
      label.textContent = text;
      svg.appendChild(label);
    }
  }

  // polyline segments, broken at gaps
  let segment: SeriesPoint[] = [];
  const segments: SeriesPoint[][] = [];
  for (const point of series) {
    if (point.value === null) {
      if (segment.length) segments.push(segment);
      segment = [];
    } else {
      segment.push(point);
    }
  }
  if (segment.length) segments.push(segment);

  for (const points of segments) {
    const first = points[0];
    if (!first || first.value === null) continue;
    let d = `M ${x(first.t).toFixed(1)} ${y(first.value).toFixed(1)}`;
    for (let i = 1; i < points.length; i++) {
      const point = points[i];
      if (!point || point.value === null) continue;
      const px = x(point.t).toFixed(1);
      const py = y(point.value).toFixed(1);
      if (stepped) {
        const prev = points[i - 1];
        if (prev && prev.value !== null) {
          d += ` L ${px} ${y(prev.value).toFixed(1)}`;
        }
      }
      d += ` L ${px} ${py}`;
    }
    svg.appendChild(
      el("path", {
        class: "series",
        d,
        fill: "none",
        stroke: "#1a237e",
        "stroke-width": "2",
      }),
    );
    for (const point of points) {
      if (point.value === null) continue;
      svg.appendChild(
        el("circle", {
          class: "dot",
          cx: x(point.t).toFixed(1),
          cy: y(point.value).toFixed(1),
          r: "2.5",
          fill: "#1a237e",
        }),
      );
    }
  }

  return svg;
}
