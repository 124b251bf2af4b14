// SVG renderer for the server's plot spec. The UI draws exactly the
// series and points it is given; all medical computation stays server-side.

import type { PlotSpec } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const PALETTE = ["#2f81f7", "#3fb950", "#d29922", "#f85149", "#bc8cff"];

const MARGIN = { top: 28, right: 16, bottom: 34, left: 52 };

function svgEl<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number>,
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [name, value] of Object.entries(attrs)) {
    el.setAttribute(name, String(value));
  }
  return el;
}

export function renderPlotSpec(spec: PlotSpec, width = 560, height = 260): SVGSVGElement {
  const svg = svgEl("svg", {
    width,
    height,
    viewBox: `0 0 ${width} ${height}`,
    class: "chart",
    role: "img",
  });

  const all = spec.series.flatMap((s) => s.points);
  const innerW = width - MARGIN.left - MARGIN.right;
  const innerH = height - MARGIN.top - MARGIN.bottom;

  const title = svgEl("text", { x: width / 2, y: 16, "text-anchor": "middle", class: "chart-title" });
  title.textContent = spec.title;
  svg.appendChild(title);

  const yLabel = svgEl("text", {
    x: 14,
    y: height / 2,
    transform: `rotate(-90 14 ${height / 2})`,
    "text-anchor": "middle",
    class: "chart-axis-label chart-y-label",
  });
  yLabel.textContent = spec.y_label;
  svg.appendChild(yLabel);

  const xLabel = svgEl("text", {
    x: MARGIN.left + innerW / 2,
    y: height - 6,
    "text-anchor": "middle",
    class: "chart-axis-label chart-x-label",
  });
  xLabel.textContent = spec.x_label;
  svg.appendChild(xLabel);

  if (all.length === 0) {
    const empty = svgEl("text", { x: width / 2, y: height / 2, "text-anchor": "middle" });
    empty.textContent = "no data";
    svg.appendChild(empty);
    return svg;
  }

  const ts = all.map((p) => p[0]);
  const vs = all.map((p) => p[1]);
  const tMin = Math.min(...ts);
  const tMax = Math.max(...ts);
  const vMin = Math.min(...vs);
  const vMax = Math.max(...vs);
  const tSpan = tMax - tMin || 1;
  const vSpan = vMax - vMin || 1;
  const sx = (t: number) => MARGIN.left + ((t - tMin) / tSpan) * innerW;
  const sy = (v: number) => MARGIN.top + innerH - ((v - vMin) / vSpan) * innerH;

  svg.appendChild(svgEl("rect", {
    x: MARGIN.left, y: MARGIN.top, width: innerW, height: innerH,
    class: "chart-plot-area", fill: "none", stroke: "#30363d",
  }));

  spec.series.forEach((series, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    const group = svgEl("g", { class: "chart-series", "data-sign": series.sign });
    if (series.points.length > 1) {
      const d = series.points
        .map((p, i) => `${i === 0 ? "M" : "L"}${sx(p[0]).toFixed(1)},${sy(p[1]).toFixed(1)}`)
        .join(" ");
      group.appendChild(svgEl("path", { d, fill: "none", stroke: color, "stroke-width": 1.5 }));
    }
    for (const [t, v] of series.points) {
      group.appendChild(svgEl("circle", {
        cx: sx(t).toFixed(1), cy: sy(v).toFixed(1), r: 2.5,
        fill: color, class: "chart-point",
      }));
    }
    svg.appendChild(group);
  });

  if (spec.series.length > 1) {
    spec.series.forEach((series, idx) => {
      const item = svgEl("text", {
        x: MARGIN.left + 8 + idx * 110, y: MARGIN.top + 12,
        fill: PALETTE[idx % PALETTE.length], class: "chart-legend",
      });
      item.textContent = series.sign;
      svg.appendChild(item);
    });
  }
  return svg;
}
