/** Embeddable grammar renderer: chart-grammar JSON in, SVG scene out.
 *
 * Every visual element keeps the server's mark_id, so hit-testing talks the
 * same addresses the service uses for gesture translation. No DOM access
 * here; app.ts mounts the SVG string and wires events. */

import { bandScale, linearScale, logScale, Scale } from "./scales.js";
import { ChartGrammar, MarkAddress } from "./types.js";

export interface SceneMark {
  markId: string;
  shape: "rect" | "circle" | "slice" | "row";
  x: number;
  y: number;
  width: number;
  height: number;
  /** pie slices: start/end angle in radians */
  theta0?: number;
  theta1?: number;
  channelValues: Record<string, number | string>;
  rowKeys: string[];
}

export interface Scene {
  width: number;
  height: number;
  plot: { x: number; y: number; width: number; height: number };
  marks: SceneMark[];
  xScale?: Scale;
  yScale?: Scale;
  polyline?: string;
  kind: ChartGrammar["mark"];
}

const WIDTH = 560;
const HEIGHT = 320;
const PAD = { left: 56, right: 16, top: 16, bottom: 40 };

function domainOf(values: (number | string)[]): [number, number] {
  const nums = values.map(Number).filter((v) => Number.isFinite(v));
  if (!nums.length) return [0, 1];
  let lo = Math.min(...nums);
  let hi = Math.max(...nums);
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  return [lo, hi];
}

function channelValues(marks: MarkAddress[], channel: string): (number | string)[] {
  return marks.map((m) => m.channel_values[channel]).filter((v) => v !== undefined);
}

export function buildScene(chart: ChartGrammar): Scene {
  const plot = {
    x: PAD.left,
    y: PAD.top,
    width: WIDTH - PAD.left - PAD.right,
    height: HEIGHT - PAD.top - PAD.bottom,
  };
  const marks = chart.usermeta.marks;
  const scene: Scene = { width: WIDTH, height: HEIGHT, plot, marks: [], kind: chart.mark };

  if (chart.mark === "arc") {
    const total = channelValues(marks, "theta").reduce((acc: number, v) => acc + Number(v), 0) || 1;
    const cx = plot.x + plot.width / 2;
    const cy = plot.y + plot.height / 2;
    const radius = Math.min(plot.width, plot.height) / 2 - 4;
    let angle = -Math.PI / 2;
    for (const mark of marks) {
      const frac = Number(mark.channel_values["theta"]) / total;
      const theta0 = angle;
      const theta1 = angle + frac * 2 * Math.PI;
      angle = theta1;
      scene.marks.push({
        markId: mark.mark_id,
        shape: "slice",
        x: cx,
        y: cy,
        width: radius,
        height: radius,
        theta0,
        theta1,
        channelValues: mark.channel_values,
        rowKeys: mark.row_keys,
      });
    }
    return scene;
  }

  if (chart.mark === "table") {
    const rowHeight = Math.min(24, plot.height / Math.max(marks.length, 1));
    marks.forEach((mark, i) => {
      scene.marks.push({
        markId: mark.mark_id,
        shape: "row",
        x: plot.x,
        y: plot.y + i * rowHeight,
        width: plot.width,
        height: rowHeight - 2,
        channelValues: mark.channel_values,
        rowKeys: mark.row_keys,
      });
    });
    return scene;
  }

  const xEnc = chart.encoding["x"];
  const yEnc = chart.encoding["y"];
  const xValues = channelValues(marks, "x");
  const yValues = channelValues(marks, "y");
  const xQuantitative = xEnc?.type === "quantitative" || xEnc?.type === "temporal";
  const xScale: Scale = xQuantitative
    ? (xEnc?.scale?.type === "log"
        ? logScale(domainOf(xValues), [plot.x, plot.x + plot.width])
        : linearScale(domainOf(xValues), [plot.x, plot.x + plot.width]))
    : bandScale(xValues, [plot.x, plot.x + plot.width]);
  const yDomain = domainOf(yValues);
  const yScale: Scale = yEnc?.scale?.type === "log"
    ? logScale(yDomain, [plot.y + plot.height, plot.y])
    : linearScale([Math.min(0, yDomain[0]), yDomain[1]], [plot.y + plot.height, plot.y]);
  scene.xScale = xScale;
  scene.yScale = yScale;

  const band = xScale.kind === "band" ? (xScale as ReturnType<typeof bandScale>).bandwidth : 10;
  // bars grow from the zero line; log scales have none, so use the plot floor
  const baseline = yScale.kind === "log" ? plot.y + plot.height : yScale.apply(0);

  for (const mark of marks) {
    const xv = mark.channel_values["x"];
    const yv = mark.channel_values["y"];
    const px = xScale.apply(xv);
    const py = yScale.apply(yv);
    if (chart.mark === "bar") {
      scene.marks.push({
        markId: mark.mark_id,
        shape: "rect",
        x: xScale.kind === "band" ? px : px - band / 2,
        y: Math.min(py, baseline),
        width: band,
        height: Math.abs(baseline - py),
        channelValues: mark.channel_values,
        rowKeys: mark.row_keys,
      });
    } else {
      scene.marks.push({
        markId: mark.mark_id,
        shape: "circle",
        x: px,
        y: py,
        width: chart.mark === "point" ? 4 : 5,
        height: chart.mark === "point" ? 4 : 5,
        channelValues: mark.channel_values,
        rowKeys: mark.row_keys,
      });
    }
  }

  if (chart.mark === "line" || chart.mark === "area") {
    scene.polyline = scene.marks.map((m) => `${m.x},${m.y}`).join(" ");
  }
  return scene;
}

/** First mark whose geometry contains the point; the click address. */
export function hitTest(scene: Scene, px: number, py: number): SceneMark | null {
  for (const mark of scene.marks) {
    if (mark.shape === "rect" || mark.shape === "row") {
      if (px >= mark.x && px <= mark.x + mark.width && py >= mark.y && py <= mark.y + mark.height) {
        return mark;
      }
    } else if (mark.shape === "circle") {
      const r = mark.width + 3;
      if ((px - mark.x) ** 2 + (py - mark.y) ** 2 <= r * r) return mark;
    } else if (mark.shape === "slice") {
      const dx = px - mark.x;
      const dy = py - mark.y;
      const dist = Math.hypot(dx, dy);
      if (dist > mark.width) continue;
      let angle = Math.atan2(dy, dx);
      while (angle < mark.theta0!) angle += 2 * Math.PI;
      if (angle <= mark.theta1!) return mark;
    }
  }
  return null;
}

/** Marks whose anchor geometry falls inside the pixel rectangle. */
export function marksInRect(
  scene: Scene,
  x0: number,
  y0: number,
  x1: number,
  y1: number,
): SceneMark[] {
  const [lo_x, hi_x] = [Math.min(x0, x1), Math.max(x0, x1)];
  const [lo_y, hi_y] = [Math.min(y0, y1), Math.max(y0, y1)];
  return scene.marks.filter((m) => {
    const cx = m.shape === "rect" || m.shape === "row" ? m.x + m.width / 2 : m.x;
    const cy = m.shape === "rect" ? m.y : m.y; // bar tops participate in y-brushes
    return cx >= lo_x && cx <= hi_x && cy >= lo_y && cy <= hi_y;
  });
}

export function toSvg(scene: Scene, highlighted: Set<string> = new Set()): string {
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${scene.width}" height="${scene.height}" viewBox="0 0 ${scene.width} ${scene.height}">`,
    `<rect x="0" y="0" width="${scene.width}" height="${scene.height}" fill="#fff"/>`,
  ];
  if (scene.polyline) {
    parts.push(
      `<polyline points="${scene.polyline}" fill="none" stroke="#4c78a8" stroke-width="1.5"/>`,
    );
  }
  for (const mark of scene.marks) {
    const isHighlighted = mark.rowKeys.some((k) => highlighted.has(k));
    const fill = isHighlighted ? "#f58518" : "#4c78a8";
    const common = `data-mark-id="${mark.markId}" fill="${fill}"`;
    if (mark.shape === "rect" || mark.shape === "row") {
      const opacity = mark.shape === "row" ? 0.25 : 0.9;
      parts.push(
        `<rect ${common} x="${mark.x.toFixed(1)}" y="${mark.y.toFixed(1)}" width="${mark.width.toFixed(1)}" height="${mark.height.toFixed(1)}" opacity="${opacity}"/>`,
      );
    } else if (mark.shape === "circle") {
      parts.push(`<circle ${common} cx="${mark.x.toFixed(1)}" cy="${mark.y.toFixed(1)}" r="${mark.width}"/>`);
    } else {
      const { x, y, width: r, theta0, theta1 } = mark;
      const large = theta1! - theta0! > Math.PI ? 1 : 0;
      const x0 = x + r * Math.cos(theta0!);
      const y0 = y + r * Math.sin(theta0!);
      const x1 = x + r * Math.cos(theta1!);
      const y1 = y + r * Math.sin(theta1!);
      parts.push(
        `<path ${common} stroke="#fff" d="M ${x} ${y} L ${x0.toFixed(1)} ${y0.toFixed(1)} A ${r} ${r} 0 ${large} 1 ${x1.toFixed(1)} ${y1.toFixed(1)} Z"/>`,
      );
    }
  }
  parts.push("</svg>");
  return parts.join("");
}
