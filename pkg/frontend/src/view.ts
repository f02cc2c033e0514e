/** Pure rendering helpers: strings and SVG path data, no DOM access.
 *
 * Keeping these DOM-free lets the tests run in plain Node and keeps every
 * displayed number a straight projection of a service response.
 */

import { CurvePoint } from "./api.js";
import { HeatSegment } from "./heatmap.js";
import { DisplayedScore } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

export function formatValue(value: number): string {
  return value.toFixed(4);
}

export function scoreLine(display: DisplayedScore): string {
  return `${display.label} ${formatValue(display.value)}`;
}

export function deltaText(delta: number): string {
  return (delta >= 0 ? "+" : "") + delta.toFixed(4);
}

/** Positive attributions shade red, negative blue, alpha by intensity. */
export function heatmapHtml(segments: HeatSegment[]): string {
  return segments
    .map((segment) => {
      if (!segment.attributed) {
        return escapeHtml(segment.text);
      }
      const [r, g, b] = segment.signed >= 0 ? [220, 38, 38] : [37, 99, 235];
      const alpha = segment.intensity.toFixed(3);
      const tip = (segment.signed >= 0 ? "+" : "") + segment.signed.toPrecision(3);
      return (
        `<span class="tok" style="background: rgba(${r},${g},${b},${alpha})" ` +
        `title="${tip}">${escapeHtml(segment.text)}</span>`
      );
    })
    .join("");
}

/** SVG path for the density curve, scaled into a width x height box with
 * the peak touching the top. Returns "" when there is no curve to draw. */
export function pdfCurvePath(
  curve: CurvePoint[] | null,
  width: number,
  height: number,
): string {
  if (curve === null || curve.length < 2) {
    return "";
  }
  let peak = 0;
  for (const point of curve) {
    peak = Math.max(peak, point.density);
  }
  if (peak <= 0 || !Number.isFinite(peak)) {
    peak = 1;
  }
  const steps = curve.map((point, i) => {
    const x = point.y * width;
    const y = height - (point.density / peak) * height;
    return `${i === 0 ? "M" : "L"}${x.toFixed(2)},${y.toFixed(2)}`;
  });
  return steps.join(" ");
}

/** Mark in [0, width] under the same x-scale as pdfCurvePath. */
export function curveMarkerX(value: number, width: number): number {
  return Math.min(Math.max(value, 0), 1) * width;
}
