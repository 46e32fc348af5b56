/** Pixel scales with inversion: the geometry half of gesture preview.
 *
 * Brush rectangles are converted to channel-value bounds client-side only
 * for instant feedback; the server's predicate echo remains the ground
 * truth for which rows are selected. */

export interface Scale {
  apply(value: number | string): number;
  /** pixel -> value; continuous scales interpolate, band scales snap. */
  invert(pixel: number): number | string;
  readonly kind: "linear" | "log" | "band";
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  return {
    kind: "linear",
    apply: (v) => r0 + ((Number(v) - d0) / span) * (r1 - r0),
    invert: (px) => d0 + ((px - r0) / (r1 - r0 || 1)) * span,
  };
}

export function logScale(domain: [number, number], range: [number, number]): Scale {
  const lo = Math.log(domain[0]);
  const hi = Math.log(domain[1]);
  const [r0, r1] = range;
  const span = hi - lo || 1;
  return {
    kind: "log",
    apply: (v) => r0 + ((Math.log(Number(v)) - lo) / span) * (r1 - r0),
    invert: (px) => Math.exp(lo + ((px - r0) / (r1 - r0 || 1)) * span),
  };
}

export function bandScale(values: (number | string)[], range: [number, number]): Scale & {
  bandwidth: number;
} {
  const distinct = [...new Set(values)];
  const [r0, r1] = range;
  const step = (r1 - r0) / Math.max(distinct.length, 1);
  return {
    kind: "band",
    bandwidth: step * 0.8,
    apply: (v) => r0 + distinct.indexOf(v) * step + step * 0.1,
    invert: (px) => {
      const slot = Math.min(
        distinct.length - 1,
        Math.max(0, Math.floor((px - r0) / (step || 1))),
      );
      return distinct[slot];
    },
  };
}

/** Convert a 1-d pixel brush into channel-value bounds for preview text. */
export function brushToBounds(scale: Scale, pxLo: number, pxHi: number): [number | string, number | string] {
  const a = scale.invert(Math.min(pxLo, pxHi));
  const b = scale.invert(Math.max(pxLo, pxHi));
  if (typeof a === "number" && typeof b === "number") {
    return a <= b ? [a, b] : [b, a];
  }
  return [a, b];
}
