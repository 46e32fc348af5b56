import { describe, expect, it } from "vitest";

import { bandScale, brushToBounds, linearScale, logScale } from "../src/scales.js";

describe("scales", () => {
  it("linear apply/invert round-trips", () => {
    const scale = linearScale([0, 12], [56, 544]);
    for (const v of [0, 3.5, 12]) {
      expect(scale.invert(scale.apply(v))).toBeCloseTo(v, 9);
    }
  });

  it("log apply/invert round-trips", () => {
    const scale = logScale([1, 1000], [0, 300]);
    for (const v of [1, 10, 999]) {
      expect(scale.invert(scale.apply(v)) as number).toBeCloseTo(v, 6);
    }
  });

  it("band scale snaps pixels to category slots", () => {
    const scale = bandScale(["FL", "GA", "MN"], [0, 300]);
    expect(scale.invert(10)).toBe("FL");
    expect(scale.invert(150)).toBe("GA");
    expect(scale.invert(299)).toBe("MN");
  });

  it("brushToBounds orders bounds regardless of drag direction", () => {
    const scale = linearScale([0, 12], [0, 480]);
    const [lo, hi] = brushToBounds(scale, 320, 200);
    expect(lo).toBeLessThan(hi as number);
    expect(lo).toBeCloseTo(5, 6);
    expect(hi).toBeCloseTo(8, 6);
  });
});
