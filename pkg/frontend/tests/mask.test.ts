import { describe, expect, it } from "vitest";

import {
  createMask, hairCoverage, masksEqual, paintStroke,
} from "../src/mask.js";

function discAreaOracle(radius: number): number {
  // count lattice points inside the disc by brute force
  let count = 0;
  for (let y = -radius; y <= radius; y++) {
    for (let x = -radius; x <= radius; x++) {
      if (x * x + y * y <= radius * radius) count++;
    }
  }
  return count;
}

function paintedCount(mask: { data: Uint8Array }): number {
  let count = 0;
  for (const v of mask.data) count += v;
  return count;
}

describe("paintStroke", () => {
  it("stamps a disc whose pixel count matches the rasterized-disc oracle", () => {
    const radius = 10;
    const mask = createMask(128, 128);
    const painted = paintStroke(mask, [{ x: 64, y: 64 }],
                                { mode: "paint", radius });
    const oracle = discAreaOracle(radius);
    const ring = 2 * Math.ceil(2 * Math.PI * radius); // boundary slack
    expect(Math.abs(paintedCount(painted) - oracle)).toBeLessThanOrEqual(ring);
    // exact match for the same center convention
    expect(paintedCount(painted)).toBe(oracle);
  });

  it("erasing the whole canvas drops coverage to zero", () => {
    const mask = createMask(128, 128, 1);
    expect(hairCoverage(mask)).toBe(1);
    const erased = paintStroke(mask, [{ x: 64, y: 64 }],
                               { mode: "erase", radius: 200 });
    expect(hairCoverage(erased)).toBe(0);
  });

  it("does not mutate its input", () => {
    const mask = createMask(32, 32);
    paintStroke(mask, [{ x: 16, y: 16 }], { mode: "paint", radius: 5 });
    expect(paintedCount(mask)).toBe(0);
  });

  it("connects consecutive path points without gaps", () => {
    const mask = createMask(64, 64);
    const painted = paintStroke(mask, [{ x: 4, y: 4 }, { x: 60, y: 4 }],
                                { mode: "paint", radius: 1 });
    for (let x = 4; x <= 60; x++) {
      expect(painted.data[4 * 64 + x]).toBe(1);
    }
  });

  it("clips strokes at the canvas border", () => {
    const mask = createMask(16, 16);
    const painted = paintStroke(mask, [{ x: 0, y: 0 }], { mode: "paint", radius: 8 });
    expect(painted.data.length).toBe(256);
    expect(paintedCount(painted)).toBeGreaterThan(0);
  });

  it("values stay strictly binary", () => {
    let mask = createMask(32, 32);
    mask = paintStroke(mask, [{ x: 10, y: 10 }], { mode: "paint", radius: 6 });
    mask = paintStroke(mask, [{ x: 12, y: 10 }], { mode: "paint", radius: 6 });
    mask = paintStroke(mask, [{ x: 8, y: 8 }], { mode: "erase", radius: 2 });
    for (const v of mask.data) expect(v === 0 || v === 1).toBe(true);
  });
});

describe("masksEqual", () => {
  it("detects equality and difference", () => {
    const a = createMask(8, 8);
    const b = createMask(8, 8);
    expect(masksEqual(a, b)).toBe(true);
    b.data[3] = 1;
    expect(masksEqual(a, b)).toBe(false);
    expect(masksEqual(a, createMask(8, 4))).toBe(false);
  });
});
