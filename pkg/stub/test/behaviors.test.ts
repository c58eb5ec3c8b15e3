import { describe, it } from "node:test";
import assert from "node:assert/strict";

import {
  createBehavior,
  DEFAULT_OPTIONS,
  erodeGrid,
  shiftGrid,
} from "../src/behaviors.js";
import { Grid, makeGrid } from "../src/rle.js";

function squareGrid(width: number, height: number, y0: number, x0: number, side: number): Grid {
  const grid = makeGrid(width, height);
  for (let y = y0; y < y0 + side; y++) {
    for (let x = x0; x < x0 + side; x++) {
      if (y >= 0 && y < height && x >= 0 && x < width) {
        grid.data[y * width + x] = 1;
      }
    }
  }
  return grid;
}

function behavior(overrides: Partial<typeof DEFAULT_OPTIONS>) {
  return createBehavior({ ...DEFAULT_OPTIONS, ...overrides });
}

describe("identity", () => {
  it("returns the key mask for every step", () => {
    const key = squareGrid(8, 8, 2, 2, 3);
    const identity = behavior({ mode: "identity" });
    for (const step of [0, 1, 5]) {
      assert.deepEqual(identity.maskForStep(key, step).data, key.data);
    }
  });

  it("does not alias the key grid", () => {
    const key = squareGrid(4, 4, 0, 0, 2);
    const out = behavior({ mode: "identity" }).maskForStep(key, 1);
    out.data[0] = 0;
    assert.equal(key.data[0], 1);
  });
});

describe("shift", () => {
  it("translates by the per-frame vector times the step", () => {
    const key = squareGrid(10, 10, 4, 4, 2);
    const shift = behavior({ mode: "shift", dx: 1, dy: 0 });
    for (const step of [0, 1, 2, 3]) {
      assert.deepEqual(
        shift.maskForStep(key, step).data,
        squareGrid(10, 10, 4, 4 + step, 2).data,
        `step ${step}`,
      );
    }
  });

  it("clips at the border instead of wrapping", () => {
    const key = squareGrid(4, 4, 1, 2, 2);
    const shifted = shiftGrid(key, 0, 3); // pushes the square off the right edge
    assert.deepEqual(shifted.data, makeGrid(4, 4).data);
  });
});

describe("erode", () => {
  it("shrinks a square by one ring per step at radius 1", () => {
    const key = squareGrid(9, 9, 1, 1, 5);
    const erode = behavior({ mode: "erode", radius: 1 });
    assert.deepEqual(erode.maskForStep(key, 0).data, key.data);
    assert.deepEqual(erode.maskForStep(key, 1).data, squareGrid(9, 9, 2, 2, 3).data);
    assert.deepEqual(erode.maskForStep(key, 2).data, squareGrid(9, 9, 3, 3, 1).data);
    assert.deepEqual(erode.maskForStep(key, 3).data, makeGrid(9, 9).data);
  });

  it("treats off-image pixels as background", () => {
    const full = squareGrid(4, 4, 0, 0, 4);
    const eroded = erodeGrid(full, 1);
    assert.deepEqual(eroded.data, squareGrid(4, 4, 1, 1, 2).data);
  });
});

describe("noisy", () => {
  it("is deterministic for a fixed seed", () => {
    const key = squareGrid(12, 12, 3, 3, 5);
    const first = behavior({ mode: "noisy", p: 0.3, seed: 42 });
    const second = behavior({ mode: "noisy", p: 0.3, seed: 42 });
    for (let step = 0; step < 4; step++) {
      assert.deepEqual(first.maskForStep(key, step).data, second.maskForStep(key, step).data);
    }
  });

  it("differs across seeds", () => {
    const key = squareGrid(12, 12, 3, 3, 5);
    const a = behavior({ mode: "noisy", p: 0.3, seed: 1 }).maskForStep(key, 0);
    const b = behavior({ mode: "noisy", p: 0.3, seed: 2 }).maskForStep(key, 0);
    assert.notDeepEqual(a.data, b.data);
  });

  it("is the identity at p = 0 and the complement at p = 1", () => {
    const key = squareGrid(6, 6, 1, 1, 3);
    const clean = behavior({ mode: "noisy", p: 0, seed: 5 }).maskForStep(key, 0);
    assert.deepEqual(clean.data, key.data);
    const flipped = behavior({ mode: "noisy", p: 1, seed: 5 }).maskForStep(key, 0);
    for (let i = 0; i < key.data.length; i++) {
      assert.equal(flipped.data[i], key.data[i] === 0 ? 1 : 0);
    }
  });
});
