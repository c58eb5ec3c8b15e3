/**
 * Deterministic per-frame transforms of the key mask.
 *
 * `step` is the propagation-order distance from the key frame (the key
 * itself is step 0), so forward and backward runs behave symmetrically.
 */

import { Grid, makeGrid } from "./rle.js";

export type Mode = "identity" | "shift" | "erode" | "noisy";

export interface BehaviorOptions {
  mode: Mode;
  dx: number;
  dy: number;
  radius: number;
  p: number;
  seed: number;
}

export const DEFAULT_OPTIONS: BehaviorOptions = {
  mode: "identity",
  dx: 1,
  dy: 0,
  radius: 1,
  p: 0.05,
  seed: 0,
};

export interface Behavior {
  readonly name: string;
  maskForStep(key: Grid, step: number): Grid;
}

/** mulberry32: tiny seeded PRNG, stable across platforms. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function copyGrid(grid: Grid): Grid {
  return { width: grid.width, height: grid.height, data: grid.data.slice() };
}

export function shiftGrid(grid: Grid, dy: number, dx: number): Grid {
  const out = makeGrid(grid.width, grid.height);
  for (let y = 0; y < grid.height; y++) {
    const sy = y - dy;
    if (sy < 0 || sy >= grid.height) continue;
    for (let x = 0; x < grid.width; x++) {
      const sx = x - dx;
      if (sx < 0 || sx >= grid.width) continue;
      out.data[y * grid.width + x] = grid.data[sy * grid.width + sx] as number;
    }
  }
  return out;
}

export function erodeGrid(grid: Grid, radius: number): Grid {
  const out = makeGrid(grid.width, grid.height);
  const r = Math.floor(radius);
  const offsets: Array<[number, number]> = [];
  for (let dy = -r; dy <= r; dy++) {
    for (let dx = -r; dx <= r; dx++) {
      if (dx * dx + dy * dy <= radius * radius) offsets.push([dy, dx]);
    }
  }
  for (let y = 0; y < grid.height; y++) {
    for (let x = 0; x < grid.width; x++) {
      let keep = grid.data[y * grid.width + x] !== 0;
      for (const [dy, dx] of offsets) {
        if (!keep) break;
        const ny = y + dy;
        const nx = x + dx;
        // Off-image counts as background, so the border erodes too.
        if (ny < 0 || ny >= grid.height || nx < 0 || nx >= grid.width) {
          keep = false;
        } else if (grid.data[ny * grid.width + nx] === 0) {
          keep = false;
        }
      }
      out.data[y * grid.width + x] = keep ? 1 : 0;
    }
  }
  return out;
}

class IdentityBehavior implements Behavior {
  readonly name = "identity";
  maskForStep(key: Grid): Grid {
    return copyGrid(key);
  }
}

class ShiftBehavior implements Behavior {
  readonly name = "shift";
  constructor(private readonly dx: number, private readonly dy: number) {}
  maskForStep(key: Grid, step: number): Grid {
    return shiftGrid(key, this.dy * step, this.dx * step);
  }
}

class ErodeBehavior implements Behavior {
  readonly name = "erode";
  constructor(private readonly radius: number) {}
  maskForStep(key: Grid, step: number): Grid {
    let grid = copyGrid(key);
    for (let i = 0; i < step; i++) {
      grid = erodeGrid(grid, this.radius);
    }
    return grid;
  }
}

class NoisyBehavior implements Behavior {
  readonly name = "noisy";
  private readonly next: () => number;
  constructor(p: number, seed: number) {
    this.p = p;
    this.next = mulberry32(seed);
  }
  private readonly p: number;
  maskForStep(key: Grid): Grid {
    // One draw per pixel in row-major order; the draw sequence is what
    // makes a fixed seed reproducible across runs.
    const out = copyGrid(key);
    for (let i = 0; i < out.data.length; i++) {
      if (this.next() < this.p) {
        out.data[i] = out.data[i] === 0 ? 1 : 0;
      }
    }
    return out;
  }
}

export function createBehavior(options: BehaviorOptions): Behavior {
  switch (options.mode) {
    case "identity":
      return new IdentityBehavior();
    case "shift":
      return new ShiftBehavior(options.dx, options.dy);
    case "erode":
      return new ErodeBehavior(options.radius);
    case "noisy":
      return new NoisyBehavior(options.p, options.seed);
  }
}
