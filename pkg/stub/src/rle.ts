/**
 * Run-length mask codec: column-major scan order, background run first.
 * The wire record is `{"size": [height, width], "counts": [int...]}`;
 * grids are row-major Uint8Arrays (0 background, 1 foreground).
 */

export interface RleRecord {
  size: [number, number];
  counts: number[];
}

export interface Grid {
  width: number;
  height: number;
  data: Uint8Array;
}

export function makeGrid(width: number, height: number): Grid {
  return { width, height, data: new Uint8Array(width * height) };
}

export function validateRecord(record: unknown): RleRecord {
  if (typeof record !== "object" || record === null) {
    throw new Error("RLE record must be an object");
  }
  const size = (record as { size?: unknown }).size;
  const counts = (record as { counts?: unknown }).counts;
  if (
    !Array.isArray(size) ||
    size.length !== 2 ||
    !size.every((v) => Number.isInteger(v) && v >= 1)
  ) {
    throw new Error("RLE 'size' must be [height, width] with positive integers");
  }
  if (!Array.isArray(counts) || !counts.every((v) => Number.isInteger(v))) {
    throw new Error("RLE 'counts' must be a list of integers");
  }
  const [height, width] = size as [number, number];
  let total = 0;
  for (let i = 0; i < counts.length; i++) {
    const count = counts[i] as number;
    if (count < 0) throw new Error(`RLE count ${i} is negative`);
    if (count === 0 && i > 0) throw new Error(`RLE count ${i} is a non-leading zero`);
    total += count;
  }
  if (total !== width * height) {
    throw new Error(`RLE counts sum to ${total}, expected ${width * height}`);
  }
  return { size: [height, width], counts: counts as number[] };
}

export function decodeRle(record: RleRecord): Grid {
  const [height, width] = record.size;
  const grid = makeGrid(width, height);
  let value = 0;
  let position = 0; // column-major position
  for (const count of record.counts) {
    for (let k = 0; k < count; k++) {
      const column = Math.floor(position / height);
      const row = position % height;
      grid.data[row * width + column] = value;
      position++;
    }
    value ^= 1;
  }
  return grid;
}

export function encodeRle(grid: Grid): RleRecord {
  const { width, height, data } = grid;
  const counts: number[] = [];
  let current = 0; // runs start at background
  let run = 0;
  for (let column = 0; column < width; column++) {
    for (let row = 0; row < height; row++) {
      const value = data[row * width + column] === 0 ? 0 : 1;
      if (value === current) {
        run++;
      } else {
        counts.push(run);
        current = value;
        run = 1;
      }
    }
  }
  counts.push(run);
  return { size: [height, width], counts };
}
