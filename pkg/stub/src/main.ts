#!/usr/bin/env node
/**
 * CLI: `vos-propagation-stub --mode identity|shift|erode|noisy
 *        [--dx N] [--dy N] [--radius R] [--p P] [--seed S]`
 */

import { parseArgs } from "node:util";
import { BehaviorOptions, createBehavior, DEFAULT_OPTIONS } from "./behaviors.js";
import { serve } from "./server.js";

const USAGE =
  "usage: vos-propagation-stub --mode identity|shift|erode|noisy " +
  "[--dx N] [--dy N] [--radius R] [--p P] [--seed S]";

function numeric(name: string, raw: string | undefined, fallback: number, integer = false): number {
  if (raw === undefined) return fallback;
  const value = Number(raw);
  if (!Number.isFinite(value) || (integer && !Number.isInteger(value))) {
    throw new Error(`--${name} must be ${integer ? "an integer" : "a number"}, got ${raw}`);
  }
  return value;
}

function parseOptions(argv: string[]): BehaviorOptions {
  const { values } = parseArgs({
    args: argv,
    options: {
      mode: { type: "string" },
      dx: { type: "string" },
      dy: { type: "string" },
      radius: { type: "string" },
      p: { type: "string" },
      seed: { type: "string" },
    },
  });
  const mode = values.mode ?? DEFAULT_OPTIONS.mode;
  if (mode !== "identity" && mode !== "shift" && mode !== "erode" && mode !== "noisy") {
    throw new Error(`unknown mode: ${String(mode)}`);
  }
  const p = numeric("p", values.p, DEFAULT_OPTIONS.p);
  if (p < 0 || p > 1) {
    throw new Error(`--p must lie in [0, 1], got ${p}`);
  }
  const radius = numeric("radius", values.radius, DEFAULT_OPTIONS.radius);
  if (radius < 0) {
    throw new Error(`--radius must be >= 0, got ${radius}`);
  }
  return {
    mode,
    dx: numeric("dx", values.dx, DEFAULT_OPTIONS.dx, true),
    dy: numeric("dy", values.dy, DEFAULT_OPTIONS.dy, true),
    radius,
    p,
    seed: numeric("seed", values.seed, DEFAULT_OPTIONS.seed, true),
  };
}

try {
  const options = parseOptions(process.argv.slice(2));
  serve(createBehavior(options), `vos-stub-${options.mode}`);
} catch (error) {
  process.stderr.write(`${(error as Error).message}\n${USAGE}\n`);
  process.exit(2);
}
