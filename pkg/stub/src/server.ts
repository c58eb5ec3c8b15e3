/**
 * Protocol v1 server: newline-delimited JSON over stdio.
 *
 * One request at a time; malformed input produces an `error` message and
 * the loop keeps serving, never a silent exit.
 */

import { createInterface } from "node:readline";
import { Behavior } from "./behaviors.js";
import { decodeRle, encodeRle, Grid, validateRecord } from "./rle.js";

const PROTOCOL_VERSION = 1;

interface PropagateRequest {
  frameCount: number;
  keyIndex: number;
  direction: "forward" | "backward";
  keyMask: Grid;
}

function parseRequest(message: unknown): PropagateRequest {
  if (typeof message !== "object" || message === null) {
    throw new Error("request must be a JSON object");
  }
  const record = message as Record<string, unknown>;
  if (record.type !== "propagate") {
    throw new Error(`unsupported request type: ${String(record.type)}`);
  }
  if (typeof record.video_id !== "string") {
    throw new Error("'video_id' must be a string");
  }
  const framePaths = record.frame_paths;
  if (!Array.isArray(framePaths) || framePaths.length === 0 ||
      !framePaths.every((p) => typeof p === "string")) {
    throw new Error("'frame_paths' must be a non-empty list of strings");
  }
  const keyIndex = record.key_index;
  if (!Number.isInteger(keyIndex) || (keyIndex as number) < 0) {
    throw new Error("'key_index' must be a non-negative integer");
  }
  const direction = record.direction;
  if (direction !== "forward" && direction !== "backward") {
    throw new Error("'direction' must be forward or backward");
  }
  if (direction === "backward" && (keyIndex as number) - (framePaths.length - 1) < 0) {
    throw new Error("backward run walks past frame 0");
  }
  const keyMask = decodeRle(validateRecord(record.key_mask));
  return {
    frameCount: framePaths.length,
    keyIndex: keyIndex as number,
    direction,
    keyMask,
  };
}

export function serve(behavior: Behavior, name: string): void {
  const writeLine = (message: unknown) => {
    process.stdout.write(JSON.stringify(message) + "\n");
  };

  writeLine({ type: "hello", protocol: PROTOCOL_VERSION, name });

  const lines = createInterface({ input: process.stdin, crlfDelay: Infinity });
  lines.on("line", (line) => {
    if (line.trim() === "") return;
    let request: PropagateRequest;
    try {
      request = parseRequest(JSON.parse(line));
    } catch (error) {
      writeLine({ type: "error", message: (error as Error).message });
      return;
    }
    const stepDirection = request.direction === "forward" ? 1 : -1;
    for (let step = 0; step < request.frameCount; step++) {
      writeLine({
        type: "mask",
        frame_index: request.keyIndex + stepDirection * step,
        mask: encodeRle(behavior.maskForStep(request.keyMask, step)),
      });
    }
    writeLine({ type: "done" });
  });
}
