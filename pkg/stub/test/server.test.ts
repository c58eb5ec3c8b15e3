import { after, describe, it } from "node:test";
import assert from "node:assert/strict";
import { spawn, ChildProcessWithoutNullStreams } from "node:child_process";
import { createInterface, Interface } from "node:readline";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

import { encodeRle, Grid, makeGrid, RleRecord } from "../src/rle.js";

const MAIN = join(dirname(fileURLToPath(import.meta.url)), "..", "src", "main.js");
const TIMEOUT_MS = 10_000;

class StubClient {
  private readonly proc: ChildProcessWithoutNullStreams;
  private readonly lines: Interface;
  private readonly queue: string[] = [];
  private readonly waiters: Array<(line: string) => void> = [];

  constructor(args: string[]) {
    this.proc = spawn(process.execPath, [MAIN, ...args], { stdio: "pipe" });
    this.lines = createInterface({ input: this.proc.stdout, crlfDelay: Infinity });
    this.lines.on("line", (line) => {
      const waiter = this.waiters.shift();
      if (waiter) waiter(line);
      else this.queue.push(line);
    });
  }

  send(message: unknown): void {
    this.proc.stdin.write(JSON.stringify(message) + "\n");
  }

  sendRaw(line: string): void {
    this.proc.stdin.write(line + "\n");
  }

  async next(): Promise<Record<string, unknown>> {
    const line = await new Promise<string>((resolve, reject) => {
      const queued = this.queue.shift();
      if (queued !== undefined) {
        resolve(queued);
        return;
      }
      const timer = setTimeout(
        () => reject(new Error("timed out waiting for a stub message")),
        TIMEOUT_MS,
      );
      this.waiters.push((value) => {
        clearTimeout(timer);
        resolve(value);
      });
    });
    return JSON.parse(line) as Record<string, unknown>;
  }

  close(): void {
    this.proc.stdin.end();
    this.proc.kill();
  }
}

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

function propagateRequest(
  keyMask: RleRecord,
  keyIndex: number,
  frames: number,
  direction: "forward" | "backward",
) {
  return {
    type: "propagate",
    video_id: "video",
    frame_paths: Array.from({ length: frames }, (_, i) => `video/${i}`),
    key_index: keyIndex,
    key_mask: keyMask,
    direction,
  };
}

async function collectRun(client: StubClient, frames: number) {
  const masks: Array<{ frame_index: number; mask: RleRecord }> = [];
  for (let i = 0; i < frames; i++) {
    const message = await client.next();
    assert.equal(message.type, "mask", JSON.stringify(message));
    masks.push(message as unknown as { frame_index: number; mask: RleRecord });
  }
  const done = await client.next();
  assert.equal(done.type, "done");
  return masks;
}

describe("stub server protocol", () => {
  const clients: StubClient[] = [];
  const connect = (args: string[]) => {
    const client = new StubClient(args);
    clients.push(client);
    return client;
  };
  after(() => {
    for (const client of clients) client.close();
  });

  it("greets with a protocol 1 hello", async () => {
    const client = connect(["--mode", "identity"]);
    const hello = await client.next();
    assert.equal(hello.type, "hello");
    assert.equal(hello.protocol, 1);
    assert.equal(hello.name, "vos-stub-identity");
  });

  it("identity mode answers every frame with the key mask, in order", async () => {
    const client = connect(["--mode", "identity"]);
    await client.next(); // hello
    const key = encodeRle(squareGrid(6, 5, 1, 1, 2));
    client.send(propagateRequest(key, 2, 4, "forward"));
    const masks = await collectRun(client, 4);
    assert.deepEqual(masks.map((m) => m.frame_index), [2, 3, 4, 5]);
    for (const message of masks) {
      assert.deepEqual(message.mask, key);
    }
  });

  it("backward runs count down from the key frame", async () => {
    const client = connect(["--mode", "identity"]);
    await client.next();
    const key = encodeRle(squareGrid(6, 5, 1, 1, 2));
    client.send(propagateRequest(key, 3, 4, "backward"));
    const masks = await collectRun(client, 4);
    assert.deepEqual(masks.map((m) => m.frame_index), [3, 2, 1, 0]);
  });

  it("shift mode moves the square by one pixel per frame", async () => {
    const client = connect(["--mode", "shift", "--dx", "1", "--dy", "0"]);
    await client.next();
    const width = 10;
    const height = 8;
    client.send(propagateRequest(encodeRle(squareGrid(width, height, 3, 2, 2)), 0, 3, "forward"));
    const masks = await collectRun(client, 3);
    for (let step = 0; step < 3; step++) {
      const expected = encodeRle(squareGrid(width, height, 3, 2 + step, 2));
      assert.deepEqual(masks[step]?.mask, expected, `offset ${step}`);
    }
  });

  it("recovers after a malformed line", async () => {
    const client = connect(["--mode", "identity"]);
    await client.next();
    client.sendRaw("definitely not json");
    const error = await client.next();
    assert.equal(error.type, "error");
    assert.equal(typeof error.message, "string");

    const key = encodeRle(squareGrid(4, 4, 0, 0, 2));
    client.send(propagateRequest(key, 0, 2, "forward"));
    const masks = await collectRun(client, 2);
    assert.equal(masks.length, 2);
  });

  it("rejects unknown request types and bad fields without dying", async () => {
    const client = connect(["--mode", "identity"]);
    await client.next();
    client.send({ type: "selfdestruct" });
    assert.equal((await client.next()).type, "error");
    client.send({
      type: "propagate",
      video_id: "v",
      frame_paths: ["a", "b", "c"],
      key_index: 1,
      key_mask: encodeRle(makeGrid(2, 2)),
      direction: "backward", // walks past frame 0
    });
    assert.equal((await client.next()).type, "error");
    client.send(propagateRequest(encodeRle(makeGrid(2, 2)), 0, 1, "forward"));
    await collectRun(client, 1);
  });

  it("noisy mode reproduces the same masks across runs for one seed", async () => {
    const args = ["--mode", "noisy", "--p", "0.25", "--seed", "77"];
    const key = encodeRle(squareGrid(9, 9, 2, 2, 4));
    const runs: string[][] = [];
    for (let run = 0; run < 2; run++) {
      const client = connect(args);
      await client.next();
      client.send(propagateRequest(key, 0, 3, "forward"));
      const masks = await collectRun(client, 3);
      runs.push(masks.map((m) => JSON.stringify(m.mask)));
    }
    assert.deepEqual(runs[0], runs[1]);
  });
});
