import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import {
  BANNER_COLORS,
  encodeInput,
  isErrorFrame,
  parseFrame,
  type Frame,
} from "../src/protocol.js";

const FIXTURE: Frame[] = JSON.parse(
  readFileSync(new URL("./fixtures/session-frames.json", import.meta.url), "utf-8"),
);

describe("parseFrame", () => {
  it("parses every recorded server frame", () => {
    for (const frame of FIXTURE) {
      const parsed = parseFrame(JSON.stringify(frame) + "\n");
      expect(isErrorFrame(parsed)).toBe(false);
      expect((parsed as Frame).t).toBe(frame.t);
    }
  });

  it("passes error frames through", () => {
    const parsed = parseFrame('{"error": "bad_input", "detail": "nope"}');
    expect(isErrorFrame(parsed)).toBe(true);
  });

  it("rejects malformed frames", () => {
    expect(() => parseFrame('{"t": 1}')).toThrow();
    expect(() => parseFrame('{"t": 1, "pos": [0], "mode": "no_assist", "values": {}, "done": false}')).toThrow();
    expect(() => parseFrame('{"t": 1, "pos": [0,0], "mode": "warp", "values": {}, "done": false}')).toThrow();
    expect(() => parseFrame("not json")).toThrow();
  });
});

describe("banner mapping", () => {
  it("is the fixed four-mode mapping", () => {
    expect(BANNER_COLORS).toEqual({
      no_assist: "white",
      teleop: "green",
      corrections: "yellow",
      discrete: "red",
    });
  });

  it("covers all four modes in the recorded session", () => {
    const modes = new Set(FIXTURE.map((f) => f.mode));
    expect(modes).toEqual(new Set(["no_assist", "teleop", "corrections", "discrete"]));
  });
});

describe("encodeInput", () => {
  it("matches the wire schema exactly", () => {
    expect(JSON.parse(encodeInput("discrete", { index: 1 }))).toEqual({
      kind: "discrete",
      payload: { index: 1 },
    });
    expect(JSON.parse(encodeInput("correction", { deltas: [0.02] }))).toEqual({
      kind: "correction",
      payload: { deltas: [0.02] },
    });
    expect(JSON.parse(encodeInput("teleop", { target: [0.5, 0.25] }))).toEqual({
      kind: "teleop",
      payload: { target: [0.5, 0.25] },
    });
    expect(JSON.parse(encodeInput("handback", null))).toEqual({
      kind: "handback",
      payload: null,
    });
  });

  it("rejects invalid payloads", () => {
    expect(() => encodeInput("discrete", { index: -1 })).toThrow();
    expect(() => encodeInput("teleop", { target: [Number.NaN, 0] })).toThrow();
    expect(() => encodeInput("correction", { deltas: ["x"] })).toThrow();
  });
});
