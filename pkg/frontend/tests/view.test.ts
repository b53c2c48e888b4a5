import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { BANNER_COLORS, type Frame } from "../src/protocol.js";
import {
  MAX_POLYLINES,
  ViewState,
  WORLD_MAX,
  WORLD_MIN,
  renderFrame,
  worldToScreen,
  type Surface,
} from "../src/view.js";

const FIXTURE: Frame[] = JSON.parse(
  readFileSync(new URL("./fixtures/session-frames.json", import.meta.url), "utf-8"),
);

interface Call {
  op: string;
  args: unknown[];
}

function recordingSurface(): { surface: Surface; calls: Call[] } {
  const calls: Call[] = [];
  const log = (op: string) => (...args: unknown[]) => calls.push({ op, args });
  return {
    surface: {
      width: 640,
      height: 640,
      clear: log("clear"),
      polyline: log("polyline"),
      circle: log("circle"),
      rect: log("rect"),
      text: log("text"),
    },
    calls,
  };
}

describe("worldToScreen", () => {
  it("maps the padded world box to the canvas", () => {
    expect(worldToScreen([WORLD_MIN, WORLD_MIN], 640, 640)).toEqual([0, 640]);
    expect(worldToScreen([WORLD_MAX, WORLD_MAX], 640, 640)).toEqual([640, 0]);
    const [cx, cy] = worldToScreen([0.5, 0.5], 640, 640);
    expect(cx).toBeCloseTo(320, 6);
    expect(cy).toBeCloseTo(320, 6);
  });
});

describe("renderFrame", () => {
  it("renders banner color per the fixed mapping for 100% of frames", () => {
    for (const frame of FIXTURE) {
      const state = new ViewState();
      state.acceptFrame(frame);
      const { surface, calls } = recordingSurface();
      renderFrame(surface, state);
      const bannerRect = calls.find(
        (c) => c.op === "rect" && (c.args[1] as number) === 0 && (c.args[2] as number) === 640,
      );
      expect(bannerRect).toBeDefined();
      expect(bannerRect!.args[4]).toBe(BANNER_COLORS[frame.mode]);
      expect(state.bannerColor()).toBe(BANNER_COLORS[frame.mode]);
    }
  });

  it("caps rollout polylines at the wire limit", () => {
    const frame: Frame = {
      ...FIXTURE.find((f) => f.rollouts && f.rollouts.length > 0)!,
    };
    frame.rollouts = Array.from({ length: 40 }, () => [
      [0, 0],
      [1, 1],
    ]) as [number, number][][];
    const state = new ViewState();
    state.acceptFrame(frame);
    const { surface, calls } = recordingSurface();
    renderFrame(surface, state);
    expect(calls.filter((c) => c.op === "polyline").length).toBeLessThanOrEqual(MAX_POLYLINES);
  });
});

describe("latest-frame buffer", () => {
  it("counts drops explicitly, never loses silently", () => {
    const state = new ViewState();
    const { surface } = recordingSurface();
    for (const frame of FIXTURE.slice(0, 100)) {
      state.acceptFrame(frame);
      // Render only every other frame: half are declared dropped.
      if (frame.t % 2 === 0) renderFrame(surface, state);
    }
    expect(state.framesReceived).toBe(100);
    expect(state.framesRendered + state.framesDropped).toBeGreaterThanOrEqual(
      state.framesReceived - 1,
    );
  });

  it("has zero drops when rendering keeps up", () => {
    const state = new ViewState();
    const { surface } = recordingSurface();
    for (const frame of FIXTURE) {
      state.acceptFrame(frame);
      renderFrame(surface, state);
    }
    expect(state.framesDropped).toBe(0);
    expect(state.dropRate()).toBeLessThan(0.01);
  });
});
