// Running input metric in control-timesteps, shown live so the cost of
// each assistance mode is tangible during demos.

import type { Frame, Mode } from "./protocol.js";

// Per-cycle weights for the 2D playground profile: corrections control one
// direction, teleoperation both action dimensions; discrete choices cost
// one unit each regardless of time.
export const MODE_WEIGHTS: Record<Mode, number> = {
  no_assist: 0,
  corrections: 1,
  teleop: 2,
  discrete: 0,
};

export class InputMetricTracker {
  private cycles: Record<Mode, number> = {
    no_assist: 0,
    corrections: 0,
    teleop: 0,
    discrete: 0,
  };
  private discreteChoices = 0;
  private lastFrameAt: number | null = null;
  startedAt: number | null = null;

  onFrame(frame: Frame, now: number = Date.now()): void {
    if (this.startedAt === null) this.startedAt = now;
    this.lastFrameAt = now;
    this.cycles[frame.mode] += 1;
  }

  onDiscreteChoice(): void {
    this.discreteChoices += 1;
  }

  total(): number {
    let sum = this.discreteChoices;
    for (const mode of Object.keys(this.cycles) as Mode[]) {
      sum += MODE_WEIGHTS[mode] * this.cycles[mode];
    }
    return sum;
  }

  elapsedSeconds(now: number = Date.now()): number {
    if (this.startedAt === null || this.lastFrameAt === null) return 0;
    return (Math.max(now, this.lastFrameAt) - this.startedAt) / 1000;
  }
}
