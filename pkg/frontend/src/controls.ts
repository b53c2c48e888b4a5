// Input-control state machine: which control is live for the active
// prompt, and how raw gestures map to protocol payloads.

import type { Frame, Prompt } from "./protocol.js";

export type ControlKind = "discrete" | "correction" | "teleop" | "none";

export interface ControlState {
  kind: ControlKind;
  nChoices: number;
  axis: [number, number] | null;
  // A sent input disables the control until the next frame arrives.
  disabled: boolean;
  handbackVisible: boolean;
  handbackPulsing: boolean;
}

/** Labels for discrete buttons; two choices read as left/right. */
export function choiceLabels(nChoices: number): string[] {
  if (nChoices === 2) return ["left", "right"];
  return Array.from({ length: nChoices }, (_, i) => `option ${i + 1}`);
}

/** The robot signals it can take over when autonomy's value tops all
 * other mechanisms; the handback button pulses then. */
export function robotConfident(values: Record<string, number>): boolean {
  const na = values["no_assist"];
  if (na === undefined) return false;
  return Object.entries(values).every(([name, v]) => name === "no_assist" || na >= v);
}

export function controlStateFor(frame: Frame | null): ControlState {
  const state: ControlState = {
    kind: "none",
    nChoices: 0,
    axis: null,
    disabled: false,
    handbackVisible: false,
    handbackPulsing: false,
  };
  if (!frame || frame.done) return state;
  const prompt: Prompt = frame.prompt;
  if (frame.mode === "teleop") {
    state.kind = "teleop";
    state.handbackVisible = true;
    state.handbackPulsing = robotConfident(frame.values);
  } else if (prompt && prompt.kind === "discrete") {
    state.kind = "discrete";
    state.nChoices = prompt.n_choices;
  } else if (prompt && prompt.kind === "correction") {
    state.kind = "correction";
    const axis = prompt.axis;
    state.axis = (Array.isArray(axis[0]) ? axis[0] : axis) as [number, number];
  }
  return state;
}

// Gesture scaling: drag pixels to a correction delta along the prompt axis.
const DRAG_GAIN = 0.0005;

export function dragToCorrectionDelta(
  dxPixels: number, dyPixels: number, axis: [number, number],
): number {
  // Project the screen-space drag onto the axis (y flipped to world).
  return DRAG_GAIN * (dxPixels * axis[0] + -dyPixels * axis[1]);
}

// Arrow-key teleoperation: step the absolute target from the current position.
export const KEY_STEP = 0.02;

export function keyToTeleopTarget(
  key: string, position: [number, number],
): [number, number] | null {
  switch (key) {
    case "ArrowUp":
      return [position[0], position[1] + KEY_STEP];
    case "ArrowDown":
      return [position[0], position[1] - KEY_STEP];
    case "ArrowLeft":
      return [position[0] - KEY_STEP, position[1]];
    case "ArrowRight":
      return [position[0] + KEY_STEP, position[1]];
    default:
      return null;
  }
}
