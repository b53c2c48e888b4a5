// Wire protocol shared with the session service: newline-delimited JSON
// over a persistent WebSocket.

export type Mode = "no_assist" | "teleop" | "corrections" | "discrete";

export interface DiscretePrompt {
  kind: "discrete";
  n_choices: number;
}

export interface TeleopPrompt {
  kind: "teleop";
}

export interface CorrectionPrompt {
  kind: "correction";
  axis: number[] | number[][];
}

export type Prompt = DiscretePrompt | TeleopPrompt | CorrectionPrompt | null;

export interface Frame {
  t: number;
  pos: [number, number];
  mode: Mode;
  values: Record<string, number>;
  rollouts: [number, number][][] | null;
  prompt: Prompt;
  done: boolean;
}

export interface ErrorFrame {
  error: string;
  detail?: string;
}

export type InputKind = "discrete" | "correction" | "teleop" | "handback";

// Fixed mode-to-banner mapping (LED color semantics of the hardware rig).
export const BANNER_COLORS: Record<Mode, string> = {
  no_assist: "white",
  teleop: "green",
  corrections: "yellow",
  discrete: "red",
};

const MODES: Mode[] = ["no_assist", "teleop", "corrections", "discrete"];

export function isErrorFrame(msg: unknown): msg is ErrorFrame {
  return typeof msg === "object" && msg !== null && "error" in (msg as object);
}

/** Parse one newline-delimited server message; throws on malformed frames. */
export function parseFrame(text: string): Frame | ErrorFrame {
  const data = JSON.parse(text.trim());
  if (isErrorFrame(data)) {
    return data as ErrorFrame;
  }
  const frame = data as Frame;
  if (
    typeof frame.t !== "number" ||
    !Array.isArray(frame.pos) ||
    frame.pos.length !== 2 ||
    !MODES.includes(frame.mode) ||
    typeof frame.values !== "object" ||
    typeof frame.done !== "boolean"
  ) {
    throw new Error("malformed frame");
  }
  return frame;
}

/** Encode a client input message exactly as the server expects it. */
export function encodeInput(kind: InputKind, payload: unknown): string {
  switch (kind) {
    case "discrete": {
      const index = (payload as { index: number }).index;
      if (!Number.isInteger(index) || index < 0) throw new Error("bad discrete index");
      return JSON.stringify({ kind, payload: { index } });
    }
    case "correction": {
      const deltas = (payload as { deltas: number[] }).deltas;
      if (!Array.isArray(deltas) || deltas.some((d) => !Number.isFinite(d))) {
        throw new Error("bad correction deltas");
      }
      return JSON.stringify({ kind, payload: { deltas } });
    }
    case "teleop": {
      const target = (payload as { target: number[] }).target;
      if (!Array.isArray(target) || target.length !== 2 || target.some((v) => !Number.isFinite(v))) {
        throw new Error("bad teleop target");
      }
      return JSON.stringify({ kind, payload: { target } });
    }
    case "handback":
      return JSON.stringify({ kind, payload: null });
  }
}

/** The no-input tick used when the server runs in lockstep mode. */
export const TICK = "null";
