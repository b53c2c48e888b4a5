// Entry point: wires the WebSocket client, canvas view, controls, and
// live metrics into the page.

import { PlaygroundClient } from "./client.js";
import {
  choiceLabels,
  controlStateFor,
  dragToCorrectionDelta,
  keyToTeleopTarget,
} from "./controls.js";
import { InputMetricTracker } from "./metrics.js";
import { encodeInput, TICK, type Frame } from "./protocol.js";
import { ViewState, canvasSurface, renderFrame } from "./view.js";

const canvas = document.getElementById("world") as HTMLCanvasElement;
const banner = document.getElementById("banner") as HTMLDivElement;
const promptBox = document.getElementById("prompt") as HTMLDivElement;
const metricsBox = document.getElementById("metrics") as HTMLDivElement;
const overlay = document.getElementById("overlay") as HTMLDivElement;

const state = new ViewState();
const metrics = new InputMetricTracker();
let controlsDisabled = false;

const BANNER_TEXT: Record<string, string> = {
  white: "autonomous",
  green: "teleoperate (arrow keys, hand back with H)",
  yellow: "corrective nudges (drag on canvas)",
  red: "choose a path",
};

const client = new PlaygroundClient(wsUrl(), {
  onFrame(frame: Frame) {
    state.acceptFrame(frame);
    metrics.onFrame(frame);
    controlsDisabled = false;
    updateChrome(frame);
  },
  onError(err) {
    showToast(`server: ${err.error}${err.detail ? " - " + err.detail : ""}`);
  },
  onStatus(connected) {
    state.connected = connected;
    overlay.style.display = connected ? "none" : "flex";
  },
});
client.connect();

function wsUrl(): string {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${location.host}/ws`;
}

function sendInput(text: string, countsAsChoice = false): void {
  if (controlsDisabled) return;
  if (client.send(text)) {
    controlsDisabled = true;
    if (countsAsChoice) metrics.onDiscreteChoice();
  }
}

function updateChrome(frame: Frame): void {
  const color = state.bannerColor();
  banner.style.background = color;
  banner.textContent = BANNER_TEXT[color] ?? color;
  banner.style.color = color === "white" || color === "yellow" ? "#222" : "#fff";

  const control = controlStateFor(frame);
  promptBox.innerHTML = "";
  if (control.kind === "discrete") {
    choiceLabels(control.nChoices).forEach((label, index) => {
      const button = document.createElement("button");
      button.textContent = label;
      button.onclick = () => sendInput(encodeInput("discrete", { index }), true);
      promptBox.appendChild(button);
    });
  } else if (control.kind === "teleop") {
    const handback = document.createElement("button");
    handback.textContent = "hand back control";
    handback.className = control.handbackPulsing ? "pulse" : "";
    handback.onclick = () => sendInput(encodeInput("handback", null));
    promptBox.appendChild(handback);
  } else if (control.kind === "correction" && control.axis) {
    const hint = document.createElement("span");
    hint.textContent = `drag to nudge along [${control.axis.map((v) => v.toFixed(2)).join(", ")}]`;
    promptBox.appendChild(hint);
  }

  metricsBox.textContent =
    `input ${metrics.total().toFixed(0)} control-timesteps | ` +
    `elapsed ${metrics.elapsedSeconds().toFixed(0)}s | ` +
    `frames ${state.framesRendered} (dropped ${state.framesDropped}) | ` +
    `t=${frame.t}${frame.done ? " | done" : ""}`;
}

function showToast(message: string): void {
  const toast = document.createElement("div");
  toast.className = "toast";
  toast.textContent = message;
  document.body.appendChild(toast);
  setTimeout(() => toast.remove(), 2500);
}

// Teleoperation via arrow keys; H hands control back.
window.addEventListener("keydown", (event) => {
  const frame = state.frame;
  if (!frame || frame.mode !== "teleop") return;
  if (event.key === "h" || event.key === "H") {
    sendInput(encodeInput("handback", null));
    return;
  }
  const target = keyToTeleopTarget(event.key, frame.pos);
  if (target) {
    event.preventDefault();
    sendInput(encodeInput("teleop", { target }));
  }
});

// Corrective nudges via drag.
let dragStart: [number, number] | null = null;
canvas.addEventListener("mousedown", (event) => {
  dragStart = [event.offsetX, event.offsetY];
});
window.addEventListener("mouseup", (event) => {
  if (!dragStart) return;
  const frame = state.frame;
  const control = controlStateFor(frame);
  if (control.kind === "correction" && control.axis) {
    const delta = dragToCorrectionDelta(
      event.clientX - dragStart[0], event.clientY - dragStart[1], control.axis,
    );
    sendInput(encodeInput("correction", { deltas: [delta] }));
  }
  dragStart = null;
});

// Lockstep servers only advance on a message; timed servers ignore extra
// ticks, so always keep a gentle tick going.
setInterval(() => {
  if (state.frame && !state.frame.done && !controlsDisabled) {
    client.send(TICK);
  }
}, 100);

const surface = canvasSurface(canvas);
function paint(): void {
  renderFrame(surface, state);
  requestAnimationFrame(paint);
}
requestAnimationFrame(paint);
