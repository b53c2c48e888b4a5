// View state and canvas rendering. Drawing goes through a minimal 2D
// surface interface so the render path is testable without a DOM.

import { BANNER_COLORS, type Frame, type Prompt } from "./protocol.js";

// Fixed world-to-screen transform: the environments live in the unit box
// with wobble excursions, so a padded box keeps everything in view.
export const WORLD_MIN = -0.45;
export const WORLD_MAX = 1.45;
export const MAX_POLYLINES = 20;

export interface Surface {
  width: number;
  height: number;
  clear(color: string): void;
  polyline(points: [number, number][], color: string, width: number): void;
  circle(x: number, y: number, radius: number, color: string): void;
  rect(x: number, y: number, w: number, h: number, color: string): void;
  text(s: string, x: number, y: number, color: string, size: number): void;
}

export class ViewState {
  frame: Frame | null = null;
  connected = false;
  framesReceived = 0;
  framesRendered = 0;
  framesDropped = 0;
  private pendingRender = false;

  /** Latest-frame buffer: a frame arriving before the previous one was
   * rendered replaces it and counts as an explicit drop. */
  acceptFrame(frame: Frame): void {
    this.framesReceived += 1;
    if (this.pendingRender) {
      this.framesDropped += 1;
    }
    this.frame = frame;
    this.pendingRender = true;
  }

  markRendered(): void {
    if (this.pendingRender) {
      this.framesRendered += 1;
      this.pendingRender = false;
    }
  }

  dropRate(): number {
    return this.framesReceived ? this.framesDropped / this.framesReceived : 0;
  }

  bannerColor(): string {
    return this.frame ? BANNER_COLORS[this.frame.mode] : "gray";
  }

  activePrompt(): Prompt {
    return this.frame ? this.frame.prompt : null;
  }
}

export function worldToScreen(
  point: [number, number], width: number, height: number,
): [number, number] {
  const span = WORLD_MAX - WORLD_MIN;
  const x = ((point[0] - WORLD_MIN) / span) * width;
  const y = height - ((point[1] - WORLD_MIN) / span) * height;
  return [x, y];
}

/** Draw the latest frame: gray rollout bundles, agent marker, banner strip,
 * and one value bar per mechanism. */
export function renderFrame(surface: Surface, state: ViewState): void {
  const frame = state.frame;
  surface.clear("#101014");
  if (!frame) {
    surface.text("waiting for frames...", 16, 24, "#aaa", 14);
    return;
  }

  const { width, height } = surface;
  const rollouts = (frame.rollouts ?? []).slice(0, MAX_POLYLINES);
  for (const line of rollouts) {
    surface.polyline(
      line.map((p) => worldToScreen(p, width, height)),
      "rgba(170,170,170,0.35)",
      1,
    );
  }

  const [ax, ay] = worldToScreen(frame.pos, width, height);
  surface.circle(ax, ay, 6, "#4db8ff");

  surface.rect(0, 0, width, 8, state.bannerColor());

  const names = Object.keys(frame.values).sort();
  const barWidth = 120;
  names.forEach((name, i) => {
    const v = Math.max(0, Math.min(1, frame.values[name]));
    const y = 20 + i * 18;
    surface.rect(10, y, barWidth, 12, "#2a2a31");
    surface.rect(10, y, barWidth * v, 12, name === "no_assist" ? "#7bd47b" : "#c9a94a");
    surface.text(`${name} ${v.toFixed(3)}`, 16 + barWidth, y + 10, "#ddd", 11);
  });

  surface.text(`t=${frame.t}  mode=${frame.mode}`, 10, height - 10, "#888", 12);
  state.markRendered();
}

/** Adapt a real CanvasRenderingContext2D to the Surface interface. */
export function canvasSurface(canvas: HTMLCanvasElement): Surface {
  const ctx = canvas.getContext("2d")!;
  return {
    width: canvas.width,
    height: canvas.height,
    clear(color) {
      ctx.fillStyle = color;
      ctx.fillRect(0, 0, canvas.width, canvas.height);
    },
    polyline(points, color, width) {
      if (points.length < 2) return;
      ctx.strokeStyle = color;
      ctx.lineWidth = width;
      ctx.beginPath();
      ctx.moveTo(points[0][0], points[0][1]);
      for (const [x, y] of points.slice(1)) ctx.lineTo(x, y);
      ctx.stroke();
    },
    circle(x, y, radius, color) {
      ctx.fillStyle = color;
      ctx.beginPath();
      ctx.arc(x, y, radius, 0, Math.PI * 2);
      ctx.fill();
    },
    rect(x, y, w, h, color) {
      ctx.fillStyle = color;
      ctx.fillRect(x, y, w, h);
    },
    text(s, x, y, color, size) {
      ctx.fillStyle = color;
      ctx.font = `${size}px sans-serif`;
      ctx.fillText(s, x, y);
    },
  };
}
