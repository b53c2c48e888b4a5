// WebSocket wrapper: newline-delimited JSON framing, reconnect with
// backoff, and a simple handler interface. The session state lives on the
// server; this client only sends protocol messages.

import { parseFrame, isErrorFrame, type ErrorFrame, type Frame } from "./protocol.js";

export interface ClientHandlers {
  onFrame(frame: Frame): void;
  onError(err: ErrorFrame): void;
  onStatus(connected: boolean): void;
}

export class PlaygroundClient {
  private ws: WebSocket | null = null;
  private buffer = "";
  private reconnectDelay = 500;
  private readonly maxReconnectDelay = 10_000;
  private closed = false;

  constructor(private url: string, private handlers: ClientHandlers) {}

  connect(): void {
    this.closed = false;
    this.open();
  }

  private open(): void {
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => {
      console.log("[playground] connected", this.url);
      this.reconnectDelay = 500;
      this.handlers.onStatus(true);
    };
    this.ws.onclose = () => {
      this.handlers.onStatus(false);
      if (!this.closed) {
        setTimeout(() => this.open(), this.reconnectDelay);
        this.reconnectDelay = Math.min(this.reconnectDelay * 2, this.maxReconnectDelay);
      }
    };
    this.ws.onerror = (event) => {
      console.error("[playground] socket error", event);
    };
    this.ws.onmessage = (event) => {
      this.buffer += String(event.data);
      let cut;
      while ((cut = this.buffer.indexOf("\n")) >= 0) {
        const line = this.buffer.slice(0, cut).trim();
        this.buffer = this.buffer.slice(cut + 1);
        if (!line) continue;
        this.dispatch(line);
      }
      // A message without a trailing newline is still one document.
      if (this.buffer.trim()) {
        this.dispatch(this.buffer.trim());
        this.buffer = "";
      }
    };
  }

  private dispatch(line: string): void {
    let parsed;
    try {
      parsed = parseFrame(line);
    } catch (err) {
      console.error("[playground] unparseable message", err);
      return;
    }
    if (isErrorFrame(parsed)) {
      this.handlers.onError(parsed);
    } else {
      this.handlers.onFrame(parsed);
    }
  }

  send(text: string): boolean {
    if (!this.ws || this.ws.readyState !== WebSocket.OPEN) return false;
    this.ws.send(text);
    return true;
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
