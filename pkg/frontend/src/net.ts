// WebSocket client wrapper: reconnects with backoff and buffers outgoing
// game events while disconnected, flushing them on reconnect so offline
// scoring never loses markers.

import {
  ClientMessage,
  parseServerMessage,
  serializeClientMessage,
  ServerMessage,
} from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ConsoleLinkHandlers {
  onMessage(msg: ServerMessage): void;
  onStatus(connected: boolean): void;
}

export class ConsoleLink {
  private socket: SocketLike | null = null;
  private buffered: ClientMessage[] = [];
  private closed = false;
  private retryMs = 500;

  constructor(
    private url: string,
    private handlers: ConsoleLinkHandlers,
    private factory: SocketFactory = (u) =>
      new WebSocket(u) as unknown as SocketLike,
    private scheduler: (fn: () => void, ms: number) => void = (fn, ms) =>
      setTimeout(fn, ms),
  ) {}

  connect(): void {
    if (this.closed) return;
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.retryMs = 500;
      this.handlers.onStatus(true);
      const pending = this.buffered;
      this.buffered = [];
      for (const msg of pending) socket.send(serializeClientMessage(msg));
    };
    socket.onmessage = (ev) => {
      const msg = parseServerMessage(ev.data);
      if (msg) this.handlers.onMessage(msg);
    };
    const onDown = () => {
      if (this.socket !== socket) return;
      this.socket = null;
      this.handlers.onStatus(false);
      if (!this.closed) {
        this.scheduler(() => this.connect(), this.retryMs);
        this.retryMs = Math.min(this.retryMs * 2, 5000);
      }
    };
    socket.onclose = onDown;
    socket.onerror = onDown;
  }

  /** Send now, or buffer game events for the next connection. */
  send(msg: ClientMessage): void {
    if (this.socket) {
      try {
        this.socket.send(serializeClientMessage(msg));
        return;
      } catch {
        // fall through to buffering
      }
    }
    if (msg.type === "game_event") this.buffered.push(msg);
  }

  get pendingEvents(): number {
    return this.buffered.length;
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
    this.socket = null;
  }
}
