// Wire protocol between the pipeline's WebSocket and this console.
// Line-delimited JSON; one object per message. The console renders only
// what it receives and never fabricates probabilities.

export interface ControlFrame {
  type: "control";
  x: number;
  y: number;
  a: boolean;
  b: boolean;
  a_fill: number;
  b_fill: number;
  probs: number[];
  label: string;
  ts: number;
}

export interface CueMessage {
  type: "cue";
  class: string;
  duration_ms: number;
}

export interface ConfigMessage {
  type: "config";
  thresholds: Record<string, number>;
  mapping: Record<string, string>;
  buffer_len: number;
}

export interface GameResultMessage {
  type: "game_result";
  event: string;
  success: boolean;
}

export type ServerMessage =
  | ControlFrame
  | CueMessage
  | ConfigMessage
  | GameResultMessage;

export interface SetThreshold {
  type: "set_threshold";
  class: string;
  value: number;
}

export interface SetMapping {
  type: "set_mapping";
  class: string;
  action: string;
}

export interface GameEvent {
  type: "game_event";
  event: string;
  ts: number;
}

export type ClientMessage = SetThreshold | SetMapping | GameEvent;

export function clamp01(value: number): number {
  if (!Number.isFinite(value)) return 0;
  return Math.min(1, Math.max(0, value));
}

export function clampAxis(value: number): number {
  if (!Number.isFinite(value)) return 0;
  return Math.min(1, Math.max(-1, value));
}

/** Parse one server message; returns null on anything malformed. */
export function parseServerMessage(raw: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const msg = data as Record<string, unknown>;
  switch (msg.type) {
    case "control": {
      if (!Array.isArray(msg.probs) || typeof msg.label !== "string") {
        return null;
      }
      return {
        type: "control",
        x: clampAxis(Number(msg.x)),
        y: clampAxis(Number(msg.y)),
        a: Boolean(msg.a),
        b: Boolean(msg.b),
        a_fill: clamp01(Number(msg.a_fill)),
        b_fill: clamp01(Number(msg.b_fill)),
        probs: msg.probs.map((p) => clamp01(Number(p))),
        label: msg.label,
        ts: Number(msg.ts),
      };
    }
    case "cue": {
      if (typeof msg.class !== "string") return null;
      return {
        type: "cue",
        class: msg.class,
        duration_ms: Number(msg.duration_ms) || 3000,
      };
    }
    case "config": {
      if (typeof msg.thresholds !== "object" || msg.thresholds === null) {
        return null;
      }
      return {
        type: "config",
        thresholds: msg.thresholds as Record<string, number>,
        mapping: (msg.mapping ?? {}) as Record<string, string>,
        buffer_len: Number(msg.buffer_len) || 0,
      };
    }
    case "game_result": {
      return {
        type: "game_result",
        event: String(msg.event ?? ""),
        success: Boolean(msg.success),
      };
    }
    default:
      return null;
  }
}

export function serializeClientMessage(msg: ClientMessage): string {
  return JSON.stringify(msg);
}
