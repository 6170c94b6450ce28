// Console-wide state: latest frame, config snapshot, connection, view.

import { ConfigMessage, ControlFrame, ServerMessage } from "./protocol.js";

export type View = "feedback" | "dino" | "calibration";

export interface ConsoleState {
  frame: ControlFrame | null;
  config: ConfigMessage | null;
  connected: boolean;
  view: View;
  lastCue: { class: string; duration_ms: number } | null;
  results: { event: string; success: boolean }[];
}

export function initialState(): ConsoleState {
  return {
    frame: null,
    config: null,
    connected: false,
    view: "feedback",
    lastCue: null,
    results: [],
  };
}

export function applyServerMessage(
  state: ConsoleState,
  msg: ServerMessage,
): ConsoleState {
  switch (msg.type) {
    case "control":
      return { ...state, frame: msg };
    case "config":
      return { ...state, config: msg };
    case "cue":
      return { ...state, lastCue: { class: msg.class, duration_ms: msg.duration_ms } };
    case "game_result":
      return { ...state, results: [...state.results, msg] };
  }
}

export function setConnected(state: ConsoleState, connected: boolean): ConsoleState {
  return { ...state, connected };
}

export function setView(state: ConsoleState, view: View): ConsoleState {
  return { ...state, view };
}

/** Class names in render order: the config's threshold keys, sorted. */
export function classNames(state: ConsoleState): string[] {
  if (!state.config) return [];
  return Object.keys(state.config.thresholds).sort();
}
