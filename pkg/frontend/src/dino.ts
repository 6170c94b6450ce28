// Dino quick-time training game: a pure, deterministic state machine.
//
// The runner moves until it reaches an obstacle, then pauses for a
// quick-time event: a cue class is shown and control frames matching the
// cue (above its threshold) charge a bar by deltaUp while mismatches decay
// it by deltaDown. Reaching a full bar before the 3 s deadline jumps the
// obstacle; missing the deadline costs one health point. All timing uses
// frame timestamps, so a session is exactly replayable from its event log.

import { ControlFrame, GameEvent, clamp01 } from "./protocol.js";

export type DinoPhase = "RUN" | "QTE" | "JUMP" | "FAIL_RECOVERY";

export interface DinoParams {
  classes: string[];
  thresholds: Record<string, number>;
  deltaUp: number;
  deltaDown: number;
  qteWindowS: number;
  runBetweenObstaclesS: number;
  recoveryS: number;
  startHealth: number;
  seed: number;
}

export const DEFAULT_PARAMS: Omit<DinoParams, "classes" | "thresholds"> = {
  deltaUp: 0.2,
  deltaDown: 0.1,
  qteWindowS: 3.0,
  runBetweenObstaclesS: 2.0,
  recoveryS: 1.0,
  startHealth: 3,
  seed: 1,
};

export interface ClassScore {
  success: number;
  total: number;
}

export interface DinoState {
  phase: DinoPhase;
  health: number;
  barFill: number;
  cueClass: string | null;
  qteDeadline: number;
  phaseUntil: number;
  score: Record<string, ClassScore>;
  bag: string[];
  rngState: number;
  gameOver: boolean;
  lastTs: number;
}

/** Deterministic 32-bit PRNG (mulberry32); returns [value, nextState]. */
export function nextRandom(state: number): [number, number] {
  let t = (state + 0x6d2b79f5) | 0;
  let x = Math.imul(t ^ (t >>> 15), 1 | t);
  x = (x + Math.imul(x ^ (x >>> 7), 61 | x)) ^ x;
  return [((x ^ (x >>> 14)) >>> 0) / 4294967296, t];
}

/** Obstacles cycle through all classes round-robin, reshuffled per cycle. */
function drawCue(state: DinoState, params: DinoParams): [string, DinoState] {
  let bag = state.bag;
  let rngState = state.rngState;
  if (bag.length === 0) {
    bag = [...params.classes];
    for (let i = bag.length - 1; i > 0; i--) {
      let value: number;
      [value, rngState] = nextRandom(rngState);
      const j = Math.floor(value * (i + 1));
      [bag[i], bag[j]] = [bag[j], bag[i]];
    }
  }
  const cue = bag[0];
  return [cue, { ...state, bag: bag.slice(1), rngState }];
}

export function initialDino(params: DinoParams, startTs = 0): DinoState {
  const score: Record<string, ClassScore> = {};
  for (const cls of params.classes) score[cls] = { success: 0, total: 0 };
  return {
    phase: "RUN",
    health: params.startHealth,
    barFill: 0,
    cueClass: null,
    qteDeadline: 0,
    phaseUntil: startTs + params.runBetweenObstaclesS,
    score,
    bag: [],
    rngState: params.seed,
    gameOver: false,
    lastTs: startTs,
  };
}

export interface DinoTick {
  state: DinoState;
  events: GameEvent[];
}

/** Advance the machine by one control frame. Pure. */
export function dinoTick(
  state: DinoState,
  frame: ControlFrame,
  params: DinoParams,
): DinoTick {
  if (state.gameOver) return { state, events: [] };
  const ts = frame.ts;
  const events: GameEvent[] = [];
  let next: DinoState = { ...state, lastTs: ts };

  switch (next.phase) {
    case "RUN": {
      if (ts >= next.phaseUntil) {
        let cue: string;
        [cue, next] = drawCue(next, params);
        next = {
          ...next,
          phase: "QTE",
          cueClass: cue,
          barFill: 0,
          qteDeadline: ts + params.qteWindowS,
        };
        next.score = {
          ...next.score,
          [cue]: { ...next.score[cue], total: next.score[cue].total + 1 },
        };
        events.push({ type: "game_event", event: `qte_start:${cue}`, ts });
      }
      break;
    }
    case "QTE": {
      const cue = next.cueClass as string;
      if (ts >= next.qteDeadline) {
        next = {
          ...next,
          phase: "FAIL_RECOVERY",
          health: next.health - 1,
          barFill: 0,
          cueClass: null,
          phaseUntil: ts + params.recoveryS,
        };
        events.push({ type: "game_event", event: `qte_fail:${cue}`, ts });
        if (next.health <= 0) next = { ...next, health: 0, gameOver: true };
        break;
      }
      const theta = params.thresholds[cue] ?? 0.5;
      const matched =
        frame.label === cue && Math.max(...frame.probs) >= theta;
      const barFill = clamp01(
        matched
          ? next.barFill + params.deltaUp
          : next.barFill - params.deltaDown,
      );
      next = { ...next, barFill };
      if (barFill >= 1) {
        next = {
          ...next,
          phase: "JUMP",
          barFill: 0,
          cueClass: null,
          phaseUntil: ts + params.recoveryS,
          score: {
            ...next.score,
            [cue]: { ...next.score[cue], success: next.score[cue].success + 1 },
          },
        };
        events.push({ type: "game_event", event: `qte_success:${cue}`, ts });
      }
      break;
    }
    case "JUMP":
    case "FAIL_RECOVERY": {
      if (ts >= next.phaseUntil) {
        next = {
          ...next,
          phase: "RUN",
          phaseUntil: ts + params.runBetweenObstaclesS,
        };
      }
      break;
    }
  }
  return { state: next, events };
}

/** Server-driven cue (paradigm mode): opens a quick-time event for the
 * given class immediately, unless one is already active. */
export function dinoCue(
  state: DinoState,
  cueClass: string,
  ts: number,
  params: DinoParams,
): DinoTick {
  if (state.gameOver || state.phase === "QTE") return { state, events: [] };
  if (!(cueClass in state.score)) return { state, events: [] };
  const next: DinoState = {
    ...state,
    phase: "QTE",
    cueClass,
    barFill: 0,
    qteDeadline: ts + params.qteWindowS,
    lastTs: ts,
    score: {
      ...state.score,
      [cueClass]: {
        ...state.score[cueClass],
        total: state.score[cueClass].total + 1,
      },
    },
  };
  return {
    state: next,
    events: [{ type: "game_event", event: `qte_start:${cueClass}`, ts }],
  };
}

export function successTable(state: DinoState): Record<string, ClassScore> {
  return state.score;
}

export function totalAttempts(state: DinoState): number {
  return Object.values(state.score).reduce((n, s) => n + s.total, 0);
}
