// Offline recomputation of game performance from emitted game events.
// The pipeline stores each game_event as a timestamped session marker
// ("game:qte_start:left", "game:qte_success:left", ...), so the success
// table the game showed can be rebuilt, and audited, from the log alone.

import { ClassScore } from "./dino.js";

export interface LoggedEvent {
  event: string;
  ts: number;
}

const MARKER_PREFIX = "game:";

export function stripMarkerPrefix(label: string): string {
  return label.startsWith(MARKER_PREFIX)
    ? label.slice(MARKER_PREFIX.length)
    : label;
}

export function scoreFromEvents(events: LoggedEvent[]): Record<string, ClassScore> {
  const table: Record<string, ClassScore> = {};
  const ensure = (cls: string) => {
    if (!table[cls]) table[cls] = { success: 0, total: 0 };
    return table[cls];
  };
  for (const { event } of [...events].sort((a, b) => a.ts - b.ts)) {
    const name = stripMarkerPrefix(event);
    const [kind, cls] = name.split(":", 2);
    if (!cls) continue;
    if (kind === "qte_start") ensure(cls).total += 1;
    else if (kind === "qte_success") ensure(cls).success += 1;
  }
  return table;
}

export function tablesEqual(
  a: Record<string, ClassScore>,
  b: Record<string, ClassScore>,
): boolean {
  const keys = new Set([...Object.keys(a), ...Object.keys(b)]);
  for (const key of keys) {
    const left = a[key] ?? { success: 0, total: 0 };
    const right = b[key] ?? { success: 0, total: 0 };
    if (left.success !== right.success || left.total !== right.total) {
      return false;
    }
  }
  return true;
}
