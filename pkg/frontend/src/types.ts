// Protocol types mirroring the session-service event log and snapshot
// schemas (docs/protocol: one JSON record per event, seq from 0).

export interface SessionEvent {
  seq: number;
  t: number;
  kind: string;
  data: Record<string, unknown>;
}

export interface HoldTimer {
  held_seconds: number;
  completed: boolean;
}

export interface HoldSnapshot {
  held_seconds?: number;
  invalid_seconds?: number;
  completed?: boolean;
  left?: HoldTimer;
  right?: HoldTimer;
}

export interface Snapshot {
  session: string;
  phase: string;
  exercise: {
    index: number;
    name: string;
    display: string;
    rule: string;
    hold_target: number;
  };
  hold: HoldSnapshot | null;
  exercise_status: string;
  stopped_reason: string | null;
  objects: { token: string; display: string }[];
  emotion: { label: string; scores: Record<string, number> } | null;
  transcript: string;
  history: { speaker: string; text: string }[];
  in_flight: boolean;
  seq: number;
  metrics: Metrics;
}

export interface Metrics {
  kg_internal_hits: number;
  kg_fallbacks: number;
  verifier_edits: Record<string, number>;
  decision_latencies: number[];
  corrective_resets: number;
  exercises_completed: number;
  decisions_total: number;
  decisions_approved: number;
  reasoner_failures: number;
}

export interface KgTriple {
  entity: string;
  relation: string;
  target: string;
  source: "internal" | "fallback";
}

export function isSessionEvent(value: unknown): value is SessionEvent {
  if (typeof value !== "object" || value === null) return false;
  const record = value as Record<string, unknown>;
  return (
    typeof record.seq === "number" &&
    typeof record.t === "number" &&
    typeof record.kind === "string" &&
    typeof record.data === "object" &&
    record.data !== null
  );
}

export function parseEventLine(line: string): SessionEvent | null {
  try {
    const parsed: unknown = JSON.parse(line);
    return isSessionEvent(parsed) ? parsed : null;
  } catch {
    return null;
  }
}
