// Console view model: a pure fold over the session event stream.
//
// The reducer renders what the engine reported; it never re-derives
// decisions (no fusion, parsing, or verification happens client-side).
// Duplicate deliveries after a reconnect are dropped by sequence number.

import type { KgTriple, SessionEvent } from "./types.js";

export interface TranscriptEntry {
  seq: number;
  speaker: "user" | "coach";
  text: string;
  corrective: boolean;
  fallback: boolean;
}

export interface DecisionTrace {
  cycle: number;
  trigger?: string;
  triples: KgTriple[];
  kgInternal: number;
  kgFallback: number;
  rawReply?: string;
  failureCause?: string;
  latency?: number;
  verdict?: string;
  editClass?: string;
  before?: string;
  after?: string;
  command?: { kind: string; utterance: string; target?: string };
  executed?: string;
}

export interface RoutinePanel {
  phase: string;
  index: number;
  status: string;
  hold: Record<string, unknown> | null;
  lastValidity: unknown;
}

export interface ConsoleState {
  lastSeq: number;
  duplicatesDropped: number;
  transcript: TranscriptEntry[];
  objects: string[];
  emotionLabel: string | null;
  routine: RoutinePanel;
  currentCycle: DecisionTrace | null;
  completedCycles: DecisionTrace[];
  editCounts: Record<string, number>;
  decisionsTotal: number;
  decisionsApproved: number;
  lastLatency: number | null;
  stopped: boolean;
  stoppedReason: string | null;
}

export function initialState(): ConsoleState {
  return {
    lastSeq: -1,
    duplicatesDropped: 0,
    transcript: [],
    objects: [],
    emotionLabel: null,
    routine: { phase: "greeting", index: 0, status: "not yet", hold: null, lastValidity: null },
    currentCycle: null,
    completedCycles: [],
    editCounts: {},
    decisionsTotal: 0,
    decisionsApproved: 0,
    lastLatency: null,
    stopped: false,
    stoppedReason: null,
  };
}

function tracesFor(state: ConsoleState, cycle: number): DecisionTrace {
  if (state.currentCycle && state.currentCycle.cycle === cycle) return state.currentCycle;
  const trace: DecisionTrace = { cycle, triples: [], kgInternal: 0, kgFallback: 0 };
  state.currentCycle = trace;
  return trace;
}

function finishCycle(state: ConsoleState): void {
  if (state.currentCycle) {
    state.completedCycles.push(state.currentCycle);
    state.currentCycle = null;
  }
}

/** Apply one event; duplicates (seq <= lastSeq) are counted and ignored. */
export function reduce(state: ConsoleState, event: SessionEvent): ConsoleState {
  if (event.seq <= state.lastSeq) {
    state.duplicatesDropped += 1;
    return state;
  }
  state.lastSeq = event.seq;
  const data = event.data as Record<string, any>;

  switch (event.kind) {
    case "utterance":
      state.transcript.push({
        seq: event.seq,
        speaker: "user",
        text: String(data.text),
        corrective: false,
        fallback: false,
      });
      break;
    case "spoke":
      state.transcript.push({
        seq: event.seq,
        speaker: "coach",
        text: String(data.text),
        corrective: Boolean(data.corrective),
        fallback: Boolean(data.fallback),
      });
      break;
    case "objects-changed":
      state.objects = (data.present as string[]).slice();
      break;
    case "emotion-changed":
      state.emotionLabel = data.fused ? String(data.fused.label) : null;
      break;
    case "pose-tick":
      state.routine.hold = data.held ?? null;
      state.routine.lastValidity = data.v;
      break;
    case "exercise-success":
      state.routine.status = String(data.status ?? "success");
      state.routine.phase = String(data.phase ?? state.routine.phase);
      break;
    case "cycle-started":
      tracesFor(state, Number(data.cycle)).trigger = String(data.trigger);
      break;
    case "kg-retrieved": {
      const trace = tracesFor(state, Number(data.cycle));
      trace.kgInternal = Number(data.internal);
      trace.kgFallback = Number(data.fallback);
      trace.triples = [];
      for (const result of data.results as any[]) {
        for (const [entity, relation, target] of result.triples as [string, string, string][]) {
          trace.triples.push({ entity, relation, target, source: result.source });
        }
      }
      break;
    }
    case "reasoner-reply": {
      const trace = tracesFor(state, Number(data.cycle));
      trace.rawReply = String(data.raw);
      trace.latency = Number(data.latency);
      state.lastLatency = trace.latency;
      break;
    }
    case "reasoner-failed": {
      const trace = tracesFor(state, Number(data.cycle));
      trace.failureCause = String(data.cause);
      if (typeof data.latency === "number") {
        trace.latency = data.latency;
        state.lastLatency = data.latency;
      }
      finishCycle(state);
      break;
    }
    case "verifier-report": {
      const trace = tracesFor(state, Number(data.cycle));
      trace.verdict = String(data.verdict);
      trace.editClass = String(data.edit_class);
      trace.before = String(data.before);
      trace.after = String(data.after);
      state.decisionsTotal += 1;
      if (data.verdict === "approved") {
        state.decisionsApproved += 1;
      } else {
        const cls = String(data.edit_class);
        state.editCounts[cls] = (state.editCounts[cls] ?? 0) + 1;
      }
      break;
    }
    case "command-applied": {
      const trace = tracesFor(state, Number(data.cycle));
      trace.command = data.command;
      trace.executed = String(data.executed);
      state.routine.phase = String(data.phase);
      state.routine.index = Number(data.index);
      if (data.executed === "next_exercise") {
        state.routine.status = "not yet";
        state.routine.hold = null;
      }
      finishCycle(state);
      break;
    }
    case "routine-stopped":
      state.stopped = true;
      state.stoppedReason = String(data.reason ?? "");
      state.routine.phase = "stopped";
      break;
    default:
      break;
  }
  return state;
}

export function reduceAll(state: ConsoleState, events: SessionEvent[]): ConsoleState {
  for (const event of events) reduce(state, event);
  return state;
}

/** The most recent trace to display (in-flight cycle wins over finished). */
export function activeTrace(state: ConsoleState): DecisionTrace | null {
  return state.currentCycle ?? state.completedCycles[state.completedCycles.length - 1] ?? null;
}
