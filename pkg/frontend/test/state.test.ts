// Reducer tests: ordering, dedup by sequence, and decision-trace assembly.

import { describe, expect, it } from "vitest";
import { activeTrace, initialState, reduce, reduceAll } from "../src/state.js";
import type { SessionEvent } from "../src/types.js";

let seq = 0;
function event(kind: string, data: Record<string, unknown>, at?: number): SessionEvent {
  return { seq: at ?? seq++, t: 0, kind, data };
}

function decisionCycle(cycle: number, startSeq: number): SessionEvent[] {
  let s = startSeq;
  return [
    { seq: s++, t: 0, kind: "utterance", data: { speaker: "user", text: `hello ${cycle}` } },
    { seq: s++, t: 0, kind: "cycle-started", data: { cycle, trigger: "utterance" } },
    {
      seq: s++,
      t: 0,
      kind: "kg-retrieved",
      data: {
        cycle,
        internal: 1,
        fallback: 0,
        results: [
          {
            entity: "WaterBottle",
            source: "internal",
            triples: [["WaterBottle", "affords", "DrinkWater"]],
          },
        ],
      },
    },
    { seq: s++, t: 0, kind: "reasoner-reply", data: { cycle, raw: "Output: POINT_WATER sip", latency: 0.4 } },
    {
      seq: s++,
      t: 0,
      kind: "verifier-report",
      data: { cycle, verdict: "approved", edit_class: "none", before: "x", after: "x" },
    },
    {
      seq: s++,
      t: 0,
      kind: "command-applied",
      data: {
        cycle,
        command: { kind: "point", utterance: "sip", target: "WATER" },
        executed: "point",
        phase: "greeting",
        index: 0,
      },
    },
    { seq: s++, t: 0, kind: "spoke", data: { text: "sip" } },
  ];
}

describe("reduce", () => {
  it("keeps transcript in event-log order", () => {
    const state = initialState();
    reduceAll(state, [
      event("utterance", { speaker: "user", text: "one" }, 0),
      event("spoke", { text: "two" }, 1),
      event("utterance", { speaker: "user", text: "three" }, 2),
    ]);
    expect(state.transcript.map((t) => t.text)).toEqual(["one", "two", "three"]);
    expect(state.transcript.map((t) => t.speaker)).toEqual(["user", "coach", "user"]);
  });

  it("drops duplicate sequence numbers", () => {
    const state = initialState();
    const events = decisionCycle(1, 0);
    reduceAll(state, events);
    const before = state.transcript.length;
    reduceAll(state, events); // replayed backlog after a reconnect
    expect(state.transcript.length).toBe(before);
    expect(state.duplicatesDropped).toBe(events.length);
    expect(state.decisionsTotal).toBe(1);
  });

  it("assembles the decision trace from the stage events", () => {
    const state = initialState();
    reduceAll(state, decisionCycle(1, 0));
    const trace = activeTrace(state);
    expect(trace).not.toBeNull();
    expect(trace!.triples).toEqual([
      { entity: "WaterBottle", relation: "affords", target: "DrinkWater", source: "internal" },
    ]);
    expect(trace!.rawReply).toContain("POINT_WATER");
    expect(trace!.verdict).toBe("approved");
    expect(trace!.command!.target).toBe("WATER");
    expect(trace!.executed).toBe("point");
    expect(state.lastLatency).toBeCloseTo(0.4);
  });

  it("tracks objects, emotion, and routine panels from events", () => {
    const state = initialState();
    reduceAll(state, [
      event("objects-changed", { present: ["WATER", "CHAIR"] }, 0),
      event("emotion-changed", { fused: { label: "tired" } }, 1),
      event("pose-tick", { v: true, held: { held_seconds: 1.5, completed: false } }, 2),
      event("exercise-success", { exercise: "ArmRaise", phase: "awaiting_confirmation", status: "success" }, 3),
    ]);
    expect(state.objects).toEqual(["WATER", "CHAIR"]);
    expect(state.emotionLabel).toBe("tired");
    expect(state.routine.hold).toEqual({ held_seconds: 1.5, completed: false });
    expect(state.routine.phase).toBe("awaiting_confirmation");
    expect(state.routine.status).toBe("success");
  });

  it("counts verifier edit classes", () => {
    const state = initialState();
    const events = decisionCycle(1, 0);
    const report = events.find((e) => e.kind === "verifier-report")!;
    report.data = { ...report.data, verdict: "edited", edit_class: "prefix-normalization" };
    reduceAll(state, events);
    expect(state.editCounts["prefix-normalization"]).toBe(1);
    expect(state.decisionsApproved).toBe(0);
  });

  it("marks stop as terminal", () => {
    const state = initialState();
    reduce(state, event("routine-stopped", { reason: "requested" }, 0));
    expect(state.stopped).toBe(true);
    expect(state.routine.phase).toBe("stopped");
  });

  it("records degraded cycles", () => {
    const state = initialState();
    reduceAll(state, [
      event("cycle-started", { cycle: 1, trigger: "utterance" }, 0),
      event("reasoner-failed", { cycle: 1, cause: "parse-error: no marker", latency: 0.2 }, 1),
    ]);
    const trace = activeTrace(state);
    expect(trace!.failureCause).toContain("parse-error");
    expect(state.lastLatency).toBeCloseTo(0.2);
  });
});
