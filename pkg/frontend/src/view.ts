// DOM rendering for the console panels. Pure presentation: every value
// shown comes from the reduced event state or a snapshot field.

import { activeTrace, type ConsoleState, type DecisionTrace } from "./state.js";
import type { HoldSnapshot, Snapshot } from "./types.js";

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderConnection(status: string, sessionId: string | null): void {
  const badge = el("connection");
  badge.textContent = sessionId ? `${status} [${sessionId}]` : status;
  badge.className = `badge ${status === "open" ? "ok" : "warn"}`;
}

export function renderTranscript(state: ConsoleState): void {
  const container = el("transcript");
  container.innerHTML = state.transcript
    .map((entry) => {
      const cls =
        entry.speaker === "user" ? "user" : entry.corrective ? "coach corrective" : "coach";
      const tag = entry.corrective ? " (corrective)" : entry.fallback ? " (fallback)" : "";
      const who = entry.speaker === "user" ? "You" : "Coach";
      return `<div class="turn ${cls}"><span class="who">${who}${tag}</span>${escapeHtml(entry.text)}</div>`;
    })
    .join("");
  container.scrollTop = container.scrollHeight;
}

function holdBar(hold: HoldSnapshot | null, target: number): string {
  if (!hold) return `<div class="bar"><div class="fill" style="width:0%"></div></div>`;
  const bars: string[] = [];
  const one = (label: string, held: number, completed: boolean) => {
    const pct = Math.min(100, (held / target) * 100).toFixed(1);
    bars.push(
      `<div class="timer"><span>${label} ${held.toFixed(1)}s${completed ? " done" : ""}</span>` +
        `<div class="bar"><div class="fill${completed ? " done" : ""}" style="width:${pct}%"></div></div></div>`,
    );
  };
  if (hold.left && hold.right) {
    one("left", hold.left.held_seconds, hold.left.completed);
    one("right", hold.right.held_seconds, hold.right.completed);
  } else {
    one("hold", hold.held_seconds ?? 0, Boolean(hold.completed));
  }
  return bars.join("");
}

export function renderRoutine(state: ConsoleState, snapshot: Snapshot | null): void {
  const display = snapshot ? snapshot.exercise.display : `exercise ${state.routine.index + 1}`;
  const target = snapshot ? snapshot.exercise.hold_target : 5;
  const hold = (state.routine.hold as HoldSnapshot | null) ?? snapshot?.hold ?? null;
  el("routine").innerHTML =
    `<div><b>${escapeHtml(display)}</b> (step ${state.routine.index + 1})</div>` +
    `<div>phase: <code>${state.routine.phase}</code> · status: <code>${state.routine.status}</code>` +
    (state.stopped ? ` · stopped: ${escapeHtml(state.stoppedReason ?? "")}` : "") +
    `</div>` +
    holdBar(hold, target);
}

export function renderObjects(state: ConsoleState, tokens: string[]): void {
  for (const token of tokens) {
    const box = document.querySelector<HTMLInputElement>(`input[data-token="${token}"]`);
    if (box) box.checked = state.objects.includes(token);
  }
}

function traceHtml(trace: DecisionTrace | null): string {
  if (!trace) return `<div class="muted">no decisions yet</div>`;
  const parts: string[] = [`<div><b>cycle ${trace.cycle}</b> · trigger: ${trace.trigger ?? "?"}</div>`];
  if (trace.triples.length) {
    parts.push(
      `<div class="triples">` +
        trace.triples
          .map(
            (t) =>
              `<div><span class="badge ${t.source === "internal" ? "ok" : "warn"}">${t.source}</span> ` +
              `${escapeHtml(t.entity)} --${escapeHtml(t.relation)}--&gt; ${escapeHtml(t.target)}</div>`,
          )
          .join("") +
        `</div>`,
    );
  } else {
    parts.push(`<div class="muted">no knowledge retrieved</div>`);
  }
  if (trace.rawReply) parts.push(`<pre class="raw">${escapeHtml(trace.rawReply)}</pre>`);
  if (trace.failureCause)
    parts.push(`<div class="badge warn">degraded: ${escapeHtml(trace.failureCause)}</div>`);
  if (trace.verdict) {
    parts.push(
      `<div>verifier: <b>${trace.verdict}</b> (${trace.editClass})</div>` +
        `<div class="beforeafter"><pre>${escapeHtml(trace.before ?? "")}</pre>` +
        `<pre>${escapeHtml(trace.after ?? "")}</pre></div>`,
    );
  }
  if (trace.command) {
    parts.push(
      `<div>final: <code>${trace.command.kind}${trace.command.target ? " " + trace.command.target : ""}</code>` +
        ` executed as <code>${trace.executed}</code></div>`,
    );
  }
  return parts.join("");
}

export function renderTrace(state: ConsoleState): void {
  el("trace").innerHTML = traceHtml(activeTrace(state));
}

export function renderMetrics(state: ConsoleState): void {
  const edits = Object.entries(state.editCounts)
    .map(([cls, count]) => `${cls}=${count}`)
    .join(" ");
  el("metrics").textContent =
    `last latency: ${state.lastLatency === null ? "-" : state.lastLatency.toFixed(2) + "s"}` +
    ` · decisions: ${state.decisionsTotal} (approved ${state.decisionsApproved})` +
    (edits ? ` · edits: ${edits}` : "");
}

export function renderAll(state: ConsoleState, snapshot: Snapshot | null, tokens: string[]): void {
  renderTranscript(state);
  renderRoutine(state, snapshot);
  renderObjects(state, tokens);
  renderTrace(state);
  renderMetrics(state);
}
