// Console wiring: connect to a session, feed the reducer from the event
// stream, and post operator actions back through the API.

import {
  createSession,
  getSnapshot,
  postPerception,
  postUtterance,
} from "./api.js";
import { initialState, reduce, type ConsoleState } from "./state.js";
import { subscribe, type Subscription } from "./sse.js";
import type { Snapshot } from "./types.js";
import { renderAll, renderConnection } from "./view.js";

// Fixed object catalog and landmark generators documented by the service.
const OBJECT_TOKENS = ["CHAIR", "WATER", "MUG", "BANANA", "GLASS", "TOWEL"];
const GENERATORS = [
  "valid-arms-overhead",
  "valid-toe-touch",
  "lean-left",
  "lean-right",
  "invalid-slouch",
];
const EMOTIONS = ["angry", "frustrated", "happy", "neutral", "sad", "tired"];
const CHANNELS = ["voice", "facial", "text"] as const;

let state: ConsoleState = initialState();
let snapshot: Snapshot | null = null;
let subscription: Subscription | null = null;
let baseUrl = "";
let sessionId: string | null = null;
let renderQueued = false;

function queueRender(): void {
  if (renderQueued) return;
  renderQueued = true;
  requestAnimationFrame(() => {
    renderQueued = false;
    renderAll(state, snapshot, OBJECT_TOKENS);
  });
}

async function refreshSnapshot(): Promise<void> {
  if (!sessionId) return;
  try {
    snapshot = await getSnapshot(baseUrl, sessionId);
  } catch {
    snapshot = null;
  }
  queueRender();
}

function showError(message: string): void {
  const node = document.getElementById("error")!;
  node.textContent = message;
  node.style.display = message ? "block" : "none";
  if (message) setTimeout(() => showError(""), 6000);
}

async function connect(): Promise<void> {
  baseUrl = (document.getElementById("base-url") as HTMLInputElement).value.replace(/\/$/, "");
  const requested = (document.getElementById("session-id") as HTMLInputElement).value.trim();
  subscription?.close();
  state = initialState();
  try {
    sessionId = requested || (await createSession(baseUrl));
  } catch (error) {
    showError(`could not create session: ${String(error)}`);
    return;
  }
  (document.getElementById("session-id") as HTMLInputElement).value = sessionId;
  subscription = subscribe(baseUrl, sessionId, {
    onEvent: (event) => {
      reduce(state, event);
      if (event.kind === "command-applied" || event.kind === "exercise-success") {
        void refreshSnapshot();
      }
      queueRender();
    },
    onStatus: (status) => {
      renderConnection(status, sessionId);
      if (status === "open") {
        // Replays arrive from sequence 0; the reducer drops duplicates.
        void refreshSnapshot();
      }
    },
  });
}

function selectedEmotionChannels(): Record<string, Record<string, number>> {
  const channels: Record<string, Record<string, number>> = {};
  for (const channel of CHANNELS) {
    const label = (document.getElementById(`emotion-${channel}`) as HTMLSelectElement).value;
    const confidence = Number(
      (document.getElementById(`confidence-${channel}`) as HTMLInputElement).value,
    );
    if (label !== "off") {
      const rest = (1 - confidence) / (EMOTIONS.length - 1);
      channels[channel] = Object.fromEntries(
        EMOTIONS.map((e) => [e, e === label ? confidence : rest]),
      );
    }
  }
  return channels;
}

function selectedWeights(): Record<string, number> {
  return Object.fromEntries(
    CHANNELS.map((channel) => [
      channel,
      Number((document.getElementById(`weight-${channel}`) as HTMLInputElement).value),
    ]),
  );
}

function wireControls(): void {
  document.getElementById("connect")!.addEventListener("click", () => void connect());

  document.getElementById("say-form")!.addEventListener("submit", (event) => {
    event.preventDefault();
    const input = document.getElementById("say-text") as HTMLInputElement;
    const text = input.value.trim();
    if (!text || !sessionId) return;
    input.value = "";
    postUtterance(baseUrl, sessionId, text).catch((error) => showError(String(error)));
  });

  for (const token of OBJECT_TOKENS) {
    document
      .querySelector<HTMLInputElement>(`input[data-token="${token}"]`)!
      .addEventListener("change", () => {
        if (!sessionId) return;
        const present = OBJECT_TOKENS.filter(
          (t) => document.querySelector<HTMLInputElement>(`input[data-token="${t}"]`)!.checked,
        );
        postPerception(baseUrl, sessionId, { objects: present }).catch((error) =>
          showError(String(error)),
        );
      });
  }

  document.getElementById("apply-emotion")!.addEventListener("click", () => {
    if (!sessionId) return;
    postPerception(baseUrl, sessionId, {
      emotion: { channels: selectedEmotionChannels(), weights: selectedWeights() },
    }).catch((error) => showError(String(error)));
  });

  document.getElementById("start-segment")!.addEventListener("click", () => {
    if (!sessionId) return;
    const generator = (document.getElementById("generator") as HTMLSelectElement).value;
    const duration = Number((document.getElementById("duration") as HTMLInputElement).value);
    postPerception(baseUrl, sessionId, { landmarks: { generator, duration } }).catch((error) =>
      showError(String(error)),
    );
  });
}

function populateSelectors(): void {
  const generatorSelect = document.getElementById("generator") as HTMLSelectElement;
  generatorSelect.innerHTML = GENERATORS.map((g) => `<option>${g}</option>`).join("");
  for (const channel of CHANNELS) {
    const select = document.getElementById(`emotion-${channel}`) as HTMLSelectElement;
    select.innerHTML =
      `<option value="off">off</option>` + EMOTIONS.map((e) => `<option>${e}</option>`).join("");
  }
}

populateSelectors();
wireControls();
renderConnection("closed", null);
