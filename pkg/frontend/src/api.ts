// REST calls against the session service; errors surface the service's
// field-level detail message.

import type { Metrics, Snapshot } from "./types.js";

async function expectOk(response: Response): Promise<Response> {
  if (!response.ok) {
    let detail = `${response.status}`;
    try {
      const body = await response.json();
      detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
    } catch {
      // keep the status code
    }
    throw new Error(detail);
  }
  return response;
}

export async function createSession(baseUrl: string): Promise<string> {
  const response = await expectOk(
    await fetch(`${baseUrl}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({}),
    }),
  );
  const body = await response.json();
  return body.session_id as string;
}

export async function listSessions(baseUrl: string): Promise<string[]> {
  const response = await expectOk(await fetch(`${baseUrl}/sessions`));
  return (await response.json()).sessions as string[];
}

export async function postUtterance(baseUrl: string, sessionId: string, text: string): Promise<void> {
  await expectOk(
    await fetch(`${baseUrl}/sessions/${sessionId}/utterance`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ text }),
    }),
  );
}

export interface PerceptionChange {
  objects?: string[];
  emotion?: { channels: Record<string, Record<string, number>>; weights?: Record<string, number> };
  landmarks?: { generator: string; duration: number };
}

export async function postPerception(
  baseUrl: string,
  sessionId: string,
  change: PerceptionChange,
): Promise<void> {
  await expectOk(
    await fetch(`${baseUrl}/sessions/${sessionId}/perception`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(change),
    }),
  );
}

export async function getSnapshot(baseUrl: string, sessionId: string): Promise<Snapshot> {
  const response = await expectOk(await fetch(`${baseUrl}/sessions/${sessionId}/state`));
  return (await response.json()) as Snapshot;
}

export async function getMetrics(baseUrl: string, sessionId: string): Promise<Metrics> {
  const response = await expectOk(await fetch(`${baseUrl}/sessions/${sessionId}/metrics`));
  return (await response.json()) as Metrics;
}

export async function getLogText(baseUrl: string, sessionId: string): Promise<string> {
  const response = await expectOk(await fetch(`${baseUrl}/sessions/${sessionId}/log`));
  return await response.text();
}
