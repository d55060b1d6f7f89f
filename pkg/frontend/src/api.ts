// Thin fetch wrappers for the game server.

import { CreateSessionRequest, Snapshot } from "./types.js";

export interface MoveRejection {
  rejected: true;
  status: number;
  detail: unknown;
}

export type MoveOutcome = Snapshot | MoveRejection;

export async function createSession(
  base: string,
  request: CreateSessionRequest,
): Promise<Snapshot> {
  const response = await fetch(`${base}/sessions`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(request),
  });
  if (!response.ok) {
    const detail = await response.json().catch(() => ({}));
    throw new Error(`create failed (${response.status}): ${JSON.stringify(detail)}`);
  }
  return (await response.json()) as Snapshot;
}

export async function fetchSnapshot(base: string, sessionId: string): Promise<Snapshot> {
  const response = await fetch(`${base}/sessions/${sessionId}`);
  if (!response.ok) {
    throw new Error(`snapshot failed (${response.status})`);
  }
  return (await response.json()) as Snapshot;
}

export async function submitMove(
  base: string,
  sessionId: string,
  seat: number,
  action: number,
): Promise<MoveOutcome> {
  const response = await fetch(`${base}/sessions/${sessionId}/moves`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ seat, action }),
  });
  if (response.ok) {
    return (await response.json()) as Snapshot;
  }
  const body = await response.json().catch(() => ({}));
  return { rejected: true, status: response.status, detail: body.detail };
}

export function streamUrl(base: string, sessionId: string, since: number): string {
  const ws = base.replace(/^http/, "ws");
  return `${ws}/sessions/${sessionId}/stream?since=${since}`;
}
