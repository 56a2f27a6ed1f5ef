/**
 * Thin typed client over the service's /v1 endpoints. Every network call
 * the UI makes goes through here, and everything here targets /v1/**.
 */

import type { MessageReply, RegistryEntry, TraceEventView } from "./model.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

async function asJson(response: Response): Promise<any> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    throw new ApiError(response.status, body.error ?? `HTTP ${response.status}`);
  }
  return body;
}

export async function createSession(base = ""): Promise<string> {
  const reply = await asJson(await fetch(`${base}/v1/sessions`, { method: "POST" }));
  return reply.session_id;
}

export async function postMessage(
  sessionId: string,
  text: string,
  base = "",
): Promise<MessageReply> {
  const response = await fetch(`${base}/v1/sessions/${sessionId}/messages`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ text }),
  });
  return asJson(response);
}

export async function fetchTools(base = ""): Promise<{
  entries: RegistryEntry[];
  token_estimate: number;
}> {
  return asJson(await fetch(`${base}/v1/tools?detail=1`));
}

export interface ToolDetail {
  name: string;
  instruction: string;
  modality: string;
  category: string;
  parameters: {
    name: string;
    type: string;
    required: boolean;
    description: string;
    enum_values: string[];
  }[];
  examples: { query: string; arguments: Record<string, unknown> }[];
}

export async function fetchToolDetail(name: string, base = ""): Promise<ToolDetail> {
  return asJson(await fetch(`${base}/v1/tools/${encodeURIComponent(name)}`));
}

/** Subscribe to the session's live trace stream. Returns an unsubscribe fn. */
export function subscribeEvents(
  sessionId: string,
  onTrace: (event: TraceEventView) => void,
  onDone: (ok: boolean) => void,
  base = "",
): () => void {
  const source = new EventSource(`${base}/v1/sessions/${sessionId}/events`);
  source.addEventListener("trace", (raw) => {
    try {
      onTrace(JSON.parse((raw as MessageEvent).data));
    } catch {
      /* malformed event payloads are ignored, not fatal */
    }
  });
  source.addEventListener("done", (raw) => {
    try {
      onDone(Boolean(JSON.parse((raw as MessageEvent).data).ok));
    } catch {
      onDone(false);
    }
  });
  return () => source.close();
}
