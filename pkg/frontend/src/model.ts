/**
 * Pure view-state logic for the chat client: stage lanes, turn reducer,
 * registry filtering, and an incremental SSE parser. No DOM, no network —
 * everything here runs identically in the browser and under node tests.
 */

export const STAGES = [
  "task_planning",
  "tool_selection",
  "tool_invocation",
  "response_generation",
] as const;

export type Stage = (typeof STAGES)[number];

export const STAGE_LABELS: Record<Stage, string> = {
  task_planning: "Task planning",
  tool_selection: "Tool selection",
  tool_invocation: "Tool invocation",
  response_generation: "Response generation",
};

export interface TraceEventView {
  turn_id?: number;
  step: number;
  stage: string;
  summary: string;
  at: number;
}

/** Fixed step-to-lane map: 1-3, 4-7, 8-11, 12-13. */
export function laneForStep(step: number): Stage | null {
  if (step >= 1 && step <= 3) return "task_planning";
  if (step >= 4 && step <= 7) return "tool_selection";
  if (step >= 8 && step <= 11) return "tool_invocation";
  if (step === 12 || step === 13) return "response_generation";
  return null;
}

/** An event may only be displayed if its stage matches its step's lane. */
export function eventIsConsistent(event: TraceEventView): boolean {
  const lane = laneForStep(event.step);
  return lane !== null && lane === event.stage;
}

export interface ArtifactView {
  url: string;
  kind: "audio" | "image" | "video" | "other";
}

export function classifyArtifact(url: string): ArtifactView {
  const lower = url.toLowerCase();
  if (lower.endsWith(".wav")) return { url, kind: "audio" };
  if (lower.endsWith(".png") || lower.endsWith(".jpg")) return { url, kind: "image" };
  if (lower.endsWith(".mp4")) return { url, kind: "video" };
  return { url, kind: "other" };
}

export interface ToolCardView {
  callId: string;
  tool: string;
  status: string;
  durationMs: number;
  argumentsJson: string;
  artifacts: ArtifactView[];
}

export interface TurnView {
  userText: string;
  responseText: string | null;
  lanes: Record<Stage, TraceEventView[]>;
  toolCards: ToolCardView[];
  artifacts: ArtifactView[];
  dropped: number; // events rejected by the step/stage consistency check
  error: string | null;
  inFlight: boolean;
}

export function newTurnView(userText: string): TurnView {
  return {
    userText,
    responseText: null,
    lanes: {
      task_planning: [],
      tool_selection: [],
      tool_invocation: [],
      response_generation: [],
    },
    toolCards: [],
    artifacts: [],
    dropped: 0,
    error: null,
    inFlight: true,
  };
}

/** Append a live trace event into its lane; inconsistent events are never
 * displayed, only counted. Returns the same object, mutated. */
export function applyTraceEvent(view: TurnView, event: TraceEventView): TurnView {
  if (!eventIsConsistent(event)) {
    view.dropped += 1;
    return view;
  }
  view.lanes[event.stage as Stage].push(event);
  return view;
}

export interface MessageCall {
  call_id: string;
  tool: string;
  arguments: Record<string, unknown>;
  status: string;
  duration_ms: number;
  artifacts: string[];
}

export interface MessageReply {
  turn_id: number;
  response: string;
  calls: MessageCall[];
}

export function finalizeTurn(view: TurnView, reply: MessageReply): TurnView {
  view.responseText = reply.response;
  view.toolCards = reply.calls.map((call) => ({
    callId: call.call_id,
    tool: call.tool,
    status: call.status,
    durationMs: call.duration_ms,
    argumentsJson: JSON.stringify(call.arguments, null, 1),
    artifacts: call.artifacts.map(classifyArtifact),
  }));
  view.artifacts = view.toolCards.flatMap((card) => card.artifacts);
  view.inFlight = false;
  return view;
}

export function failTurn(view: TurnView, message: string): TurnView {
  view.error = message;
  view.inFlight = false;
  return view;
}

// ---- registry browser -------------------------------------------------------

export interface RegistryEntry {
  name: string;
  instruction: string;
  modality?: string;
  category?: string;
}

export function filterRegistry(
  entries: RegistryEntry[],
  modality: string | "" = "",
  category: string | "" = "",
): RegistryEntry[] {
  return entries.filter(
    (entry) =>
      (modality === "" || entry.modality === modality) &&
      (category === "" || entry.category === category),
  );
}

// ---- SSE ---------------------------------------------------------------------

export interface SseMessage {
  event: string;
  data: string;
}

/**
 * Incremental server-sent-event parser: feed raw text chunks, get complete
 * messages plus the unconsumed tail. Comment lines (":") are dropped.
 */
export function parseSseChunk(buffer: string): { messages: SseMessage[]; rest: string } {
  const messages: SseMessage[] = [];
  let rest = buffer;
  for (;;) {
    const boundary = rest.indexOf("\n\n");
    if (boundary === -1) break;
    const block = rest.slice(0, boundary);
    rest = rest.slice(boundary + 2);
    let event = "message";
    const dataLines: string[] = [];
    for (const line of block.split("\n")) {
      if (line.startsWith(":")) continue;
      if (line.startsWith("event:")) event = line.slice(6).trim();
      else if (line.startsWith("data:")) dataLines.push(line.slice(5).trim());
    }
    if (dataLines.length > 0) messages.push({ event, data: dataLines.join("\n") });
  }
  return { messages, rest };
}
