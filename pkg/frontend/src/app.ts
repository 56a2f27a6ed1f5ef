/**
 * DOM wiring for the chat client: transcript, live stage lanes, tool cards
 * with artifact players, and the registry browser. State logic lives in
 * model.ts; network access in api.ts.
 */

import {
  createSession,
  fetchToolDetail,
  fetchTools,
  postMessage,
  subscribeEvents,
  ApiError,
} from "./api.js";
import {
  STAGES,
  STAGE_LABELS,
  applyTraceEvent,
  failTurn,
  filterRegistry,
  finalizeTurn,
  newTurnView,
  type RegistryEntry,
  type Stage,
  type ToolCardView,
  type TurnView,
} from "./model.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

// ---- chat pane ----------------------------------------------------------------

let sessionId: string | null = null;
let currentTurn: TurnView | null = null;
let unsubscribe: (() => void) | null = null;

function renderLanes(view: TurnView): void {
  const container = byId<HTMLDivElement>("lanes");
  container.replaceChildren();
  for (const stage of STAGES) {
    const lane = el("div", "lane");
    lane.dataset.stage = stage;
    lane.append(el("h3", "", STAGE_LABELS[stage]));
    const list = el("ul");
    for (const event of view.lanes[stage]) {
      const item = el("li");
      item.append(el("span", "step-badge", String(event.step)));
      item.append(el("span", "", " " + event.summary));
      list.append(item);
    }
    lane.append(list);
    container.append(lane);
  }
}

function renderArtifact(card: HTMLElement, artifact: { url: string; kind: string }): void {
  const row = el("div", "artifact");
  if (artifact.kind === "audio") {
    const player = el("audio");
    player.controls = true;
    player.src = artifact.url;
    row.append(player);
  }
  const link = el("a", "", artifact.url.split("/").pop() ?? artifact.url);
  link.href = artifact.url;
  link.target = "_blank";
  row.append(link);
  card.append(row);
}

function renderToolCards(view: TurnView): void {
  const container = byId<HTMLDivElement>("tool-cards");
  container.replaceChildren();
  for (const cardView of view.toolCards) {
    const card = el("div", `tool-card status-${cardView.status}`);
    card.append(el("h4", "", cardView.tool));
    card.append(el("span", "status", `${cardView.status} · ${cardView.durationMs} ms`));
    const args = el("pre", "arguments");
    args.textContent = cardView.argumentsJson;
    card.append(args);
    for (const artifact of cardView.artifacts) renderArtifact(card, artifact);
    container.append(card);
  }
}

function renderTurn(view: TurnView): void {
  byId<HTMLDivElement>("user-text").textContent = view.userText;
  renderLanes(view);
  renderToolCards(view);
  const responseNode = byId<HTMLDivElement>("response");
  responseNode.textContent = view.responseText ?? (view.inFlight ? "…" : "");
  const banner = byId<HTMLDivElement>("banner");
  if (view.error) {
    banner.textContent = view.error;
    banner.classList.remove("hidden");
  } else {
    banner.classList.add("hidden");
  }
}

function setSendEnabled(): void {
  const input = byId<HTMLInputElement>("message-input");
  const button = byId<HTMLButtonElement>("send-button");
  const busy = currentTurn?.inFlight ?? false;
  button.disabled = busy || input.value.trim() === "";
}

async function ensureSession(): Promise<string> {
  if (sessionId === null) sessionId = await createSession();
  return sessionId;
}

async function sendMessage(): Promise<void> {
  const input = byId<HTMLInputElement>("message-input");
  const text = input.value.trim();
  if (text === "" || (currentTurn?.inFlight ?? false)) return;
  const view = newTurnView(text);
  currentTurn = view;
  renderTurn(view);
  setSendEnabled();
  try {
    const sid = await ensureSession();
    unsubscribe?.();
    unsubscribe = subscribeEvents(
      sid,
      (event) => {
        if (currentTurn === view && view.inFlight) {
          applyTraceEvent(view, event);
          renderLanes(view);
        }
      },
      () => {},
    );
    const reply = await postMessage(sid, text);
    finalizeTurn(view, reply);
    input.value = "";
  } catch (error) {
    if (error instanceof ApiError && error.status === 409) {
      failTurn(view, "turn in progress — wait for the current one to finish");
    } else {
      failTurn(view, `request failed (${String(error)}) — check the server and retry`);
    }
  } finally {
    unsubscribe?.();
    unsubscribe = null;
    renderTurn(view);
    setSendEnabled();
  }
}

// ---- registry browser ------------------------------------------------------------

let registryEntries: RegistryEntry[] = [];

function renderRegistry(): void {
  const modality = byId<HTMLSelectElement>("filter-modality").value;
  const category = byId<HTMLSelectElement>("filter-category").value;
  const visible = filterRegistry(registryEntries, modality, category);
  byId<HTMLSpanElement>("tool-count").textContent =
    `${visible.length} tool${visible.length === 1 ? "" : "s"}`;
  const grid = byId<HTMLDivElement>("registry-grid");
  grid.replaceChildren();
  for (const entry of visible) {
    const card = el("div", "registry-card");
    card.append(el("h4", "", entry.name));
    card.append(el("span", "taxonomy", `${entry.modality} · ${entry.category}`));
    card.append(el("p", "", entry.instruction));
    card.addEventListener("click", () => void showToolDetail(entry.name));
    grid.append(card);
  }
}

async function showToolDetail(name: string): Promise<void> {
  const panel = byId<HTMLDivElement>("tool-detail");
  panel.replaceChildren(el("p", "", "loading…"));
  try {
    const detail = await fetchToolDetail(name);
    panel.replaceChildren();
    panel.append(el("h3", "", detail.name));
    panel.append(el("p", "", detail.instruction));
    const params = el("ul", "params");
    for (const p of detail.parameters) {
      const flavor = p.type === "enum" ? `enum ${p.enum_values.join("|")}` : p.type;
      params.append(
        el("li", "", `${p.name} (${flavor}, ${p.required ? "required" : "optional"}): ${p.description}`),
      );
    }
    if (detail.parameters.length === 0) params.append(el("li", "", "no parameters"));
    panel.append(params);
    for (const example of detail.examples) {
      const block = el("div", "example");
      block.append(el("p", "", `“${example.query}”`));
      const args = el("pre");
      args.textContent = JSON.stringify(example.arguments, null, 1);
      block.append(args);
      panel.append(block);
    }
  } catch (error) {
    panel.replaceChildren(el("p", "error", `could not load ${name}: ${String(error)}`));
  }
}

async function loadRegistry(): Promise<void> {
  try {
    const reply = await fetchTools();
    registryEntries = reply.entries;
    renderRegistry();
  } catch {
    byId<HTMLDivElement>("registry-grid").replaceChildren(
      el("p", "error", "registry unavailable — is the server running?"),
    );
  }
}

// ---- boot --------------------------------------------------------------------------

export function boot(): void {
  byId<HTMLButtonElement>("send-button").addEventListener("click", () => void sendMessage());
  const input = byId<HTMLInputElement>("message-input");
  input.addEventListener("input", setSendEnabled);
  input.addEventListener("keydown", (event) => {
    if (event.key === "Enter") void sendMessage();
  });
  byId<HTMLSelectElement>("filter-modality").addEventListener("change", renderRegistry);
  byId<HTMLSelectElement>("filter-category").addEventListener("change", renderRegistry);
  setSendEnabled();
  void loadRegistry();
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", boot);
}
