/**
 * End-to-end check against a live server: boots `audiofab serve` with the
 * scripted planner and the canonical 36-tool registry, sends the music
 * request over the real /v1 endpoints while consuming the SSE stream, and
 * feeds everything through the same view reducer the browser uses.
 *
 * Skipped (not failed) when the Python package is not installed.
 */

import assert from "node:assert/strict";
import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { existsSync } from "node:fs";
import http from "node:http";
import path from "node:path";
import { fileURLToPath } from "node:url";
import { after, before, test } from "node:test";

import {
  STAGES,
  applyTraceEvent,
  filterRegistry,
  finalizeTurn,
  newTurnView,
  parseSseChunk,
  type MessageReply,
  type RegistryEntry,
  type TraceEventView,
} from "../src/model.js";

const PYTHON = process.env.PYTHON ?? "python3";

function findRepoRoot(): string {
  let dir = path.dirname(fileURLToPath(import.meta.url));
  for (let hops = 0; hops < 6; hops++) {
    if (existsSync(path.join(dir, "fixtures", "config.json"))) return dir;
    dir = path.dirname(dir);
  }
  throw new Error("could not locate the repo root (fixtures/config.json)");
}

const ROOT = findRepoRoot();
const MUSIC_QUERY =
  "analyze this pop song's style, split vocals, and make a similar new segment";

const MUSIC_ROW = [
  "music_separation", "music_mix_track", "music_format_conversion",
  "music_emotion_recognition", "music_style_description", "music2song",
  "text2music", "lyrics2song", "lyrics_recognition",
];

function serverAvailable(): boolean {
  const probe = spawnSync(PYTHON, ["-c", "import audiofab"], { timeout: 20000 });
  return probe.status === 0;
}

function httpJson(
  method: string,
  url: string,
  body?: unknown,
): Promise<{ status: number; body: any }> {
  return new Promise((resolve, reject) => {
    const payload = body === undefined ? null : JSON.stringify(body);
    const request = http.request(
      url,
      {
        method,
        headers: payload
          ? { "Content-Type": "application/json", "Content-Length": Buffer.byteLength(payload) }
          : {},
      },
      (response) => {
        let data = "";
        response.on("data", (chunk) => (data += chunk));
        response.on("end", () => {
          try {
            resolve({ status: response.statusCode ?? 0, body: data ? JSON.parse(data) : {} });
          } catch (error) {
            reject(error);
          }
        });
      },
    );
    request.on("error", reject);
    if (payload) request.write(payload);
    request.end();
  });
}

/** Collect SSE messages until a `done` event or timeout, via the shared parser. */
function collectSse(
  url: string,
  onOpen: () => void,
  timeoutMs = 30000,
): Promise<{ event: string; data: string }[]> {
  return new Promise((resolve, reject) => {
    const messages: { event: string; data: string }[] = [];
    let buffer = "";
    const request = http.get(url, (response) => {
      onOpen();
      response.setEncoding("utf-8");
      response.on("data", (chunk: string) => {
        buffer += chunk;
        const parsed = parseSseChunk(buffer);
        buffer = parsed.rest;
        for (const message of parsed.messages) {
          messages.push(message);
          if (message.event === "done") {
            request.destroy();
            resolve(messages);
            return;
          }
        }
      });
      response.on("end", () => resolve(messages));
    });
    request.on("error", (error) => {
      if (messages.some((m) => m.event === "done")) resolve(messages);
      else reject(error);
    });
    setTimeout(() => {
      request.destroy();
      resolve(messages);
    }, timeoutMs).unref();
  });
}

let server: ChildProcess | null = null;
let base = "";
const available = serverAvailable();

before(async () => {
  if (!available) return;
  const port = 20000 + Math.floor(Math.random() * 20000);
  server = spawn(
    PYTHON,
    ["-m", "audiofab.cli", "serve",
     "--config", path.join(ROOT, "fixtures", "config.json"),
     "--port", String(port)],
    { cwd: ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );
  base = `http://127.0.0.1:${port}`;
  let stderr = "";
  server.stderr!.on("data", (chunk: Buffer) => (stderr += chunk.toString()));
  await new Promise<void>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("server did not start")), 20000);
    server!.stdout!.on("data", (chunk: Buffer) => {
      if (chunk.toString().includes("serving on")) {
        clearTimeout(timer);
        resolve();
      }
    });
    server!.on("exit", (code) =>
      reject(new Error(`server exited early: ${code}\n${stderr}`)),
    );
  });
});

after(() => {
  server?.kill();
});

test("music query renders lanes, tool cards and the response", { skip: !available }, async () => {
  const session = await httpJson("POST", `${base}/v1/sessions`);
  assert.equal(session.status, 200);
  const sid = session.body.session_id as string;

  const view = newTurnView(MUSIC_QUERY);
  let opened!: () => void;
  const openPromise = new Promise<void>((resolve) => (opened = resolve));
  const ssePromise = collectSse(`${base}/v1/sessions/${sid}/events`, opened);
  await openPromise;

  const reply = await httpJson("POST", `${base}/v1/sessions/${sid}/messages`, {
    text: MUSIC_QUERY,
  });
  assert.equal(reply.status, 200);
  const messages = await ssePromise;

  for (const message of messages) {
    if (message.event !== "trace") continue;
    applyTraceEvent(view, JSON.parse(message.data) as TraceEventView);
  }
  finalizeTurn(view, reply.body as MessageReply);

  for (const stage of STAGES) {
    assert.ok(view.lanes[stage].length >= 1, `lane ${stage} should have events`);
  }
  assert.equal(view.dropped, 0, "no event may violate the step/stage map");
  assert.equal(view.toolCards.length, 3);
  assert.deepEqual(
    view.toolCards.map((card) => card.tool),
    ["music_style_description", "music_separation", "text2music"],
  );
  assert.ok(view.responseText && view.responseText.length > 0);
  assert.ok(view.artifacts.length >= 3);

  // artifacts are fetchable through the documented route only
  for (const artifact of view.artifacts) {
    assert.match(artifact.url, /^\/v1\/sessions\//);
    const fetched = await httpJson("GET", `${base}${artifact.url}`).catch(() => null);
    assert.ok(fetched === null || fetched.status === 200);
  }
});

test("registry browser shows 36 tools and filters by taxonomy", { skip: !available }, async () => {
  const reply = await httpJson("GET", `${base}/v1/tools?detail=1`);
  assert.equal(reply.status, 200);
  const entries = reply.body.entries as RegistryEntry[];
  assert.equal(entries.length, 36);

  const music = filterRegistry(entries, "music");
  assert.deepEqual(
    music.map((entry) => entry.name).sort(),
    [...MUSIC_ROW].sort(),
  );

  const speechEditing = filterRegistry(entries, "speech", "editing");
  assert.ok(speechEditing.some((entry) => entry.name === "speech_enhancement"));

  assert.equal(filterRegistry(entries).length, 36);
});

test("tool detail endpoint backs the click-through panel", { skip: !available }, async () => {
  const reply = await httpJson("GET", `${base}/v1/tools/text2speech`);
  assert.equal(reply.status, 200);
  assert.deepEqual(
    reply.body.parameters.map((p: { name: string }) => p.name),
    ["text", "voice"],
  );
  assert.ok(reply.body.examples.length >= 1);
  const missing = await httpJson("GET", `${base}/v1/tools/definitely_not_there`);
  assert.equal(missing.status, 404);
});

test("second concurrent turn reports 409 for the busy session", { skip: !available }, async () => {
  const session = await httpJson("POST", `${base}/v1/sessions`);
  const sid = session.body.session_id as string;
  const [first, second] = await Promise.all([
    httpJson("POST", `${base}/v1/sessions/${sid}/messages`, { text: MUSIC_QUERY }),
    httpJson("POST", `${base}/v1/sessions/${sid}/messages`, { text: MUSIC_QUERY }),
  ]);
  const statuses = [first.status, second.status].sort();
  assert.deepEqual(statuses, [200, 409]);
});
