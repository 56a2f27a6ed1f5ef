"""User-facing entry points: config, terminal REPL, and the HTTP service.

The HTTP service fronts the orchestrator with a small JSON API under /v1
plus a server-sent-event stream of trace events per session, and serves
the browser UI statically when a built frontend directory is available.
Per-session turn mutual exclusion surfaces as HTTP 409. See
docs/config.md for the config schema and docs/http_api.md for endpoints.
"""

from __future__ import annotations

import json
import os
import queue
import re
import sys
import tempfile
import threading
from dataclasses import dataclass, field
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, unquote, urlparse

from . import selection
from .orchestrator import Orchestrator, TurnInFlight, validate_trace
from .planner import LlmPlanner, ScriptedPlanner
from .registry import load_registry

ENV_LLM_URL = "AUDIOFAB_LLM_URL"
ENV_LLM_KEY = "AUDIOFAB_LLM_KEY"

DEFAULT_BUDGET_TOKENS = 4096
DEFAULT_K = 5
DEFAULT_PORT = 8723
DEFAULT_MAX_CONCURRENT = 4


class ConfigInvalid(Exception):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


@dataclass
class PlannerConfig:
    backend: str = "scripted"
    rules_file: str | None = None
    llm_url: str | None = None
    model: str | None = None
    api_key: str | None = None


@dataclass
class Config:
    registry_dir: str
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    budget_tokens: int = DEFAULT_BUDGET_TOKENS
    k: int = DEFAULT_K
    workspace_root: str = ""
    port: int = DEFAULT_PORT
    max_concurrent_invocations: int = DEFAULT_MAX_CONCURRENT
    parallel_subtasks: bool = False
    ui_dir: str | None = None

    def __post_init__(self):
        if not self.workspace_root:
            self.workspace_root = str(
                Path(tempfile.gettempdir()) / "audiofab" / "workspaces"
            )


def load_config(path: str | Path) -> Config:
    """Parse a JSON config file. Relative paths are resolved against the
    config file's directory; AUDIOFAB_LLM_URL / AUDIOFAB_LLM_KEY override
    the llm settings."""
    path = Path(path)
    problems: list[str] = []
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigInvalid([f"config unreadable: {exc}"]) from exc
    except ValueError as exc:
        raise ConfigInvalid([f"config is not valid JSON: {exc}"]) from exc
    if not isinstance(data, dict):
        raise ConfigInvalid(["config root must be a JSON object"])

    base = path.parent

    def _resolve(p: str | None) -> str | None:
        if p is None:
            return None
        rp = Path(p)
        return str(rp if rp.is_absolute() else base / rp)

    raw_planner = data.get("planner", {})
    if not isinstance(raw_planner, dict):
        raise ConfigInvalid(["planner: must be an object"])
    planner = PlannerConfig(
        backend=raw_planner.get("backend", "scripted"),
        rules_file=_resolve(raw_planner.get("rules_file")),
        llm_url=os.environ.get(ENV_LLM_URL) or raw_planner.get("llm_url"),
        model=raw_planner.get("model"),
        api_key=os.environ.get(ENV_LLM_KEY) or raw_planner.get("api_key"),
    )
    cfg = Config(
        registry_dir=_resolve(data.get("registry_dir")) or "",
        planner=planner,
        budget_tokens=data.get("budget_tokens", DEFAULT_BUDGET_TOKENS),
        k=data.get("k", DEFAULT_K),
        workspace_root=_resolve(data.get("workspace_root")) or "",
        port=data.get("port", DEFAULT_PORT),
        max_concurrent_invocations=data.get(
            "max_concurrent_invocations", DEFAULT_MAX_CONCURRENT
        ),
        parallel_subtasks=bool(data.get("parallel_subtasks", False)),
        ui_dir=_resolve(data.get("ui_dir")),
    )
    if not cfg.registry_dir:
        problems.append("registry_dir: required")
    if cfg.planner.backend not in ("scripted", "llm"):
        problems.append(f"planner.backend: {cfg.planner.backend!r} not scripted|llm")
    if cfg.planner.backend == "scripted" and not cfg.planner.rules_file:
        problems.append("planner.rules_file: required for the scripted backend")
    if cfg.planner.backend == "llm" and not cfg.planner.llm_url:
        problems.append(
            f"planner.llm_url: required for the llm backend (or set {ENV_LLM_URL})"
        )
    if not isinstance(cfg.budget_tokens, int) or cfg.budget_tokens < selection.MIN_BUDGET_TOKENS:
        problems.append(
            f"budget_tokens: must be an integer >= {selection.MIN_BUDGET_TOKENS}"
        )
    if not isinstance(cfg.k, int) or cfg.k < 1:
        problems.append("k: must be an integer >= 1")
    if not isinstance(cfg.port, int) or not (0 <= cfg.port < 65536):
        problems.append("port: must be in 0..65535 (0 binds an ephemeral port)")
    if not isinstance(cfg.max_concurrent_invocations, int) or cfg.max_concurrent_invocations < 1:
        problems.append("max_concurrent_invocations: must be an integer >= 1")
    if problems:
        raise ConfigInvalid(problems)
    return cfg


def build_orchestrator(cfg: Config) -> Orchestrator:
    registry = load_registry(cfg.registry_dir)
    if cfg.planner.backend == "scripted":
        backend = ScriptedPlanner(cfg.planner.rules_file)
    else:
        backend = LlmPlanner(
            url=cfg.planner.llm_url,
            model=cfg.planner.model or "default",
            api_key=cfg.planner.api_key,
        )
    return Orchestrator(
        registry=registry,
        planner=backend,
        workspace_root=cfg.workspace_root,
        budget_tokens=cfg.budget_tokens,
        k=cfg.k,
        max_concurrent_invocations=cfg.max_concurrent_invocations,
        parallel_subtasks=cfg.parallel_subtasks,
    )


# -- REPL -------------------------------------------------------------------

def run_repl(cfg: Config, stdin=None, stdout=None) -> int:
    """Interactive loop: each line is a turn; :tools, :trace and :quit are
    meta-commands. Returns the process exit code."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout

    def say(text: str) -> None:
        print(text, file=stdout, flush=True)

    try:
        orch = build_orchestrator(cfg)
    except Exception as exc:
        print(f"startup failed: {exc}", file=sys.stderr, flush=True)
        return 2
    session = orch.create_session()
    say(f"audiofab ready: {len(orch.registry)} tools, session {session.session_id}")
    say("type a request, or :tools / :trace / :quit")
    interactive = hasattr(stdin, "isatty") and stdin.isatty()
    while True:
        if interactive:
            print("you> ", end="", file=stdout, flush=True)
        line = stdin.readline()
        if not line:
            return 0
        line = line.strip()
        if not line:
            continue
        if line == ":quit":
            return 0
        if line == ":tools":
            listing = selection.enumerate_instructions(orch.registry)
            for name, instruction in listing.entries:
                say(f"{name}: {instruction}")
            continue
        if line == ":trace":
            if not session.turns:
                say("(no turns yet)")
            else:
                for e in session.turns[-1].trace:
                    say(f"step {e.step:>2} [{e.stage}] {e.summary}")
            continue
        try:
            response, _trace = orch.handle_turn(session, line)
        except Exception as exc:
            say(f"error: {exc}")
            continue
        say(response)


# -- HTTP service -------------------------------------------------------------

class _SessionChannel:
    """Fan-out of trace events to any number of SSE subscribers."""

    def __init__(self):
        self.lock = threading.Lock()
        self.subscribers: list[queue.Queue] = []

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self.lock:
            self.subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self.lock:
            if q in self.subscribers:
                self.subscribers.remove(q)

    def publish(self, item: dict) -> None:
        with self.lock:
            for q in self.subscribers:
                q.put(item)


class ApiServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, cfg: Config, orchestrator: Orchestrator | None = None):
        self.cfg = cfg
        self.orchestrator = orchestrator or build_orchestrator(cfg)
        self.channels: dict[str, _SessionChannel] = {}
        self.channels_lock = threading.Lock()
        self.ui_dir = Path(cfg.ui_dir) if cfg.ui_dir else None
        super().__init__(("127.0.0.1", cfg.port), ApiHandler)

    def channel(self, session_id: str) -> _SessionChannel:
        with self.channels_lock:
            if session_id not in self.channels:
                self.channels[session_id] = _SessionChannel()
            return self.channels[session_id]


_SESSION_ROUTE = re.compile(r"^/v1/sessions/([A-Za-z0-9_-]+)(/.*)?$")

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".wav": "audio/wav",
    ".png": "image/png",
    ".mp4": "video/mp4",
    ".txt": "text/plain; charset=utf-8",
    ".svg": "image/svg+xml",
}


class ApiHandler(BaseHTTPRequestHandler):
    server: ApiServer
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    # -- plumbing ---------------------------------------------------------

    def _send_json(self, status: int, obj) -> None:
        body = json.dumps(obj).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, message: str) -> None:
        self._send_json(status, {"error": message})

    def _read_body(self) -> dict | None:
        try:
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length) if length else b""
            obj = json.loads(raw.decode("utf-8")) if raw else {}
        except (ValueError, UnicodeDecodeError):
            return None
        return obj if isinstance(obj, dict) else None

    # -- routes -----------------------------------------------------------

    def do_POST(self) -> None:
        url = urlparse(self.path)
        if url.path == "/v1/sessions":
            session = self.server.orchestrator.create_session()
            self._send_json(HTTPStatus.OK, {"session_id": session.session_id})
            return
        m = _SESSION_ROUTE.match(url.path)
        if m and m.group(2) == "/messages":
            self._post_message(m.group(1))
            return
        self._error(HTTPStatus.NOT_FOUND, "no such endpoint")

    def _post_message(self, session_id: str) -> None:
        orch = self.server.orchestrator
        session = orch.get_session(session_id)
        if session is None:
            self._error(HTTPStatus.NOT_FOUND, f"unknown session {session_id}")
            return
        body = self._read_body()
        if body is None or not isinstance(body.get("text"), str) or not body["text"].strip():
            self._error(HTTPStatus.BAD_REQUEST, "body must be JSON with nonempty 'text'")
            return
        channel = self.server.channel(session_id)
        turn_id = len(session.turns)

        def on_event(event):
            channel.publish({"event": "trace", "turn_id": turn_id, **event.to_obj()})

        try:
            response, trace = orch.handle_turn(session, body["text"], on_event=on_event)
        except TurnInFlight:
            self._error(HTTPStatus.CONFLICT, "a turn is already in flight for this session")
            return
        except Exception as exc:
            channel.publish({"event": "done", "turn_id": turn_id, "ok": False})
            self._error(HTTPStatus.INTERNAL_SERVER_ERROR, str(exc))
            return
        channel.publish({"event": "done", "turn_id": turn_id, "ok": True})
        self._send_json(
            HTTPStatus.OK,
            {
                "turn_id": turn_id,
                "response": response,
                "calls": [
                    {
                        "call_id": call.call_id,
                        "tool": call.tool,
                        "arguments": call.arguments,
                        "status": result.status,
                        "duration_ms": result.duration_ms,
                        "artifacts": [
                            self._artifact_url(session, p) for p in result.artifacts
                        ],
                    }
                    for call, result in session.turns[turn_id].calls
                ],
                "trace_ok": not validate_trace(trace),
            },
        )

    @staticmethod
    def _artifact_url(session, path: str) -> str:
        try:
            rel = Path(path).resolve().relative_to(session.workspace.resolve())
        except ValueError:
            return path
        return f"/v1/sessions/{session.session_id}/artifacts/{rel.as_posix()}"

    def do_GET(self) -> None:
        url = urlparse(self.path)
        path = url.path
        if path == "/v1/tools":
            self._get_tools(url)
            return
        if path.startswith("/v1/tools/"):
            self._get_tool(unquote(path[len("/v1/tools/"):]))
            return
        m = _SESSION_ROUTE.match(path)
        if m:
            session_id, rest = m.group(1), m.group(2) or ""
            if rest == "/trace":
                self._get_trace(session_id, url)
                return
            if rest == "/events":
                self._get_events(session_id)
                return
            if rest.startswith("/artifacts/"):
                self._get_artifact(session_id, unquote(rest[len("/artifacts/"):]))
                return
        if self.server.ui_dir is not None:
            self._get_static(path)
            return
        self._error(HTTPStatus.NOT_FOUND, "no such endpoint")

    def _get_tools(self, url) -> None:
        reg = self.server.orchestrator.registry
        listing = selection.enumerate_instructions(reg)
        detail = parse_qs(url.query).get("detail", ["0"])[0] in ("1", "true")
        entries = []
        for name, instruction in listing.entries:
            entry = {"name": name, "instruction": instruction}
            if detail:
                m = reg.get(name)
                entry["modality"] = m.modality
                entry["category"] = m.category
            entries.append(entry)
        self._send_json(
            HTTPStatus.OK,
            {"entries": entries, "token_estimate": listing.token_estimate},
        )

    def _get_tool(self, name: str) -> None:
        reg = self.server.orchestrator.registry
        try:
            detail = selection.query_parameters(reg, name)
        except selection.UnknownTool:
            self._error(HTTPStatus.NOT_FOUND, f"unknown tool {name!r}")
            return
        self._send_json(
            HTTPStatus.OK,
            {
                "name": detail.name,
                "instruction": detail.instruction,
                "modality": detail.modality,
                "category": detail.category,
                "parameters": [
                    {
                        "name": p.name,
                        "type": p.type,
                        "required": p.required,
                        "description": p.description,
                        "enum_values": list(p.enum_values),
                    }
                    for p in detail.parameters
                ],
                "examples": [
                    {
                        "query": ex.query,
                        "arguments": ex.arguments,
                        "expected_output_kind": ex.expected_output_kind,
                    }
                    for ex in detail.examples
                ],
            },
        )

    def _get_trace(self, session_id: str, url) -> None:
        session = self.server.orchestrator.get_session(session_id)
        if session is None:
            self._error(HTTPStatus.NOT_FOUND, f"unknown session {session_id}")
            return
        params = parse_qs(url.query)
        turn = params.get("turn")
        if turn is None:
            index = len(session.turns) - 1
        else:
            try:
                index = int(turn[0])
            except ValueError:
                self._error(HTTPStatus.BAD_REQUEST, "turn must be an integer")
                return
        if index < 0 or index >= len(session.turns):
            self._error(HTTPStatus.NOT_FOUND, f"no turn {index}")
            return
        self._send_json(
            HTTPStatus.OK, [e.to_obj() for e in session.turns[index].trace]
        )

    def _get_events(self, session_id: str) -> None:
        session = self.server.orchestrator.get_session(session_id)
        if session is None:
            self._error(HTTPStatus.NOT_FOUND, f"unknown session {session_id}")
            return
        channel = self.server.channel(session_id)
        q = channel.subscribe()
        try:
            self.send_response(HTTPStatus.OK)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(b": connected\n\n")
            self.wfile.flush()
            while True:
                try:
                    item = q.get(timeout=15.0)
                except queue.Empty:
                    self.wfile.write(b": keepalive\n\n")
                    self.wfile.flush()
                    continue
                name = item.pop("event", "trace")
                data = json.dumps(item)
                self.wfile.write(f"event: {name}\ndata: {data}\n\n".encode("utf-8"))
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass
        finally:
            channel.unsubscribe(q)

    def _get_artifact(self, session_id: str, relpath: str) -> None:
        session = self.server.orchestrator.get_session(session_id)
        if session is None:
            self._error(HTTPStatus.NOT_FOUND, f"unknown session {session_id}")
            return
        ws = session.workspace.resolve()
        target = (ws / relpath).resolve()
        if not target.is_relative_to(ws):
            self._error(HTTPStatus.NOT_FOUND, "artifact path escapes the workspace")
            return
        if not target.is_file():
            self._error(HTTPStatus.NOT_FOUND, f"no artifact {relpath}")
            return
        self._send_file(target)

    def _get_static(self, path: str) -> None:
        ui = self.server.ui_dir
        rel = path.lstrip("/") or "index.html"
        target = (ui / rel).resolve()
        if not target.is_relative_to(ui.resolve()) or not target.is_file():
            if path in ("/", "/index.html") or not Path(rel).suffix:
                target = (ui / "index.html").resolve()
                if not target.is_file():
                    self._error(HTTPStatus.NOT_FOUND, "UI not built")
                    return
            else:
                self._error(HTTPStatus.NOT_FOUND, "no such file")
                return
        self._send_file(target)

    def _send_file(self, target: Path) -> None:
        data = target.read_bytes()
        ctype = _CONTENT_TYPES.get(target.suffix.lower(), "application/octet-stream")
        self.send_response(HTTPStatus.OK)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(data)


def serve(cfg: Config, ready_event: threading.Event | None = None) -> int:
    """Run the HTTP service until interrupted."""
    try:
        server = ApiServer(cfg)
    except Exception as exc:
        print(f"startup failed: {exc}", file=sys.stderr, flush=True)
        return 2
    host, port = server.server_address
    print(f"audiofab serving on http://{host}:{port}/ "
          f"({len(server.orchestrator.registry)} tools)", flush=True)
    if ready_event is not None:
        ready_event.set()
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0
