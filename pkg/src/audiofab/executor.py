"""Tool invocation: isolated subprocesses speaking the wire protocol.

Isolation is at process + environment + working-directory granularity: a
child sees ONLY the manifest's env_vars plus PATH and AUDIOFAB_WORKDIR,
runs in the per-session workspace, and is killed at its manifest timeout.
The request is written to the child's stdin and duplicated into a
{request_file} JSON file so tools in any language can read either.

Artifacts a tool reports must live under the workspace; anything else is a
PathEscape and fails the call. Everything after a successful spawn is
contained: crashes, garbage output, and overflow become error results,
never exceptions.
"""

from __future__ import annotations

import os
import subprocess
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path

from . import wire
from .registry import EnvSpec, Registry, ToolManifest, check_arguments

STDERR_EXCERPT_BYTES = 4096
DEFAULT_MAX_CONCURRENT = 4


class ExecutorError(Exception):
    pass


class WorkspaceUnavailable(ExecutorError):
    pass


class SpecInvalid(ExecutorError):
    pass


class SpawnFailure(ExecutorError):
    pass


class ProtocolViolation(ExecutorError):
    """Child broke the one-request/one-response frame contract."""


class PathEscape(ExecutorError):
    pass


class UnknownTool(ExecutorError):
    pass


@dataclass(frozen=True)
class ToolCall:
    call_id: str
    tool: str
    arguments: dict


@dataclass(frozen=True)
class ToolResult:
    call_id: str
    status: str  # ok | error | timeout
    payload: object = wire.UNSET
    artifacts: tuple[str, ...] = ()
    stderr_excerpt: str = ""
    duration_ms: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class LaunchPlan:
    argv: tuple[str, ...]
    env: dict
    cwd: str
    timeout_s: float
    max_output_bytes: int
    request_file: str


def validate_call(call: ToolCall, manifest: ToolManifest) -> list[str]:
    """Check the call's arguments against the manifest's parameter schema."""
    if not isinstance(call.arguments, dict):
        return ["arguments: must be a JSON object"]
    return check_arguments(manifest, call.arguments, "arguments")


def resolve_environment(
    spec: EnvSpec, workspace: str | Path, call_id: str | None = None
) -> LaunchPlan:
    """Build the exact launch recipe for one call.

    The child env contains spec.env_vars plus PATH (inherited unless the
    spec pins its own) and AUDIOFAB_WORKDIR (always ours). {request_file}
    placeholders in args are substituted with a per-call path under the
    workspace.
    """
    ws = Path(workspace)
    if not ws.is_dir():
        raise WorkspaceUnavailable(f"workspace does not exist: {ws}")
    if not os.access(ws, os.W_OK):
        raise WorkspaceUnavailable(f"workspace not writable: {ws}")
    if not spec.command or not spec.command.strip():
        raise SpecInvalid("env.command is empty")
    if spec.timeout_s <= 0:
        raise SpecInvalid("env.timeout_s must be > 0")

    req_dir = ws / "requests"
    req_dir.mkdir(exist_ok=True)
    request_file = req_dir / f"{call_id or uuid.uuid4().hex}.json"

    argv = [spec.command] + [
        arg.replace("{request_file}", str(request_file)) for arg in spec.args
    ]
    env = dict(spec.env_vars)
    env.setdefault("PATH", os.environ.get("PATH", ""))
    env["AUDIOFAB_WORKDIR"] = str(ws)

    wd = Path(spec.working_dir)
    cwd = wd if wd.is_absolute() else (ws / wd)
    if cwd.resolve().is_relative_to(ws.resolve()):
        cwd.mkdir(parents=True, exist_ok=True)
    elif not cwd.is_dir():
        raise SpecInvalid(f"working_dir does not exist: {cwd}")

    return LaunchPlan(
        argv=tuple(argv),
        env=env,
        cwd=str(cwd),
        timeout_s=spec.timeout_s,
        max_output_bytes=spec.max_output_bytes,
        request_file=str(request_file),
    )


class _CappedReader(threading.Thread):
    """Drain a pipe on a thread, keeping at most `cap` bytes."""

    def __init__(self, pipe, cap: int):
        super().__init__(daemon=True)
        self.pipe = pipe
        self.cap = cap
        self.data = bytearray()
        self.total = 0

    def run(self) -> None:
        try:
            while True:
                chunk = self.pipe.read(65536)
                if not chunk:
                    break
                self.total += len(chunk)
                room = self.cap - len(self.data)
                if room > 0:
                    self.data += chunk[:room]
        except (OSError, ValueError):
            pass
        finally:
            try:
                self.pipe.close()
            except OSError:
                pass


def _excerpt(data: bytes, prefix: str = "") -> str:
    text = data.decode("utf-8", errors="replace")
    combined = f"{prefix}\n{text}" if prefix and text.strip() else (prefix or text)
    raw = combined.encode("utf-8")[:STDERR_EXCERPT_BYTES]
    return raw.decode("utf-8", errors="ignore")


def invoke_tool(lp: LaunchPlan, call: ToolCall) -> ToolResult:
    """Run one tool call to completion under the launch plan's limits.

    Raises SpawnFailure only when the child cannot start; any later
    misbehavior (timeout, overflow, crash, malformed frame, escaped or
    missing artifacts) is reported as a non-ok ToolResult.
    """
    workspace = Path(lp.env["AUDIOFAB_WORKDIR"])
    req = wire.request(
        1,
        "tools/call",
        {"call_id": call.call_id, "tool": call.tool, "arguments": call.arguments},
    )
    frame = wire.encode_frame(req)
    Path(lp.request_file).write_bytes(frame)

    start = time.monotonic()
    try:
        proc = subprocess.Popen(
            list(lp.argv),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            env=lp.env,
            cwd=lp.cwd,
        )
    except (OSError, ValueError) as exc:
        raise SpawnFailure(f"{lp.argv[0]}: {exc}") from exc

    out_reader = _CappedReader(proc.stdout, lp.max_output_bytes + 1)
    err_reader = _CappedReader(proc.stderr, STDERR_EXCERPT_BYTES)
    out_reader.start()
    err_reader.start()
    try:
        proc.stdin.write(frame)
        proc.stdin.close()
    except (BrokenPipeError, OSError):
        pass  # child may have exited or reads from the request file

    timed_out = False
    try:
        proc.wait(timeout=lp.timeout_s)
    except subprocess.TimeoutExpired:
        timed_out = True
        proc.kill()
        proc.wait()
    out_reader.join(timeout=5)
    err_reader.join(timeout=5)
    duration_ms = int((time.monotonic() - start) * 1000)

    def fail(status: str, note: str) -> ToolResult:
        return ToolResult(
            call_id=call.call_id,
            status=status,
            artifacts=(),
            stderr_excerpt=_excerpt(bytes(err_reader.data), note),
            duration_ms=duration_ms,
        )

    if timed_out:
        return fail("timeout", f"killed after {lp.timeout_s:g}s timeout")
    if out_reader.total > lp.max_output_bytes:
        return fail(
            "error",
            f"OutputOverflow: stdout exceeded {lp.max_output_bytes} bytes",
        )

    stdout = bytes(out_reader.data)
    first, _, rest = stdout.partition(b"\n")
    if rest.strip():
        return fail("error", "protocol violation: more than one frame on stdout")
    if not first.strip():
        return fail(
            "error",
            f"protocol violation: no response frame (exit code {proc.returncode})",
        )
    try:
        msg = wire.decode_frame(first + b"\n")
    except wire.WireError as exc:
        return fail(
            "error",
            f"protocol violation: {exc} (exit code {proc.returncode})",
        )
    if msg.kind != "response" or msg.id != 1:
        return fail("error", "protocol violation: child reply is not response id 1")
    if msg.error is not None:
        return fail("error", msg.error.message)

    result_obj = msg.result
    if isinstance(result_obj, dict) and (
        "payload" in result_obj or "artifacts" in result_obj
    ):
        payload = result_obj.get("payload")
        raw_artifacts = result_obj.get("artifacts", [])
    else:
        payload = result_obj
        raw_artifacts = []
    if not isinstance(raw_artifacts, list):
        return fail("error", "protocol violation: artifacts must be an array")

    resolved: list[str] = []
    ws = workspace.resolve()
    for item in raw_artifacts:
        if not isinstance(item, str):
            return fail("error", "protocol violation: artifact paths must be strings")
        p = Path(item)
        if not p.is_absolute():
            p = Path(lp.cwd) / p
        rp = p.resolve()
        if not rp.is_relative_to(ws):
            return fail("error", f"PathEscape: artifact outside workspace: {item}")
        if not rp.is_file():
            return fail("error", f"artifact reported but missing on disk: {item}")
        resolved.append(str(rp))

    return ToolResult(
        call_id=call.call_id,
        status="ok",
        payload=payload,
        artifacts=tuple(resolved),
        stderr_excerpt=_excerpt(bytes(err_reader.data)),
        duration_ms=duration_ms,
    )


class ToolExecutor:
    """Registry-aware front door with a bounded concurrent-invocation limit."""

    def __init__(
        self,
        registry: Registry,
        workspace: str | Path,
        max_concurrent: int = DEFAULT_MAX_CONCURRENT,
    ):
        self.registry = registry
        self.workspace = Path(workspace)
        self._sem = threading.BoundedSemaphore(max_concurrent)

    def execute(self, call: ToolCall) -> ToolResult:
        manifest = self.registry.get(call.tool)
        if manifest is None:
            raise UnknownTool(call.tool)
        problems = validate_call(call, manifest)
        if problems:
            return ToolResult(
                call_id=call.call_id,
                status="error",
                stderr_excerpt=_excerpt(b"", "invalid arguments: " + "; ".join(problems)),
            )
        with self._sem:
            lp = resolve_environment(manifest.env, self.workspace, call_id=call.call_id)
            return invoke_tool(lp, call)
