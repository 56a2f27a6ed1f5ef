"""Placeholder tool process.

Stands in for every technique that would need a heavyweight model: honors
the tool-process contract (one request frame on stdin, one response frame
on stdout), echoes its arguments and environment, and drops a clearly
labeled placeholder artifact. A few special tool names misbehave on
purpose so the executor's containment can be exercised:

  echo_env      -- payload is exactly the process environment
  sleep_forever -- never answers within any sane timeout
  crash_midway  -- emits half a frame, then dies
  conflict_a/b  -- demand LIBVER=1 / LIBVER=2 respectively
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import audiotools, wire

_EXT = {
    "audio_path": "wav",
    "image_path": "png",
    "video_path": "mp4",
    "json": "json",
    "text": "txt",
}


def handed_environ() -> dict:
    """The environment this process was launched with.

    Read from /proc/self/environ where available: the interpreter itself
    mutates os.environ at startup (locale coercion), and the diagnostics
    here are about what the executor handed us, not what the runtime
    added afterwards.
    """
    try:
        raw = Path("/proc/self/environ").read_bytes()
    except OSError:
        return dict(os.environ)
    env: dict = {}
    for chunk in raw.split(b"\x00"):
        if not chunk:
            continue
        key, sep, value = chunk.partition(b"=")
        if sep:
            env[key.decode("utf-8", "replace")] = value.decode("utf-8", "replace")
    return env


def _read_request(request_file: str | None) -> wire.RpcMessage:
    line = sys.stdin.buffer.readline()
    if not line and request_file:
        line = Path(request_file).read_bytes()
    return wire.decode_frame(line)


def _respond(msg: wire.RpcMessage) -> None:
    sys.stdout.buffer.write(wire.encode_frame(msg))
    sys.stdout.buffer.flush()


def _placeholder_artifact(tool: str, kind: str) -> str:
    out = Path("out")
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{tool}.{_EXT.get(kind, 'txt')}"
    if kind == "audio_path":
        silence = audiotools.AudioBuffer(
            sample_rate_hz=16000, samples=[[0.0] * 4000]
        )
        path.write_bytes(audiotools.write_wav(silence, "pcm16"))
    elif kind == "json":
        path.write_text(
            json.dumps({"placeholder": True, "tool": tool}) + "\n", encoding="utf-8"
        )
    else:
        path.write_text(
            f"placeholder output from {tool} (no real model behind this stub)\n",
            encoding="utf-8",
        )
    return str(path)


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="audiofab-stub-tool")
    ap.add_argument("--tool", required=True)
    ap.add_argument("--kind", default="text")
    ap.add_argument("request_file", nargs="?")
    ns = ap.parse_args(argv)

    try:
        req = _read_request(ns.request_file)
    except wire.WireError as exc:
        _respond(wire.response_error(1, wire.RpcError(wire.PARSE_ERROR, str(exc))))
        return 1
    req_id = req.id or 1
    params = req.params or {}
    arguments = params.get("arguments", {})
    tool = ns.tool

    if tool == "sleep_forever":
        time.sleep(3600)
        return 0
    if tool == "crash_midway":
        sys.stdout.write('{"kind":"respo')
        sys.stdout.flush()
        os._exit(3)
    if tool == "echo_env":
        _respond(wire.response_ok(req_id, {"payload": handed_environ(), "artifacts": []}))
        return 0
    if tool in ("conflict_a", "conflict_b"):
        want = "1" if tool == "conflict_a" else "2"
        got = os.environ.get("LIBVER")
        if got != want:
            _respond(wire.response_error(
                req_id,
                wire.RpcError(
                    wire.TOOL_FAILURE,
                    f"LIBVER mismatch: {tool} needs LIBVER={want}, got {got!r}",
                ),
            ))
            return 1
        _respond(wire.response_ok(req_id, {"payload": {"LIBVER": got}, "artifacts": []}))
        return 0

    if tool == "text_edit":
        text = str(arguments.get("text", ""))
        op = arguments.get("operation", "")
        if op == "flip_emotion":
            swaps = {
                "happy": "sad", "sad": "happy", "angry": "calm", "calm": "angry",
                "love": "hate", "hate": "love", "joy": "sorrow", "sorrow": "joy",
            }
            words = [swaps.get(w.lower(), w) for w in text.split()]
            edited = " ".join(words)
        elif op == "uppercase":
            edited = text.upper()
        else:
            edited = text
        _respond(wire.response_ok(
            req_id, {"payload": {"text": edited, "operation": op}, "artifacts": []}
        ))
        return 0

    artifact = _placeholder_artifact(tool, ns.kind)
    payload = {
        "tool": tool,
        "arguments": arguments,
        "env": handed_environ(),
        "placeholder": True,
    }
    _respond(wire.response_ok(req_id, {"payload": payload, "artifacts": [artifact]}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
