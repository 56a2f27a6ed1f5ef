"""Built-in tool process: real audio work over the tool-process contract.

One executable, five operations (selected with --op), each backed by the
audiotools module: apply_gain, trim, mix, convert_format, and
detect_voice_activity. Reads one request frame from stdin (or the request
file), writes results under ./out, answers with one response frame.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import audiotools, wire
from .audiotools import AudioBuffer, VadConfig


class _ToolFailure(Exception):
    pass


def _workspace() -> Path:
    return Path(os.environ.get("AUDIOFAB_WORKDIR", "."))


def _resolve(path_arg: str) -> Path:
    p = Path(path_arg)
    if not p.is_absolute():
        p = _workspace() / p
    if not p.is_file():
        raise _ToolFailure(f"input file not found: {path_arg}")
    return p


def _load(path_arg: str) -> tuple[AudioBuffer, str]:
    data = _resolve(path_arg).read_bytes()
    try:
        return audiotools.parse_wav(data), audiotools.wav_format(data)
    except audiotools.AudioError as exc:
        raise _ToolFailure(f"{path_arg}: {exc}") from exc


def _save(tool: str, buf: AudioBuffer, format: str) -> str:
    out = Path("out")
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{tool}.wav"
    path.write_bytes(audiotools.write_wav(buf, format))
    return str(path)


def _num(arguments: dict, key: str, default=None):
    if key not in arguments:
        if default is None:
            raise _ToolFailure(f"missing required argument {key!r}")
        return default
    value = arguments[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _ToolFailure(f"argument {key!r} must be a number")
    return float(value)


def _run_op(op: str, tool: str, arguments: dict) -> dict:
    if op == "apply_gain":
        buf, fmt = _load(arguments["audio_path"])
        result = audiotools.apply_gain(buf, _num(arguments, "gain_db"))
        artifact = _save(tool, result, fmt)
        return {"payload": {"gain_db": _num(arguments, "gain_db")},
                "artifacts": [artifact]}
    if op == "trim":
        buf, fmt = _load(arguments["audio_path"])
        result = audiotools.trim(
            buf, _num(arguments, "start_s"), _num(arguments, "end_s")
        )
        artifact = _save(tool, result, fmt)
        return {"payload": {"frames": result.length_frames},
                "artifacts": [artifact]}
    if op == "mix":
        a, fmt = _load(arguments["audio_path_a"])
        b, _ = _load(arguments["audio_path_b"])
        result = audiotools.mix(a, b)
        artifact = _save(tool, result, fmt)
        return {"payload": {"frames": result.length_frames},
                "artifacts": [artifact]}
    if op == "convert_format":
        buf, _ = _load(arguments["audio_path"])
        target = arguments.get("sample_format")
        if target not in ("pcm16", "float32"):
            raise _ToolFailure("sample_format must be pcm16 or float32")
        artifact = _save(tool, buf, target)
        return {"payload": {"sample_format": target}, "artifacts": [artifact]}
    if op == "detect_voice_activity":
        buf, _ = _load(arguments["audio_path"])
        cfg = VadConfig(
            threshold_dbfs=_num(arguments, "threshold_dbfs", default=-40.0)
        )
        segments = audiotools.detect_voice_activity(buf, cfg)
        seg_objs = [{"start_s": s.start_s, "end_s": s.end_s} for s in segments]
        out = Path("out")
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{tool}.json"
        path.write_text(json.dumps({"segments": seg_objs}) + "\n", encoding="utf-8")
        return {"payload": {"segments": seg_objs}, "artifacts": [str(path)]}
    raise _ToolFailure(f"unknown op {op!r}")


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="audiofab-builtin-tool")
    ap.add_argument("--op", required=True)
    ap.add_argument("request_file", nargs="?")
    ns = ap.parse_args(argv)

    line = sys.stdin.buffer.readline()
    if not line and ns.request_file:
        line = Path(ns.request_file).read_bytes()
    try:
        req = wire.decode_frame(line)
    except wire.WireError as exc:
        sys.stdout.buffer.write(wire.encode_frame(
            wire.response_error(1, wire.RpcError(wire.PARSE_ERROR, str(exc)))
        ))
        return 1
    req_id = req.id or 1
    params = req.params or {}
    tool = params.get("tool", ns.op)
    arguments = params.get("arguments", {})
    try:
        result = _run_op(ns.op, tool, arguments)
        reply = wire.response_ok(req_id, result)
        code = 0
    except (_ToolFailure, KeyError) as exc:
        detail = f"missing required argument {exc}" if isinstance(exc, KeyError) else str(exc)
        reply = wire.response_error(
            req_id, wire.RpcError(wire.TOOL_FAILURE, detail)
        )
        code = 1
    sys.stdout.buffer.write(wire.encode_frame(reply))
    sys.stdout.buffer.flush()
    return code


if __name__ == "__main__":
    sys.exit(main())
