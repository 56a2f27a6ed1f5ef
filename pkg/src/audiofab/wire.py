"""Newline-delimited JSON message protocol.

One message per line, strict UTF-8, max 16 MiB per frame. The same framing is
used on every process boundary: gateway <-> orchestrator, orchestrator <->
tool server, tool server <-> tool subprocess. Pure functions, no shared state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

MAX_FRAME_BYTES = 16 * 2**20

METHODS = frozenset(
    {"initialize", "tools/list", "tools/call", "trace/event", "shutdown"}
)

ERROR_CODES = frozenset({-32700, -32600, -32601, -32602, -32000, -32001})

PARSE_ERROR = -32700
INVALID_REQUEST = -32600
METHOD_NOT_FOUND = -32601
INVALID_PARAMS = -32602
TOOL_FAILURE = -32000
TIMEOUT = -32001


class WireError(Exception):
    """Base class for protocol errors. `code` is the matching RPC error code."""

    code = INVALID_REQUEST


class InvariantViolation(WireError):
    """An RpcMessage handed to the encoder breaks the message invariants."""


class ParseError(WireError):
    """Bytes are not one well-formed UTF-8 JSON line (or exceed 16 MiB)."""

    code = PARSE_ERROR


class InvalidRequest(WireError):
    """Valid JSON that does not satisfy the RpcMessage invariants."""

    code = INVALID_REQUEST


class _Unset:
    """Sentinel distinguishing an absent result from a JSON null result."""

    def __repr__(self) -> str:  # pragma: no cover
        return "UNSET"


UNSET: Any = _Unset()


@dataclass(frozen=True)
class RpcError:
    code: int
    message: str
    data: Any = UNSET

    def to_obj(self) -> dict:
        obj: dict = {"code": self.code, "message": self.message}
        if self.data is not UNSET:
            obj["data"] = self.data
        return obj


@dataclass(frozen=True)
class RpcMessage:
    """Protocol envelope: a request, response, or notification.

    Field presence rules:
      * id       -- present iff kind is request/response, integer >= 1
      * method   -- present iff kind is request/notification, one of METHODS
      * params   -- optional JSON object on requests/notifications
      * result   -- success responses only (may be JSON null; UNSET = absent)
      * error    -- failure responses only; exactly one of result/error is set
    """

    kind: str
    id: int | None = None
    method: str | None = None
    params: dict | None = None
    result: Any = UNSET
    error: RpcError | None = None

    def violations(self) -> list[str]:
        v: list[str] = []
        if self.kind not in ("request", "response", "notification"):
            v.append(f"kind: {self.kind!r} not one of request/response/notification")
            return v
        if self.kind in ("request", "response"):
            if type(self.id) is not int or self.id < 1:
                v.append("id: must be an integer >= 1 on requests/responses")
        elif self.id is not None:
            v.append("id: must be absent on notifications")
        if self.kind in ("request", "notification"):
            if not isinstance(self.method, str) or not self.method:
                v.append("method: required nonempty string")
            elif self.method not in METHODS:
                v.append(f"method: {self.method!r} not a known method")
        elif self.method is not None:
            v.append("method: must be absent on responses")
        if self.params is not None and not isinstance(self.params, dict):
            v.append("params: must be a JSON object when present")
        has_result = self.result is not UNSET
        has_error = self.error is not None
        if self.kind == "response":
            if has_result == has_error:
                v.append("response: exactly one of result/error must be present")
        else:
            if has_result:
                v.append("result: only allowed on responses")
            if has_error:
                v.append("error: only allowed on responses")
        if has_error:
            err = self.error
            if not isinstance(err, RpcError):
                v.append("error: must be an RpcError")
            else:
                if type(err.code) is not int or err.code not in ERROR_CODES:
                    v.append(f"error.code: {err.code!r} not a known code")
                if not isinstance(err.message, str) or not err.message:
                    v.append("error.message: required nonempty string")
        return v


def request(id: int, method: str, params: dict | None = None) -> RpcMessage:
    return RpcMessage(kind="request", id=id, method=method, params=params)


def response_ok(id: int, result: Any) -> RpcMessage:
    return RpcMessage(kind="response", id=id, result=result)


def response_error(id: int, error: RpcError) -> RpcMessage:
    return RpcMessage(kind="response", id=id, error=error)


def notification(method: str, params: dict | None = None) -> RpcMessage:
    return RpcMessage(kind="notification", method=method, params=params)


def encode_frame(msg: RpcMessage) -> bytes:
    """Encode one message as a single newline-terminated UTF-8 JSON line."""
    bad = msg.violations()
    if bad:
        raise InvariantViolation("; ".join(bad))
    obj: dict = {"kind": msg.kind}
    if msg.id is not None:
        obj["id"] = msg.id
    if msg.method is not None:
        obj["method"] = msg.method
    if msg.params is not None:
        obj["params"] = msg.params
    if msg.result is not UNSET:
        obj["result"] = msg.result
    if msg.error is not None:
        obj["error"] = msg.error.to_obj()
    try:
        line = json.dumps(
            obj, ensure_ascii=False, allow_nan=False, separators=(",", ":")
        )
    except (TypeError, ValueError) as exc:
        raise InvariantViolation(f"payload not JSON-serializable: {exc}") from exc
    data = line.encode("utf-8") + b"\n"
    if len(data) > MAX_FRAME_BYTES:
        raise InvariantViolation(f"frame exceeds {MAX_FRAME_BYTES} bytes")
    return data


def _reject_constant(name: str) -> Any:
    raise ValueError(f"non-finite constant {name} not allowed")


def decode_frame(line: bytes | str) -> RpcMessage:
    """Decode one frame. Total: any byte input yields a message or a typed error.

    Raises ParseError for byte-level problems (bad UTF-8, bad JSON, oversize)
    and InvalidRequest for well-formed JSON that breaks message invariants.
    """
    if isinstance(line, str):
        line = line.encode("utf-8")
    if len(line) > MAX_FRAME_BYTES:
        raise ParseError(f"frame exceeds {MAX_FRAME_BYTES} bytes")
    try:
        text = line.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"invalid UTF-8: {exc}") from exc
    try:
        obj = json.loads(text, parse_constant=_reject_constant)
    except ValueError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise InvalidRequest("frame is not a JSON object")
    known = {"kind", "id", "method", "params", "result", "error", "jsonrpc"}
    unknown = set(obj) - known
    if unknown:
        raise InvalidRequest(f"unknown keys: {sorted(unknown)}")
    if "kind" not in obj:
        raise InvalidRequest("missing 'kind'")
    err = None
    if "error" in obj:
        eobj = obj["error"]
        if not isinstance(eobj, dict) or set(eobj) - {"code", "message", "data"}:
            raise InvalidRequest("error: must be an object with code/message[/data]")
        if "code" not in eobj or "message" not in eobj:
            raise InvalidRequest("error: code and message are required")
        err = RpcError(
            code=eobj["code"],
            message=eobj["message"],
            data=eobj["data"] if "data" in eobj else UNSET,
        )
    msg = RpcMessage(
        kind=obj["kind"] if isinstance(obj["kind"], str) else repr(obj["kind"]),
        id=obj.get("id"),
        method=obj.get("method"),
        params=obj.get("params"),
        result=obj["result"] if "result" in obj else UNSET,
        error=err,
    )
    bad = msg.violations()
    if bad:
        raise InvalidRequest("; ".join(bad))
    return msg


def read_frame(stream, limit: int = MAX_FRAME_BYTES) -> bytes | None:
    """Read one newline-terminated frame from a binary stream.

    Returns None at EOF before any byte. Raises ParseError if the line grows
    past `limit` or EOF hits mid-frame.
    """
    data = stream.readline(limit + 1)
    if not data:
        return None
    if not data.endswith(b"\n"):
        if len(data) > limit:
            raise ParseError(f"frame exceeds {limit} bytes")
        raise ParseError("EOF inside frame")
    return data
