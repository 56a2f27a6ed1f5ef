"""audiofab: a tool-learning audio agent framework.

A registry of declaratively described audio tools, a lexical retrieval
layer with budgeted context assembly, a planner (scripted or LLM-backed)
that decomposes requests into subtask DAGs, and an executor that runs
each tool as an isolated subprocess over a newline-framed JSON protocol.
"""

__version__ = "0.1.0"

from .audiotools import AudioBuffer, VadSegment
from .executor import ToolCall, ToolExecutor, ToolResult
from .orchestrator import Orchestrator, TraceEvent, validate_trace
from .planner import Plan, Subtask, parse_plan
from .registry import Registry, ToolManifest, load_registry, register_tool, validate_manifest
from .selection import build_context, enumerate_instructions, match_tools, query_parameters
from .wire import RpcError, RpcMessage, decode_frame, encode_frame

__all__ = [
    "AudioBuffer", "VadSegment",
    "ToolCall", "ToolExecutor", "ToolResult",
    "Orchestrator", "TraceEvent", "validate_trace",
    "Plan", "Subtask", "parse_plan",
    "Registry", "ToolManifest", "load_registry", "register_tool", "validate_manifest",
    "build_context", "enumerate_instructions", "match_tools", "query_parameters",
    "RpcError", "RpcMessage", "decode_frame", "encode_frame",
    "__version__",
]
